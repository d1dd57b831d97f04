use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gmp::{apply_model, format_coefficients, parse_coefficients, CoefficientVector, GmpStructure};
use crate::signal::IqSignal;

/// A fitted GMP predistorter together with the input scaling it was fitted
/// under: `x = GMP(c s) / c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Predistorter {
    pub coeffs: CoefficientVector,
    pub input_scale: f64,
}

impl Predistorter {
    pub fn new(coeffs: CoefficientVector, input_scale: f64) -> Result<Self> {
        if !(input_scale.is_finite() && input_scale > 0.0) {
            return Err(Error::config(format!("input scale must be positive, got {input_scale}")));
        }
        Ok(Predistorter { coeffs, input_scale })
    }

    /// Pass-through model on `structure`: only the linear memoryless kernel,
    /// with coefficient 1.
    pub fn identity(structure: GmpStructure) -> Result<Self> {
        let mut coeffs = CoefficientVector::zeros(structure);
        let j = coeffs
            .columns()
            .iter()
            .position(|d| d.k == 0 && d.l == 0 && d.m.is_none())
            .ok_or_else(|| Error::config("structure has no linear memoryless kernel"))?;
        coeffs.values_mut()[j] = Complex64::new(1.0, 0.0);
        Predistorter::new(coeffs, 1.0)
    }

    pub fn apply(&self, signal: &IqSignal) -> Result<IqSignal> {
        let c = self.input_scale;
        if c == 1.0 {
            return apply_model(signal, &self.coeffs);
        }
        let y = apply_model(&signal.scaled(Complex64::new(c, 0.0))?, &self.coeffs)?;
        y.scaled(Complex64::new(1.0 / c, 0.0))
    }

    pub fn to_text(&self, comments: &[String]) -> String {
        format_coefficients(
            &self.coeffs,
            comments,
            &[("dpd.input_scale".to_string(), format!("{:e}", self.input_scale))],
        )
    }

    /// Parses a DPD coefficient file. A missing `dpd.input_scale` means 1;
    /// any other extra header field is rejected.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut file = parse_coefficients(text)?;
        let scale = match file.extras.remove("dpd.input_scale") {
            None => 1.0,
            Some(v) => v
                .parse::<f64>()
                .map_err(|_| Error::format(0, format!("invalid dpd.input_scale '{v}'")))?,
        };
        if let Some(k) = file.extras.keys().next() {
            return Err(Error::format(0, format!("unknown header field '{k}'")));
        }
        Predistorter::new(file.coeffs, scale)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Predistorter::from_text(&text)
    }
}
