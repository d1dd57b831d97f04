//! Simulated power amplifier with memory and the iterative-learning-control
//! loop that produces predistortion training labels.

mod ilc;
mod preset;

pub use ilc::{ilc_learn, ilc_learn_traced, IlcConfig, IlcOutcome};
pub use preset::{draw_preset, PresetRecipe, SHIPPED_PRESET, SHIPPED_PRESET_SEED};

use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gmp::{apply_model, format_coefficients, parse_coefficients, CoefficientVector};
use crate::signal::IqSignal;

/// Behavioral PA: a GMP followed by an optional per-sample soft clip.
#[derive(Debug, Clone, PartialEq)]
pub struct PaModel {
    pub coefficients: CoefficientVector,
    pub smallsignal_gain: Complex64,
    pub saturation_level: Option<f64>,
}

impl PaModel {
    pub fn new(
        coefficients: CoefficientVector,
        smallsignal_gain: Complex64,
        saturation_level: Option<f64>,
    ) -> Result<Self> {
        if smallsignal_gain.norm() == 0.0 || !smallsignal_gain.is_finite() {
            return Err(Error::config("PA small-signal gain must be nonzero"));
        }
        if let Some(s) = saturation_level {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::config(format!("saturation level must be positive, got {s}")));
            }
        }
        Ok(PaModel {
            coefficients,
            smallsignal_gain,
            saturation_level,
        })
    }

    /// Linear memoryless PA `y = g x`.
    pub fn linear(gain: Complex64) -> Result<Self> {
        let st = crate::gmp::full_structure(0, 1, 0, false, 0)?;
        PaModel::new(CoefficientVector::new(st, vec![gain])?, gain, None)
    }

    /// The preset committed with the crate.
    pub fn shipped() -> Self {
        PaModel::from_text(SHIPPED_PRESET).expect("shipped preset parses")
    }

    pub fn to_text(&self, comments: &[String]) -> String {
        let sat = self
            .saturation_level
            .map_or_else(|| "none".to_string(), |s| format!("{s:e}"));
        let extras = vec![
            (
                "pa.smallsignal_gain".to_string(),
                format!("{:e},{:e}", self.smallsignal_gain.re, self.smallsignal_gain.im),
            ),
            ("pa.saturation_level".to_string(), sat),
        ];
        format_coefficients(&self.coefficients, comments, &extras)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut file = parse_coefficients(text)?;
        let gain = file
            .extras
            .remove("pa.smallsignal_gain")
            .ok_or_else(|| Error::format(0, "missing header field 'pa.smallsignal_gain'"))?;
        let gain = parse_complex(&gain).ok_or_else(|| Error::format(0, format!("invalid gain '{gain}'")))?;
        let sat = match file.extras.remove("pa.saturation_level").as_deref() {
            None | Some("none") => None,
            Some(v) => Some(
                v.parse::<f64>()
                    .map_err(|_| Error::format(0, format!("invalid saturation level '{v}'")))?,
            ),
        };
        if let Some(k) = file.extras.keys().next() {
            return Err(Error::format(0, format!("unknown header field '{k}'")));
        }
        PaModel::new(file.coeffs, gain, sat)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PaModel::from_text(&text)
    }
}

fn parse_complex(s: &str) -> Option<Complex64> {
    let (a, b) = s.split_once(',')?;
    Some(Complex64::new(a.trim().parse().ok()?, b.trim().parse().ok()?))
}

/// Runs `input` through the PA.
pub fn pa_forward(input: &IqSignal, model: &PaModel) -> Result<IqSignal> {
    let y = apply_model(input, &model.coefficients)?;
    match model.saturation_level {
        None => Ok(y),
        Some(sat) => y.with_samples(
            y.samples()
                .iter()
                .map(|z| {
                    let a = z.norm();
                    if a > sat {
                        z * (sat / a)
                    } else {
                        *z
                    }
                })
                .collect(),
        ),
    }
}

/// Adds circular complex Gaussian noise at `snr_db` below the signal power.
pub fn add_noise(signal: &IqSignal, snr_db: f64, seed: u64) -> Result<IqSignal> {
    let power = signal.energy() / signal.len() as f64;
    let sigma = (power * 10f64.powf(-snr_db / 10.0) / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = signal
        .samples()
        .iter()
        .map(|z| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            z + Complex64::new(re, im) * sigma
        })
        .collect();
    signal.with_samples(samples)
}
