//! Complex baseband signals: synthetic OFDM stimulus, IQ file I/O and the
//! NMSE / EVM figures of merit.

mod iqfile;
mod metrics;
mod ofdm;

pub use iqfile::{read_iq, write_iq, IQ_MAGIC, IQ_VERSION};
pub use metrics::{evm_db, nmse_db, MetricReport, DB_FLOOR};
pub use ofdm::{generate_ofdm, Constellation, OfdmConfig};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A finite, non-empty complex baseband sample sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct IqSignal {
    samples: Vec<Complex64>,
    sample_rate_hz: f64,
}

impl IqSignal {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Degenerate("signal has no samples".into()));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::config(format!(
                "sample rate must be positive and finite, got {sample_rate_hz}"
            )));
        }
        if let Some(i) = samples
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::Degenerate(format!("sample {i} is not finite")));
        }
        Ok(IqSignal {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; kept for API symmetry with slices.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn rms(&self) -> f64 {
        (self.energy() / self.len() as f64).sqrt()
    }

    /// Same sample rate, new samples. Fails only if the samples are not finite.
    pub fn with_samples(&self, samples: Vec<Complex64>) -> Result<Self> {
        IqSignal::new(samples, self.sample_rate_hz)
    }

    pub fn scaled(&self, factor: Complex64) -> Result<Self> {
        self.with_samples(self.samples.iter().map(|z| z * factor).collect())
    }

    /// Rescales so the RMS amplitude equals `target_rms`.
    pub fn normalized_to_rms(&self, target_rms: f64) -> Result<Self> {
        let rms = self.rms();
        if rms == 0.0 {
            return Err(Error::Degenerate("cannot normalize an all-zero signal".into()));
        }
        self.scaled(Complex64::new(target_rms / rms, 0.0))
    }
}
