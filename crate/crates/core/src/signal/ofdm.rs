use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use super::IqSignal;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constellation {
    Qpsk,
    Qam16,
    Qam64,
}

impl Constellation {
    /// Levels per I/Q axis.
    fn side(self) -> u32 {
        match self {
            Constellation::Qpsk => 2,
            Constellation::Qam16 => 4,
            Constellation::Qam64 => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Constellation::Qpsk => "qpsk",
            Constellation::Qam16 => "qam16",
            Constellation::Qam64 => "qam64",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qpsk" => Ok(Constellation::Qpsk),
            "qam16" | "16qam" => Ok(Constellation::Qam16),
            "qam64" | "64qam" => Ok(Constellation::Qam64),
            other => Err(Error::config(format!("unknown constellation '{other}'"))),
        }
    }

    /// Unit-average-power symbol from the low bits of `bits`.
    fn map(self, bits: u32) -> Complex64 {
        let m = self.side();
        let shift = m.trailing_zeros();
        let i = bits & (m - 1);
        let q = (bits >> shift) & (m - 1);
        let level = |v: u32| (2 * v) as f64 - (m - 1) as f64;
        // average power of a square M^2-QAM with odd-integer levels
        let scale = (2.0 * ((m * m) as f64 - 1.0) / 3.0).sqrt();
        Complex64::new(level(i) / scale, level(q) / scale)
    }
}

/// Synthetic OFDM stimulus parameters.
///
/// Random data symbols come from `ChaCha8Rng::seed_from_u64(seed)`, one
/// `next_u32` per active subcarrier per symbol, consumed symbol by symbol
/// and within a symbol from the lowest positive bin upward, then the
/// negative bins from -1 downward.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmConfig {
    pub n_subcarriers: usize,
    pub n_active: usize,
    pub n_symbols: usize,
    pub oversampling_factor: usize,
    pub constellation: Constellation,
    pub seed: u64,
    pub target_rms: f64,
    pub subcarrier_spacing_hz: f64,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        OfdmConfig {
            n_subcarriers: 64,
            n_active: 52,
            n_symbols: 64,
            oversampling_factor: 4,
            constellation: Constellation::Qam64,
            seed: 1,
            target_rms: 1.0,
            subcarrier_spacing_hz: 312_500.0,
        }
    }
}

impl OfdmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_subcarriers == 0 || self.n_symbols == 0 || self.oversampling_factor == 0 {
            return Err(Error::config(
                "n_subcarriers, n_symbols and oversampling_factor must be positive",
            ));
        }
        if self.n_active == 0 || self.n_active >= self.n_subcarriers {
            return Err(Error::config(format!(
                "n_active must be in 1..n_subcarriers (guard band required), got {} of {}",
                self.n_active, self.n_subcarriers
            )));
        }
        if !(self.target_rms.is_finite() && self.target_rms > 0.0) {
            return Err(Error::config("target_rms must be positive"));
        }
        if !(self.subcarrier_spacing_hz.is_finite() && self.subcarrier_spacing_hz > 0.0) {
            return Err(Error::config("subcarrier_spacing_hz must be positive"));
        }
        Ok(())
    }

    pub fn fft_len(&self) -> usize {
        self.n_subcarriers * self.oversampling_factor
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.subcarrier_spacing_hz * self.fft_len() as f64
    }

    /// Active FFT bins of the oversampled grid: positive bins `1..=ceil(n/2)`
    /// followed by negative bins `-1..=-floor(n/2)`. DC is never used.
    pub fn active_bins(&self) -> Vec<usize> {
        let len = self.fft_len();
        let pos = self.n_active.div_ceil(2);
        let neg = self.n_active / 2;
        (1..=pos).chain((1..=neg).map(|k| len - k)).collect()
    }
}

pub fn generate_ofdm(config: &OfdmConfig) -> Result<IqSignal> {
    config.validate()?;
    let len = config.fft_len();
    let bins = config.active_bins();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(len);

    let mut samples = Vec::with_capacity(len * config.n_symbols);
    let mut grid = vec![Complex64::new(0.0, 0.0); len];
    for _ in 0..config.n_symbols {
        grid.fill(Complex64::new(0.0, 0.0));
        for &bin in &bins {
            grid[bin] = config.constellation.map(rng.next_u32());
        }
        ifft.process(&mut grid);
        samples.extend_from_slice(&grid);
    }

    let raw = IqSignal::new(samples, config.sample_rate_hz())?;
    raw.normalized_to_rms(config.target_rms)
}
