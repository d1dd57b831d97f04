use num_complex::Complex64;

use super::{pa_forward, PaModel};
use crate::error::{Error, Result};
use crate::signal::{nmse_db, IqSignal};

/// Proportional ILC: `x <- x + mu (s - PA(x) / G)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IlcConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub target_gain: Complex64,
}

impl Default for IlcConfig {
    fn default() -> Self {
        IlcConfig {
            iterations: 30,
            learning_rate: 0.5,
            target_gain: Complex64::new(1.0, 0.0),
        }
    }
}

impl IlcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::config("ILC needs at least one iteration"));
        }
        if !(0.0..=1.0).contains(&self.learning_rate) {
            return Err(Error::config(format!(
                "ILC learning rate must lie in [0, 1], got {}",
                self.learning_rate
            )));
        }
        if self.target_gain.norm() == 0.0 || !self.target_gain.is_finite() {
            return Err(Error::config("ILC target gain must be nonzero"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IlcOutcome {
    /// The learned PA input (predistortion label).
    pub label: IqSignal,
    /// `nmse_db(PA(x_i) / G, s)` for `i = 0..=iterations`.
    pub error_db: Vec<f64>,
}

/// Number of consecutive error increases that counts as divergence.
const DIVERGENCE_RUN: usize = 3;

pub fn ilc_learn(stimulus: &IqSignal, pa: &PaModel, config: &IlcConfig) -> Result<IqSignal> {
    ilc_learn_traced(stimulus, pa, config).map(|o| o.label)
}

pub fn ilc_learn_traced(stimulus: &IqSignal, pa: &PaModel, config: &IlcConfig) -> Result<IlcOutcome> {
    config.validate()?;
    let inv_gain = config.target_gain.inv();
    let mu = config.learning_rate;
    let s = stimulus.samples();

    let mut x = stimulus.clone();
    let mut error_db = Vec::with_capacity(config.iterations + 1);
    let mut rising = 0;
    for i in 0..=config.iterations {
        let y = pa_forward(&x, pa)?;
        let normalized = y.scaled(inv_gain)?;
        let err = nmse_db(&normalized, stimulus)?;
        if let Some(&prev) = error_db.last() {
            rising = if err > prev { rising + 1 } else { 0 };
            if rising >= DIVERGENCE_RUN {
                return Err(Error::Divergence { mu });
            }
        }
        error_db.push(err);
        if i == config.iterations {
            break;
        }
        let next = x
            .samples()
            .iter()
            .zip(s)
            .zip(normalized.samples())
            .map(|((xn, sn), yn)| xn + (sn - yn) * mu)
            .collect();
        x = x.with_samples(next)?;
    }
    Ok(IlcOutcome { label: x, error_db })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{generate_ofdm, OfdmConfig, DB_FLOOR};

    fn stimulus() -> IqSignal {
        generate_ofdm(&OfdmConfig {
            n_symbols: 16,
            ..OfdmConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn identity_pa_is_a_fixed_point() {
        let g = Complex64::new(0.0, 2.0);
        let pa = PaModel::linear(g).unwrap();
        let s = stimulus();
        let out = ilc_learn_traced(
            &s,
            &pa,
            &IlcConfig {
                iterations: 5,
                target_gain: g,
                ..IlcConfig::default()
            },
        )
        .unwrap();
        for (a, b) in out.label.samples().iter().zip(s.samples()) {
            assert!((a - b).norm() <= 1e-15 * b.norm().max(1.0));
        }
        assert!(out.error_db.iter().all(|e| *e < -290.0 || *e == DB_FLOOR));
    }

    #[test]
    fn zero_learning_rate_leaves_stimulus() {
        let s = stimulus();
        let x = ilc_learn(
            &s,
            &PaModel::shipped(),
            &IlcConfig {
                learning_rate: 0.0,
                ..IlcConfig::default()
            },
        )
        .unwrap();
        assert_eq!(x, s);
    }

    #[test]
    fn invalid_config() {
        let s = stimulus();
        let pa = PaModel::shipped();
        for cfg in [
            IlcConfig { iterations: 0, ..IlcConfig::default() },
            IlcConfig { learning_rate: 1.5, ..IlcConfig::default() },
            IlcConfig { target_gain: Complex64::new(0.0, 0.0), ..IlcConfig::default() },
        ] {
            assert!(matches!(ilc_learn(&s, &pa, &cfg), Err(Error::Config(_))));
        }
    }

    #[test]
    fn divergence_is_detected() {
        // target gain far below the PA gain makes the loop overshoot
        let pa = PaModel::linear(Complex64::new(1.0, 0.0)).unwrap();
        let cfg = IlcConfig {
            iterations: 20,
            learning_rate: 1.0,
            target_gain: Complex64::new(0.3, 0.0),
        };
        let err = ilc_learn(&stimulus(), &pa, &cfg).unwrap_err();
        assert!(matches!(err, Error::Divergence { mu } if mu == 1.0));
    }
}
