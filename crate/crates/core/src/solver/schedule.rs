use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::gmp::GmpStructure;

/// Per-order l1 weights `lambda_k` and zero thresholds `tau_k`, keyed by the
/// envelope power `k` (polynomial order `k + 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizationSchedule {
    lambda_by_order: BTreeMap<u32, f64>,
    threshold_by_order: BTreeMap<u32, f64>,
}

impl RegularizationSchedule {
    pub fn new(lambda_by_order: BTreeMap<u32, f64>, threshold_by_order: BTreeMap<u32, f64>) -> Result<Self> {
        for (k, l) in &lambda_by_order {
            if !(l.is_finite() && *l > 0.0) {
                return Err(Error::config(format!("lambda for order k={k} must be positive, got {l}")));
            }
        }
        for (k, t) in &threshold_by_order {
            if !(t.is_finite() && *t >= 0.0) {
                return Err(Error::config(format!(
                    "zero threshold for order k={k} must be non-negative, got {t}"
                )));
            }
        }
        Ok(RegularizationSchedule {
            lambda_by_order,
            threshold_by_order,
        })
    }

    /// The same `lambda` and `threshold` for every order in `orders`.
    pub fn uniform(orders: &[u32], lambda: f64, threshold: f64) -> Result<Self> {
        RegularizationSchedule::new(
            orders.iter().map(|&k| (k, lambda)).collect(),
            orders.iter().map(|&k| (k, threshold)).collect(),
        )
    }

    pub fn lambda(&self, k: u32) -> Option<f64> {
        self.lambda_by_order.get(&k).copied()
    }

    pub fn threshold(&self, k: u32) -> Option<f64> {
        self.threshold_by_order.get(&k).copied()
    }

    pub fn lambdas(&self) -> &BTreeMap<u32, f64> {
        &self.lambda_by_order
    }

    pub fn thresholds(&self) -> &BTreeMap<u32, f64> {
        &self.threshold_by_order
    }

    pub fn min_lambda(&self) -> f64 {
        self.lambda_by_order.values().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Fails naming the first order of `structure` without a lambda or threshold.
    pub fn check_covers(&self, structure: &GmpStructure) -> Result<()> {
        for k in structure.orders() {
            if !self.lambda_by_order.contains_key(&k) {
                return Err(Error::config(format!(
                    "schedule has no lambda for order k={k} (polynomial order {})",
                    k + 1
                )));
            }
            if !self.threshold_by_order.contains_key(&k) {
                return Err(Error::config(format!(
                    "schedule has no zero threshold for order k={k} (polynomial order {})",
                    k + 1
                )));
            }
        }
        Ok(())
    }
}

pub const DEFAULT_LAMBDA0: f64 = 1e-4;
pub const DEFAULT_THRESHOLD0: f64 = 0.17;
/// Largest envelope power the default schedule is tabulated for.
pub const DEFAULT_MAX_ORDER: u32 = 14;

/// Growth factor applied from order `k - 2` to order `k`.
fn step_ratio(k: u32) -> f64 {
    if k <= 8 {
        1.35
    } else {
        2.0
    }
}

/// Order-progressive schedule: `lambda_0 = 1e-4` and `tau_0 = 0.17` for the
/// linear block, each step up in order multiplies both by 1.35 through
/// `k = 8` and by 2 for `k = 10..=14`.
pub fn default_schedule(structure: &GmpStructure) -> Result<RegularizationSchedule> {
    progressive_schedule(structure, DEFAULT_LAMBDA0, DEFAULT_THRESHOLD0)
}

/// The growth rule of [`default_schedule`] started from other linear-block
/// values.
pub fn progressive_schedule(
    structure: &GmpStructure,
    lambda0: f64,
    threshold0: f64,
) -> Result<RegularizationSchedule> {
    let orders = structure.orders();
    if let Some(k) = orders.iter().find(|&&k| k > DEFAULT_MAX_ORDER) {
        return Err(Error::config(format!(
            "progressive schedule covers k <= {DEFAULT_MAX_ORDER}; order k={k} needs an explicit schedule"
        )));
    }
    let mut lambdas = BTreeMap::new();
    let mut thresholds = BTreeMap::new();
    let (mut lambda, mut tau) = (lambda0, threshold0);
    for k in (0..=DEFAULT_MAX_ORDER).step_by(2) {
        if k > 0 {
            lambda *= step_ratio(k);
            tau *= step_ratio(k);
        }
        if orders.contains(&k) {
            lambdas.insert(k, lambda);
            thresholds.insert(k, tau);
        }
    }
    RegularizationSchedule::new(lambdas, thresholds)
}
