use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::PaModel;
use crate::error::Result;
use crate::gmp::{full_structure, Branch, CoefficientVector};

/// The shipped PA, as committed under `presets/`.
pub const SHIPPED_PRESET: &str = include_str!("../../presets/pa_default.coef");
/// Seed the shipped preset was drawn with.
pub const SHIPPED_PRESET_SEED: u64 = 2024;

/// Recipe for a random GMP power amplifier with decaying memory.
///
/// The memoryless polynomial is fixed; every memory kernel gets a uniformly
/// random phase and a magnitude that decays geometrically with lag.
#[derive(Debug, Clone, PartialEq)]
pub struct PresetRecipe {
    pub max_lag: usize,
    pub max_order: u32,
    pub lagging_depth: usize,
    /// Memoryless coefficients for `k = 2, 4, 6, ...`; the linear one is 1.
    pub memoryless: Vec<Complex64>,
    /// Magnitude scale of the lag-1 linear tap.
    pub linear_tap: f64,
    /// Nonlinear memory magnitude relative to the memoryless coefficient of
    /// the same order.
    pub nonlinear_memory: f64,
    /// Per-lag decay factor.
    pub lag_decay: f64,
}

impl Default for PresetRecipe {
    fn default() -> Self {
        PresetRecipe {
            max_lag: 4,
            max_order: 7,
            lagging_depth: 1,
            memoryless: vec![
                Complex64::new(-0.018, 4.86e-3),
                Complex64::new(4.0e-4, -9.2e-5),
                Complex64::new(-2.3e-6, 4.6e-7),
            ],
            linear_tap: 0.25,
            nonlinear_memory: 0.6,
            lag_decay: 0.25,
        }
    }
}

/// Draws a PA from `recipe` with `ChaCha8Rng::seed_from_u64(seed)`. Two
/// uniforms (magnitude jitter in `[0.5, 1)`, phase in `[0, 2 pi)`) are drawn
/// per kernel in canonical column order, whether used or not.
pub fn draw_preset(recipe: &PresetRecipe, seed: u64) -> Result<PaModel> {
    let st = full_structure(recipe.max_lag, recipe.max_order, recipe.lagging_depth, false, 0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let memoryless = |k: u32| -> Complex64 {
        if k == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            recipe
                .memoryless
                .get(k as usize / 2 - 1)
                .copied()
                .unwrap_or(Complex64::new(0.0, 0.0))
        }
    };
    let values = st
        .descriptors()
        .iter()
        .map(|d| {
            let jitter: f64 = rng.random_range(0.5..1.0);
            let phase: f64 = rng.random_range(0.0..TAU);
            let rot = Complex64::from_polar(jitter, phase);
            let base = memoryless(d.k);
            match (d.branch, d.k, d.l) {
                (Branch::Aligned, _, 0) => base,
                (Branch::Aligned, 0, l) => rot * recipe.linear_tap * recipe.lag_decay.powi(l as i32 - 1),
                (Branch::Aligned, _, l) => {
                    rot * base.norm() * recipe.nonlinear_memory * recipe.lag_decay.powi(l as i32 - 1)
                }
                (_, _, l) => rot * base.norm() * recipe.nonlinear_memory * recipe.lag_decay.powi(l as i32),
            }
        })
        .collect();
    PaModel::new(CoefficientVector::new(st, values)?, Complex64::new(1.0, 0.0), None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_preset_matches_its_recipe() {
        let drawn = draw_preset(&PresetRecipe::default(), SHIPPED_PRESET_SEED).unwrap();
        assert_eq!(PaModel::shipped(), drawn);
    }

    #[test]
    fn shipped_preset_shape() {
        let pa = PaModel::shipped();
        assert_eq!(pa.coefficients.len(), 35);
        assert_eq!(pa.smallsignal_gain, Complex64::new(1.0, 0.0));
        assert_eq!(pa.saturation_level, None);
        assert_eq!(crate::gmp::max_memory_lag(&pa.coefficients, 0.0), 4);
    }
}
