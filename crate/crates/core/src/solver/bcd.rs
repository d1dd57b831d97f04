//! Block coordinate descent for the block-weighted Lasso.
//!
//! Blocks are the kernels sharing one polynomial order, across all three
//! GMP branches. Each outer iteration visits the blocks in ascending order
//! and re-solves the block's own Lasso against the residual left by the
//! other blocks.

use std::fmt::Write as _;

use nalgebra::DVector;
use num_complex::Complex64;

use super::lasso::{iterated_ridge_gram, objective, residual, NormalSystem};
use super::linalg::submatrix;
use super::schedule::RegularizationSchedule;
use crate::error::{Error, Result};
use crate::gmp::{effective_memory_depth, kernel_count, CoefficientVector, KernelMatrix};
use crate::signal::{nmse_db, IqSignal, DB_FLOOR};

#[derive(Debug, Clone, PartialEq)]
pub struct BcdConfig {
    /// Outer BCD sweeps `R`.
    pub outer_iterations: usize,
    /// Ridge solves per inner Lasso call.
    pub inner_ridge_iterations: usize,
    /// Inner loop stops once successive iterates differ by less than this
    /// (max modulus).
    pub inner_tolerance: f64,
    /// Return the outer iterate with the lowest NMSE instead of the last.
    pub keep_best_iterate: bool,
    /// Floor on `|w_j|` in the majorizer weights.
    pub ridge_epsilon: f64,
    /// Start every block solve from the uniform weights instead of the
    /// block's previous coefficients.
    pub cold_start: bool,
}

impl Default for BcdConfig {
    fn default() -> Self {
        BcdConfig {
            outer_iterations: 10,
            inner_ridge_iterations: 50,
            inner_tolerance: 1e-8,
            keep_best_iterate: true,
            ridge_epsilon: 1e-8,
            cold_start: false,
        }
    }
}

impl BcdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.outer_iterations == 0 || self.inner_ridge_iterations == 0 {
            return Err(Error::config("iteration counts must be at least 1"));
        }
        if !(self.inner_tolerance > 0.0 && self.ridge_epsilon > 0.0) {
            return Err(Error::config("inner_tolerance and ridge_epsilon must be positive"));
        }
        Ok(())
    }
}

/// State after one outer iteration.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub iteration: usize,
    pub nmse_db: f64,
    pub kernel_count: usize,
    pub effective_memory_depth: i64,
    pub objective: f64,
    /// `(k, lambda_k)` for every block visited.
    pub lambdas: Vec<(u32, f64)>,
    pub coefficients: CoefficientVector,
}

#[derive(Debug, Clone, Default)]
pub struct FitTrace {
    pub records: Vec<TraceRecord>,
    /// Objective before the first block update, then after every block
    /// update (accepted or not).
    pub block_objectives: Vec<f64>,
    /// Iteration number (1-based) of the returned iterate.
    pub selected_iteration: usize,
}

impl FitTrace {
    /// `iteration,nmse_db,kernel_count,depth` table, one row per outer iteration.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,nmse_db,kernel_count,depth\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{:.6},{},{}",
                r.iteration, r.nmse_db, r.kernel_count, r.effective_memory_depth
            );
        }
        out
    }
}

struct Block {
    k: u32,
    lambda: f64,
    threshold: f64,
    idx: Vec<usize>,
}

/// `x - sum_{g != k} S_g w_g` for the block of order `k`.
pub fn block_residual(
    s: &KernelMatrix,
    x: &IqSignal,
    coeffs: &CoefficientVector,
    k: u32,
) -> Result<Vec<Complex64>> {
    let mut others = coeffs.clone();
    for j in s.block_indices(k) {
        others.values_mut()[j] = Complex64::new(0.0, 0.0);
    }
    residual(s, x, &others)
}

/// Solves the block-weighted Lasso by block coordinate descent.
///
/// All blocks start at zero. A block update that would increase the full
/// objective is discarded and the block keeps its previous value, so
/// [`FitTrace::block_objectives`] never increases.
pub fn block_weighted_lasso(
    s: &KernelMatrix,
    x: &IqSignal,
    schedule: &RegularizationSchedule,
    config: &BcdConfig,
) -> Result<(CoefficientVector, FitTrace)> {
    config.validate()?;
    schedule.check_covers(s.structure())?;
    let target = s.target_rows(x)?;
    let target_signal = IqSignal::new(target.to_vec(), x.sample_rate_hz())?;
    let sys = NormalSystem::new(s, x)?;

    let blocks: Vec<Block> = s
        .structure()
        .orders()
        .into_iter()
        .map(|k| Block {
            k,
            lambda: schedule.lambda(k).expect("covered"),
            threshold: schedule.threshold(k).expect("covered"),
            idx: s.block_indices(k),
        })
        .collect();
    let lambdas: Vec<(u32, f64)> = blocks.iter().map(|b| (b.k, b.lambda)).collect();

    let mut w = CoefficientVector::zeros(s.structure().clone());
    let mut current = objective(s, x, &w, schedule)?;
    let mut trace = FitTrace {
        block_objectives: vec![current],
        ..FitTrace::default()
    };

    for r in 1..=config.outer_iterations {
        for block in &blocks {
            let g_kk = submatrix(&sys.gram, &block.idx);
            let rhs = block_rhs(&sys, w.values(), &block.idx);
            let previous: Vec<Complex64> = block.idx.iter().map(|&j| w.values()[j]).collect();
            let warm = (!config.cold_start).then_some(previous.as_slice());
            let update = iterated_ridge_gram(&g_kk, &rhs, block.lambda, block.threshold, config, warm)?;

            let mut candidate = w.clone();
            for (a, &j) in block.idx.iter().enumerate() {
                candidate.values_mut()[j] = update[a];
            }
            let value = objective(s, x, &candidate, schedule)?;
            if value <= current {
                w = candidate;
                current = value;
            }
            trace.block_objectives.push(current);
        }

        let fit = s.data() * DVector::from_column_slice(w.values());
        let fit = IqSignal::new(fit.iter().copied().collect(), x.sample_rate_hz())?;
        let nmse = match nmse_db(&fit, &target_signal) {
            Ok(v) => v,
            Err(Error::Degenerate(_)) => DB_FLOOR,
            Err(e) => return Err(e),
        };
        trace.records.push(TraceRecord {
            iteration: r,
            nmse_db: nmse,
            kernel_count: kernel_count(&w, 0.0),
            effective_memory_depth: effective_memory_depth(&w, 0.0),
            objective: current,
            lambdas: lambdas.clone(),
            coefficients: w.clone(),
        });
    }

    let chosen = if config.keep_best_iterate {
        // first minimum wins ties
        let mut best = 0;
        for (i, rec) in trace.records.iter().enumerate() {
            if rec.nmse_db < trace.records[best].nmse_db {
                best = i;
            }
        }
        best
    } else {
        trace.records.len() - 1
    };
    trace.selected_iteration = chosen + 1;
    Ok((trace.records[chosen].coefficients.clone(), trace))
}

/// `S_k^H x~_k = b_k - sum_{g not in block} G[k, g] w_g`.
fn block_rhs(sys: &NormalSystem, w: &[Complex64], idx: &[usize]) -> DVector<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    let mut in_block = vec![false; w.len()];
    for &j in idx {
        in_block[j] = true;
    }
    DVector::from_iterator(
        idx.len(),
        idx.iter().map(|&j| {
            let mut acc = sys.rhs[j];
            for (g, wg) in w.iter().enumerate() {
                if !in_block[g] && *wg != zero {
                    acc -= sys.gram[(j, g)] * wg;
                }
            }
            acc
        }),
    )
}
