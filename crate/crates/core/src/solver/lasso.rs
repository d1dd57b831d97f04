use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::bcd::BcdConfig;
use super::linalg::{condition_estimate, correlate, gram, solve_hpd, submatrix, synthesize};
use super::schedule::RegularizationSchedule;
use crate::error::{Error, Result};
use crate::gmp::{CoefficientVector, KernelMatrix};
use crate::signal::IqSignal;

/// Normal equations with a condition estimate above this are refused.
pub const MAX_CONDITION: f64 = 1e12;

/// Normal-equation form `(S^H S, S^H x)` of one regression problem.
#[derive(Debug, Clone)]
pub(crate) struct NormalSystem {
    pub gram: DMatrix<Complex64>,
    pub rhs: DVector<Complex64>,
}

impl NormalSystem {
    pub fn new(s: &KernelMatrix, x: &IqSignal) -> Result<Self> {
        let target = s.target_rows(x)?;
        Ok(NormalSystem {
            gram: gram(s.data()),
            rhs: correlate(s.data(), target),
        })
    }
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

pub(crate) fn least_squares_gram(
    g: &DMatrix<Complex64>,
    b: &DVector<Complex64>,
    label: impl FnOnce() -> String,
) -> Result<DVector<Complex64>> {
    let cond = condition_estimate(g);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::RankDeficient {
            structure: label(),
            condition: cond,
        });
    }
    solve_hpd(g, b).ok_or_else(|| Error::RankDeficient {
        structure: label(),
        condition: cond,
    })
}

fn ridge_gram(
    g: &DMatrix<Complex64>,
    b: &DVector<Complex64>,
    idx: &[usize],
    weights: &[f64],
) -> Result<DVector<Complex64>> {
    let mut a = submatrix(g, idx);
    for (i, d) in weights.iter().enumerate() {
        a[(i, i)] += d;
    }
    let rhs = DVector::from_iterator(idx.len(), idx.iter().map(|&j| b[j]));
    solve_hpd(&a, &rhs).ok_or_else(|| {
        Error::Degenerate(format!(
            "ridge system on {} columns is not numerically positive definite",
            idx.len()
        ))
    })
}

/// Iterated ridge regression for `min ||x - S w||^2 + lambda ||w||_1` in
/// normal-equation form.
///
/// Each pass solves `(G_AA + diag(d)) w_A = b_A` with
/// `d_j = lambda / (2 max(|w_j|, eps))` from the previous pass (the quadratic
/// majorizer of `|w_j|`); the first pass uses `d_j = lambda / 2`, or the
/// weights of `warm` where it is nonzero. After every pass, coefficients with
/// modulus below `max(zero_threshold, eps)` are set to zero and leave the
/// active set for the rest of the call. If `lambda >= 2 max |b_j|` the zero
/// vector is optimal and is returned without iterating.
pub(crate) fn iterated_ridge_gram(
    g: &DMatrix<Complex64>,
    b: &DVector<Complex64>,
    lambda: f64,
    zero_threshold: f64,
    config: &BcdConfig,
    warm: Option<&[Complex64]>,
) -> Result<Vec<Complex64>> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::config(format!("lambda must be positive, got {lambda}")));
    }
    let p = b.len();
    let eps = config.ridge_epsilon;
    let floor = zero_threshold.max(eps);
    let weight = |w: f64| lambda / (2.0 * w.max(eps));

    // w = 0 satisfies the optimality conditions exactly
    if b.iter().all(|z| 2.0 * z.norm() <= lambda) {
        return Ok(vec![zero(); p]);
    }

    let mut active: Vec<usize> = (0..p).collect();
    let mut weights: Vec<f64> = match warm {
        Some(w) => w
            .iter()
            .map(|z| if z.norm() > 0.0 { weight(z.norm()) } else { lambda / 2.0 })
            .collect(),
        None => vec![lambda / 2.0; p],
    };
    let mut w = vec![zero(); p];

    for _ in 0..config.inner_ridge_iterations {
        if active.is_empty() {
            break;
        }
        let sol = ridge_gram(g, b, &active, &weights)?;
        let mut next = vec![zero(); p];
        for (a, &j) in active.iter().enumerate() {
            next[j] = sol[a];
        }
        active.retain(|&j| {
            if next[j].norm() < floor {
                next[j] = zero();
                false
            } else {
                true
            }
        });
        let delta = next
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        w = next;
        if delta < config.inner_tolerance {
            break;
        }
        weights = active.iter().map(|&j| weight(w[j].norm())).collect();
    }
    Ok(w)
}

/// Unregularized least squares via the normal equations.
pub fn least_squares(s: &KernelMatrix, x: &IqSignal) -> Result<CoefficientVector> {
    let sys = NormalSystem::new(s, x)?;
    let w = least_squares_gram(&sys.gram, &sys.rhs, || s.structure().summary())?;
    CoefficientVector::new(s.structure().clone(), w.iter().copied().collect())
}

/// Solves `(S^H S + diag(weights)) w = S^H x`.
pub fn ridge(s: &KernelMatrix, x: &IqSignal, weights: &[f64]) -> Result<CoefficientVector> {
    if weights.len() != s.ncols() {
        return Err(Error::Dimension {
            expected: s.ncols(),
            got: weights.len(),
        });
    }
    if let Some(d) = weights.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
        return Err(Error::config(format!("ridge weights must be positive, got {d}")));
    }
    let sys = NormalSystem::new(s, x)?;
    let idx: Vec<usize> = (0..s.ncols()).collect();
    let w = ridge_gram(&sys.gram, &sys.rhs, &idx, weights)?;
    CoefficientVector::new(s.structure().clone(), w.iter().copied().collect())
}

/// Standard (uniformly weighted) Lasso by iterated ridge regression.
pub fn lasso_iterated_ridge(
    s: &KernelMatrix,
    x: &IqSignal,
    lambda: f64,
    zero_threshold: f64,
    config: &BcdConfig,
) -> Result<CoefficientVector> {
    config.validate()?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::config(format!("lambda must be positive, got {lambda}")));
    }
    let sys = NormalSystem::new(s, x)?;
    let w = iterated_ridge_gram(&sys.gram, &sys.rhs, lambda, zero_threshold, config, None)?;
    CoefficientVector::new(s.structure().clone(), w)
}

/// One standard-Lasso design reused across many `lambda`; the normal
/// equations are formed once.
#[derive(Debug, Clone)]
pub struct LassoProblem {
    sys: NormalSystem,
    structure: crate::gmp::GmpStructure,
}

impl LassoProblem {
    pub fn new(s: &KernelMatrix, x: &IqSignal) -> Result<Self> {
        Ok(LassoProblem {
            sys: NormalSystem::new(s, x)?,
            structure: s.structure().clone(),
        })
    }

    /// Same result as [`lasso_iterated_ridge`] on the original `(S, x)`.
    pub fn solve(&self, lambda: f64, zero_threshold: f64, config: &BcdConfig) -> Result<CoefficientVector> {
        config.validate()?;
        let w = iterated_ridge_gram(&self.sys.gram, &self.sys.rhs, lambda, zero_threshold, config, None)?;
        CoefficientVector::new(self.structure.clone(), w)
    }
}

/// Least squares restricted to the columns in `support`; all other
/// coefficients are exactly zero.
pub fn ls_refine(s: &KernelMatrix, x: &IqSignal, support: &[usize]) -> Result<CoefficientVector> {
    if support.is_empty() {
        return Err(Error::config("LS refinement needs a nonempty support"));
    }
    if let Some(j) = support.iter().find(|&&j| j >= s.ncols()) {
        return Err(Error::config(format!("support index {j} out of range")));
    }
    let sub = s.data().select_columns(support);
    let target = s.target_rows(x)?;
    let g = gram(&sub);
    let b = correlate(&sub, target);
    let w = least_squares_gram(&g, &b, || {
        let kernels: Vec<String> = support.iter().map(|&j| s.columns()[j].to_string()).collect();
        format!("{} restricted to [{}]", s.structure().summary(), kernels.join(", "))
    })?;
    let mut out = CoefficientVector::zeros(s.structure().clone());
    for (a, &j) in support.iter().enumerate() {
        out.values_mut()[j] = w[a];
    }
    Ok(out)
}

/// `x - S w` over the matrix rows.
pub fn residual(s: &KernelMatrix, x: &IqSignal, coeffs: &CoefficientVector) -> Result<Vec<Complex64>> {
    if coeffs.len() != s.ncols() {
        return Err(Error::Dimension {
            expected: s.ncols(),
            got: coeffs.len(),
        });
    }
    let target = s.target_rows(x)?;
    let fit = synthesize(s.data(), coeffs.values());
    Ok(target.iter().zip(fit).map(|(a, b)| a - b).collect())
}

/// Regression NMSE of `S w` against the matrix rows of `x`, in dB.
pub fn fit_nmse_db(s: &KernelMatrix, x: &IqSignal, coeffs: &CoefficientVector) -> Result<f64> {
    let r = residual(s, x, coeffs)?;
    let target = s.target_rows(x)?;
    let ref_energy: f64 = target.iter().map(|z| z.norm_sqr()).sum();
    if ref_energy == 0.0 {
        return Err(Error::Degenerate("label signal is all zeros".into()));
    }
    let err: f64 = r.iter().map(|z| z.norm_sqr()).sum();
    Ok((10.0 * (err / ref_energy).log10()).max(crate::signal::DB_FLOOR))
}

/// Block-weighted Lasso objective `||x - S w||^2 + sum_j lambda(j) |w_j|`
/// with `lambda(j)` taken from the column's order block.
pub fn objective(
    s: &KernelMatrix,
    x: &IqSignal,
    coeffs: &CoefficientVector,
    schedule: &RegularizationSchedule,
) -> Result<f64> {
    schedule.check_covers(s.structure())?;
    let r = residual(s, x, coeffs)?;
    let fit: f64 = r.iter().map(|z| z.norm_sqr()).sum();
    let penalty: f64 = coeffs
        .columns()
        .iter()
        .zip(coeffs.values())
        .map(|(d, w)| schedule.lambda(d.k).expect("covered") * w.norm())
        .sum();
    Ok(fit + penalty)
}

/// Largest stationarity violations over the active (`w_j != 0`) and
/// inactive columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    pub max_violation_active: f64,
    pub max_violation_inactive: f64,
}

/// Subgradient optimality check of a (block-weighted) Lasso solution.
///
/// With `r = x - S w`: active columns must satisfy
/// `2 S_j^H r = lambda(j) w_j / |w_j|`, inactive ones `2 |S_j^H r| <= lambda(j)`.
pub fn kkt_check(
    s: &KernelMatrix,
    x: &IqSignal,
    coeffs: &CoefficientVector,
    schedule: &RegularizationSchedule,
) -> Result<KktReport> {
    schedule.check_covers(s.structure())?;
    let r = residual(s, x, coeffs)?;
    let corr = correlate(s.data(), &r);
    let mut report = KktReport {
        max_violation_active: 0.0,
        max_violation_inactive: 0.0,
    };
    for (j, (d, w)) in coeffs.columns().iter().zip(coeffs.values()).enumerate() {
        let lambda = schedule.lambda(d.k).expect("covered");
        let g = corr[j] * 2.0;
        if w.norm() > 0.0 {
            let v = (g - w * (lambda / w.norm())).norm();
            report.max_violation_active = report.max_violation_active.max(v);
        } else {
            let v = (g.norm() - lambda).max(0.0);
            report.max_violation_inactive = report.max_violation_inactive.max(v);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmp::{build_kernel_matrix, full_structure, GmpStructure};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Signal whose 2-lag linear kernel matrix is the 2x2 identity.
    fn identity_design() -> (KernelMatrix, IqSignal) {
        let s = IqSignal::new(vec![c(1.0, 0.0), c(0.0, 0.0)], 1.0).unwrap();
        let st = full_structure(1, 1, 0, false, 0).unwrap();
        let m = build_kernel_matrix(&s, &st).unwrap();
        assert_eq!(m.data(), &DMatrix::<Complex64>::identity(2, 2));
        let x = IqSignal::new(vec![c(1.0, 0.0), c(0.1, 0.0)], 1.0).unwrap();
        (m, x)
    }

    fn random_problem(seed: u64, n: usize, lags: usize) -> (KernelMatrix, IqSignal, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = IqSignal::new(
            (0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect(),
            1.0,
        )
        .unwrap();
        let st = full_structure(lags - 1, 1, 0, false, 0).unwrap();
        let m = build_kernel_matrix(&s, &st).unwrap();
        let x = IqSignal::new(
            (0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect(),
            1.0,
        )
        .unwrap();
        (m, x, rng)
    }

    fn max_diff(a: &CoefficientVector, b: &CoefficientVector) -> f64 {
        a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn ls_exact_single_column() {
        let s = IqSignal::new(vec![c(1.0, 2.0), c(-0.5, 0.3), c(0.2, 0.0)], 1.0).unwrap();
        let st = full_structure(0, 1, 0, false, 0).unwrap();
        let m = build_kernel_matrix(&s, &st).unwrap();
        let w = least_squares(&m, &s).unwrap();
        assert!((w.values()[0] - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn ls_duplicate_columns_rank_deficient() {
        let s = IqSignal::new(vec![c(1.0, 2.0), c(-0.5, 0.3), c(0.2, 0.0), c(0.0, 1.0)], 1.0).unwrap();
        // lagging k=0 duplicates aligned k=0
        let st = GmpStructure::new(vec![0], vec![0], vec![0], vec![0], vec![1], vec![], vec![], vec![]).unwrap();
        let m = build_kernel_matrix(&s, &st).unwrap();
        let mut dup = m.data().clone();
        let col0 = dup.column(0).into_owned();
        dup.set_column(1, &col0);
        let err = least_squares_gram(&gram(&dup), &correlate(&dup, s.samples()), || st.summary()).unwrap_err();
        match err {
            Error::RankDeficient { structure, .. } => assert!(structure.contains("GMP")),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn ls_plant_and_recover() {
        let (m, _, mut rng) = random_problem(11, 32, 4);
        let planted: Vec<Complex64> = (0..4).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let x = IqSignal::new(synthesize(m.data(), &planted), 1.0).unwrap();
        let w = least_squares(&m, &x).unwrap();
        for (a, b) in w.values().iter().zip(&planted) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn ls_residual_is_orthogonal() {
        let (m, x, _) = random_problem(12, 40, 5);
        let w = least_squares(&m, &x).unwrap();
        let r = residual(&m, &x, &w).unwrap();
        let corr = correlate(m.data(), &r);
        let scale = m.data().norm() * x.energy().sqrt();
        assert!(corr.norm() <= 1e-8 * scale);
    }

    #[test]
    fn ridge_closed_form_and_limits() {
        let s = IqSignal::new(vec![c(1.0, 0.0)], 1.0).unwrap();
        let m = build_kernel_matrix(&s, &full_structure(0, 1, 0, false, 0).unwrap()).unwrap();
        let w = ridge(&m, &s, &[1.0]).unwrap();
        assert!((w.values()[0] - c(0.5, 0.0)).norm() < 1e-15);

        let (m, x, _) = random_problem(13, 40, 4);
        let ls = least_squares(&m, &x).unwrap();
        let tiny = ridge(&m, &x, &[1e-12; 4]).unwrap();
        assert!(max_diff(&ls, &tiny) < 1e-8);
        let huge = ridge(&m, &x, &[1e12; 4]).unwrap();
        assert!(huge.values().iter().all(|z| z.norm() < 1e-9));
        assert!(ridge(&m, &x, &[1.0, 0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn lasso_orthonormal_soft_threshold() {
        let (m, x) = identity_design();
        let w = lasso_iterated_ridge(&m, &x, 0.4, 1e-6, &BcdConfig::default()).unwrap();
        assert!((w.values()[0] - c(0.8, 0.0)).norm() < 1e-8, "{:?}", w.values());
        assert_eq!(w.values()[1], c(0.0, 0.0));
        let sched = RegularizationSchedule::uniform(&[0], 0.4, 1e-6).unwrap();
        let kkt = kkt_check(&m, &x, &w, &sched).unwrap();
        assert!(kkt.max_violation_active < 1e-8 && kkt.max_violation_inactive < 1e-12, "{kkt:?}");
    }

    #[test]
    fn lasso_null_solution_for_large_lambda() {
        let (m, x, _) = random_problem(14, 30, 4);
        let sys = NormalSystem::new(&m, &x).unwrap();
        let lam = 2.0 * sys.rhs.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let w = lasso_iterated_ridge(&m, &x, lam, 0.0, &BcdConfig::default()).unwrap();
        assert!(w.values().iter().all(|z| *z == c(0.0, 0.0)), "{:?}", w.values());
        let sched = RegularizationSchedule::uniform(&[0], lam, 0.0).unwrap();
        let kkt = kkt_check(&m, &x, &w, &sched).unwrap();
        assert_eq!(kkt.max_violation_inactive, 0.0);
        assert_eq!(kkt.max_violation_active, 0.0);
    }

    #[test]
    fn lasso_small_lambda_matches_ls() {
        let (m, x, _) = random_problem(15, 40, 4);
        let ls = least_squares(&m, &x).unwrap();
        let w = lasso_iterated_ridge(&m, &x, 1e-9, 0.0, &BcdConfig::default()).unwrap();
        assert!(max_diff(&ls, &w) < 1e-6);
    }

    #[test]
    fn lasso_rejects_nonpositive_lambda() {
        let (m, x) = identity_design();
        assert!(matches!(
            lasso_iterated_ridge(&m, &x, 0.0, 0.0, &BcdConfig::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn kkt_detects_perturbation() {
        let (m, x) = identity_design();
        let mut w = lasso_iterated_ridge(&m, &x, 0.4, 1e-6, &BcdConfig::default()).unwrap();
        w.values_mut()[0] += c(0.1, 0.0);
        let sched = RegularizationSchedule::uniform(&[0], 0.4, 1e-6).unwrap();
        assert!(kkt_check(&m, &x, &w, &sched).unwrap().max_violation_active > 0.1);
    }

    #[test]
    fn refine_single_column_closed_form() {
        let (m, x, _) = random_problem(16, 30, 4);
        let w = ls_refine(&m, &x, &[2]).unwrap();
        let col = m.data().column(2);
        let xv = DVector::from_column_slice(x.samples());
        let want = col.dotc(&xv) / col.dotc(&col);
        assert!((w.values()[2] - want).norm() < 1e-12);
        for j in [0, 1, 3] {
            assert_eq!(w.values()[j], c(0.0, 0.0));
        }
        let all = ls_refine(&m, &x, &[0, 1, 2, 3]).unwrap();
        assert!(max_diff(&all, &least_squares(&m, &x).unwrap()) < 1e-12);
        assert!(matches!(ls_refine(&m, &x, &[]), Err(Error::Config(_))));
    }

    #[test]
    fn refine_beats_lasso_on_same_support() {
        let (m, x, _) = random_problem(17, 60, 6);
        let w = lasso_iterated_ridge(&m, &x, 8.0, 0.0, &BcdConfig::default()).unwrap();
        let support = w.support(0.0);
        assert!(!support.is_empty() && support.len() < 6, "{support:?}");
        let r = ls_refine(&m, &x, &support).unwrap();
        let e = |w: &CoefficientVector| residual(&m, &x, w).unwrap().iter().map(|z| z.norm_sqr()).sum::<f64>();
        assert!(e(&r) <= e(&w) * (1.0 + 1e-8));
    }

    #[test]
    fn lasso_problem_matches_one_shot_solver() {
        let (m, x, _) = random_problem(18, 50, 5);
        let prob = LassoProblem::new(&m, &x).unwrap();
        for lam in [0.5, 4.0, 20.0] {
            let a = prob.solve(lam, 1e-3, &BcdConfig::default()).unwrap();
            let b = lasso_iterated_ridge(&m, &x, lam, 1e-3, &BcdConfig::default()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn fit_nmse_of_exact_and_empty_models() {
        let (m, x) = identity_design();
        let exact = least_squares(&m, &x).unwrap();
        assert_eq!(fit_nmse_db(&m, &x, &exact).unwrap(), crate::signal::DB_FLOOR);
        let zero = CoefficientVector::zeros(m.structure().clone());
        assert!(fit_nmse_db(&m, &x, &zero).unwrap().abs() < 1e-12);
    }
}
