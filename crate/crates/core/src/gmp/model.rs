use num_complex::Complex64;

use super::matrix::{envelope_power, fill_kernel};
use super::structure::{Branch, GmpStructure, KernelDescriptor};
use crate::error::{Error, Result};
use crate::signal::IqSignal;

/// Kernel coefficients aligned with the canonical column order of a
/// [`GmpStructure`].
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    values: Vec<Complex64>,
    columns: Vec<KernelDescriptor>,
    structure: GmpStructure,
}

impl CoefficientVector {
    pub fn new(structure: GmpStructure, values: Vec<Complex64>) -> Result<Self> {
        let columns = structure.descriptors();
        if values.len() != columns.len() {
            return Err(Error::Dimension {
                expected: columns.len(),
                got: values.len(),
            });
        }
        Ok(CoefficientVector {
            values,
            columns,
            structure,
        })
    }

    pub fn zeros(structure: GmpStructure) -> Self {
        let p = structure.kernel_count();
        CoefficientVector::new(structure, vec![Complex64::new(0.0, 0.0); p])
            .expect("length matches by construction")
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn columns(&self) -> &[KernelDescriptor] {
        &self.columns
    }

    pub fn structure(&self) -> &GmpStructure {
        &self.structure
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, d: &KernelDescriptor) -> Option<Complex64> {
        self.columns.iter().position(|c| c == d).map(|j| self.values[j])
    }

    /// Indices `j` with `|w_j| > threshold`.
    pub fn support(&self, threshold: f64) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, w)| w.norm() > threshold)
            .map(|(j, _)| j)
            .collect()
    }

    /// Elementwise sum; both vectors must share a structure.
    pub fn try_add(&self, other: &CoefficientVector) -> Result<CoefficientVector> {
        if self.structure != other.structure {
            return Err(Error::config("coefficient vectors belong to different structures"));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        CoefficientVector::new(self.structure.clone(), values)
    }

    /// Sum of coefficient moduli.
    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|w| w.norm()).sum()
    }
}

/// Evaluates the GMP on `signal` kernel by kernel without materializing
/// the regression matrix. Zero-padded at both ends; output length equals
/// input length.
pub fn apply_model(signal: &IqSignal, coeffs: &CoefficientVector) -> Result<IqSignal> {
    let samples = signal.samples();
    let n = samples.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    let mut column = vec![Complex64::new(0.0, 0.0); n];
    let mut envelopes: Vec<(u32, Vec<f64>)> = Vec::new();
    for (d, w) in coeffs.columns().iter().zip(coeffs.values()) {
        if *w == Complex64::new(0.0, 0.0) {
            continue;
        }
        let idx = match envelopes.iter().position(|(k, _)| *k == d.k) {
            Some(i) => i,
            None => {
                envelopes.push((d.k, envelope_power(samples, d.k)));
                envelopes.len() - 1
            }
        };
        fill_kernel(samples, &envelopes[idx].1, d, 0, &mut column);
        for (o, c) in out.iter_mut().zip(&column) {
            *o += w * c;
        }
    }
    signal.with_samples(out)
}

/// Deepest past sample index touched by the kernels with `|w_j| > threshold`
/// (`l` for aligned and leading kernels, `l + m` for lagging ones), or -1
/// when no kernel survives.
pub fn effective_memory_depth(coeffs: &CoefficientVector, threshold: f64) -> i64 {
    coeffs
        .support(threshold)
        .into_iter()
        .map(|j| coeffs.columns()[j].depth() as i64)
        .max()
        .unwrap_or(-1)
}

/// Largest memory lag `l` among surviving kernels, ignoring cross lags;
/// -1 for an empty support.
pub fn max_memory_lag(coeffs: &CoefficientVector, threshold: f64) -> i64 {
    coeffs
        .support(threshold)
        .into_iter()
        .map(|j| coeffs.columns()[j].l as i64)
        .max()
        .unwrap_or(-1)
}

pub fn kernel_count(coeffs: &CoefficientVector, threshold: f64) -> usize {
    coeffs.support(threshold).len()
}

/// Number of surviving kernels per branch, in `[aligned, lagging, leading]` order.
pub fn branch_counts(coeffs: &CoefficientVector, threshold: f64) -> [usize; 3] {
    let mut out = [0; 3];
    for j in coeffs.support(threshold) {
        let slot = match coeffs.columns()[j].branch {
            Branch::Aligned => 0,
            Branch::Lagging => 1,
            Branch::Leading => 2,
        };
        out[slot] += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmp::{build_kernel_matrix, full_structure};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_signal(rng: &mut ChaCha8Rng, n: usize) -> IqSignal {
        IqSignal::new(
            (0..n)
                .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect(),
            1.0,
        )
        .unwrap()
    }

    fn random_coeffs(rng: &mut ChaCha8Rng, st: &GmpStructure) -> CoefficientVector {
        let v = (0..st.kernel_count())
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        CoefficientVector::new(st.clone(), v).unwrap()
    }

    fn matrix_path(s: &IqSignal, w: &CoefficientVector) -> Vec<Complex64> {
        let m = build_kernel_matrix(s, w.structure()).unwrap();
        let wv = nalgebra::DVector::from_column_slice(w.values());
        (m.data() * wv).iter().copied().collect()
    }

    #[test]
    fn zero_coefficients_give_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_signal(&mut rng, 20);
        let st = full_structure(2, 5, 1, false, 0).unwrap();
        let y = apply_model(&s, &CoefficientVector::zeros(st)).unwrap();
        assert!(y.samples().iter().all(|z| *z == c(0.0, 0.0)));
    }

    #[test]
    fn linear_memoryless_scales_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_signal(&mut rng, 20);
        let st = full_structure(0, 1, 0, false, 0).unwrap();
        let g = c(0.3, -1.2);
        let y = apply_model(&s, &CoefficientVector::new(st, vec![g]).unwrap()).unwrap();
        for (a, b) in y.samples().iter().zip(s.samples()) {
            assert_eq!(*a, g * b);
        }
    }

    #[test]
    fn streaming_matches_matrix_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_signal(&mut rng, 16);
        // P = 6
        let st = full_structure(1, 3, 1, false, 0).unwrap();
        let w = random_coeffs(&mut rng, &st);
        let a = apply_model(&s, &w).unwrap();
        let b = matrix_path(&s, &w);
        let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (x, y) in a.samples().iter().zip(&b) {
            assert!((x - y).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn depth_and_count() {
        let st = full_structure(19, 15, 1, false, 0).unwrap();
        let mut w = CoefficientVector::zeros(st.clone());
        assert_eq!(effective_memory_depth(&w, 0.0), -1);
        assert_eq!(kernel_count(&w, 0.0), 0);

        let j = w.columns().iter().position(|d| *d == KernelDescriptor::aligned(2, 13)).unwrap();
        w.values_mut()[j] = c(0.5, 0.0);
        assert_eq!(effective_memory_depth(&w, 0.0), 13);

        let mut w = CoefficientVector::zeros(st.clone());
        let j = w.columns().iter().position(|d| *d == KernelDescriptor::lagging(2, 12, 1)).unwrap();
        w.values_mut()[j] = c(0.0, 0.1);
        assert_eq!(effective_memory_depth(&w, 0.0), 13);
        assert_eq!(max_memory_lag(&w, 0.0), 12);

        let full = CoefficientVector::new(st.clone(), vec![c(1.0, 1.0); 300]).unwrap();
        assert_eq!(kernel_count(&full, 0.0), 300);
        // max(L, max Lb + max Mb)
        assert_eq!(effective_memory_depth(&full, 0.0), 20);
        assert_eq!(branch_counts(&full, 0.0), [160, 140, 0]);

        let mut w = CoefficientVector::zeros(st);
        for j in 0..46 {
            w.values_mut()[j * 6] = c(0.2, 0.0);
        }
        assert_eq!(kernel_count(&w, 0.1), 46);
        assert_eq!(kernel_count(&w, 0.2), 0);
    }

    #[test]
    fn cross_kernels_with_k0_duplicate_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = random_signal(&mut rng, 24);
        let st = GmpStructure::new(vec![0], vec![0, 1, 2], vec![0], vec![0, 1, 2], vec![1, 2], vec![0], vec![0, 1, 2], vec![1])
            .unwrap();
        let m = build_kernel_matrix(&s, &st).unwrap();
        for (j, d) in m.columns().iter().enumerate() {
            let base = m.columns().iter().position(|x| *x == KernelDescriptor::aligned(0, d.l)).unwrap();
            assert_eq!(m.data().column(j), m.data().column(base), "{d}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn apply_model_is_linear_in_coefficients(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_signal(&mut rng, 32);
            let st = full_structure(2, 5, 1, true, 1).unwrap();
            let w1 = random_coeffs(&mut rng, &st);
            let w2 = random_coeffs(&mut rng, &st);
            let y12 = apply_model(&s, &w1.try_add(&w2).unwrap()).unwrap();
            let y1 = apply_model(&s, &w1).unwrap();
            let y2 = apply_model(&s, &w2).unwrap();
            let scale = y12.samples().iter().map(|z| z.norm()).fold(1.0, f64::max);
            for ((a, b), c) in y12.samples().iter().zip(y1.samples()).zip(y2.samples()) {
                prop_assert!((a - (b + c)).norm() <= 1e-12 * scale);
            }
        }
    }
}
