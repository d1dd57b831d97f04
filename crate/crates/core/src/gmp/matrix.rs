use nalgebra::DMatrix;
use num_complex::Complex64;

use super::structure::{GmpStructure, KernelDescriptor};
use crate::error::{Error, Result};
use crate::signal::IqSignal;

/// How samples outside `[0, N)` are treated when a kernel reaches past
/// either end of the signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryMode {
    /// `s(i) = 0` outside the signal; every sample yields a row.
    #[default]
    ZeroPad,
    /// Drop the rows whose kernels would read outside the signal.
    DiscardWarmup,
}

/// Regression matrix `S` of a GMP structure evaluated on a source signal.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    data: DMatrix<Complex64>,
    columns: Vec<KernelDescriptor>,
    structure: GmpStructure,
    source_length: usize,
    first_row: usize,
}

impl KernelMatrix {
    pub fn data(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn columns(&self) -> &[KernelDescriptor] {
        &self.columns
    }

    pub fn structure(&self) -> &GmpStructure {
        &self.structure
    }

    pub fn source_length(&self) -> usize {
        self.source_length
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    /// Index of the source sample that row 0 corresponds to.
    pub fn first_row(&self) -> usize {
        self.first_row
    }

    /// The samples of `target` that line up with the matrix rows.
    pub fn target_rows<'a>(&self, target: &'a IqSignal) -> Result<&'a [Complex64]> {
        if target.len() != self.source_length {
            return Err(Error::Dimension {
                expected: self.source_length,
                got: target.len(),
            });
        }
        Ok(&target.samples()[self.first_row..self.first_row + self.nrows()])
    }

    /// Column indices whose envelope power is `k`.
    pub fn block_indices(&self, k: u32) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, d)| d.k == k)
            .map(|(j, _)| j)
            .collect()
    }
}

/// `|s(i)|^k` for every sample, `k` even.
pub(crate) fn envelope_power(samples: &[Complex64], k: u32) -> Vec<f64> {
    let half = (k / 2) as i32;
    samples.iter().map(|z| z.norm_sqr().powi(half)).collect()
}

/// Writes the kernel time series of `d` over rows `first..first + out.len()`.
pub(crate) fn fill_kernel(
    samples: &[Complex64],
    envelope: &[f64],
    d: &KernelDescriptor,
    first: usize,
    out: &mut [Complex64],
) {
    let n_src = samples.len() as isize;
    let lag = d.l as isize;
    let env_delay = d.envelope_delay();
    // padding samples are zero, and |0|^0 = 1
    let pad = if d.k == 0 { 1.0 } else { 0.0 };
    let envelope_at = |e: isize| {
        if (0..n_src).contains(&e) {
            envelope[e as usize]
        } else {
            pad
        }
    };
    for (row, slot) in out.iter_mut().enumerate() {
        let n = (first + row) as isize;
        let i = n - lag;
        let e = n - env_delay;
        *slot = if (0..n_src).contains(&i) {
            samples[i as usize] * envelope_at(e)
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
}

pub fn build_kernel_matrix(signal: &IqSignal, structure: &GmpStructure) -> Result<KernelMatrix> {
    build_kernel_matrix_with(signal, structure, BoundaryMode::ZeroPad)
}

pub fn build_kernel_matrix_with(
    signal: &IqSignal,
    structure: &GmpStructure,
    boundary: BoundaryMode,
) -> Result<KernelMatrix> {
    structure.validate()?;
    let samples = signal.samples();
    let n = samples.len();
    let (first, rows) = match boundary {
        BoundaryMode::ZeroPad => (0, n),
        BoundaryMode::DiscardWarmup => {
            let head = structure.max_depth();
            let tail = structure.max_lookahead();
            if head + tail >= n {
                return Err(Error::Degenerate(format!(
                    "signal of {n} samples is shorter than the model span {}",
                    head + tail + 1
                )));
            }
            (head, n - head - tail)
        }
    };

    let columns = structure.descriptors();
    let mut envelopes: Vec<(u32, Vec<f64>)> = Vec::new();
    for k in structure.orders() {
        envelopes.push((k, envelope_power(samples, k)));
    }
    let mut data = DMatrix::<Complex64>::zeros(rows, columns.len());
    for (j, d) in columns.iter().enumerate() {
        let env = &envelopes
            .iter()
            .find(|(k, _)| *k == d.k)
            .expect("every order has an envelope")
            .1;
        // nalgebra storage is column-major
        fill_kernel(samples, env, d, first, data.column_mut(j).as_mut_slice());
    }

    Ok(KernelMatrix {
        data,
        columns,
        structure: structure.clone(),
        source_length: n,
        first_row: first,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmp::structure::full_structure;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn four() -> IqSignal {
        IqSignal::new(vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(2.0, 0.0)], 1.0).unwrap()
    }

    fn column_of(s: &IqSignal, st: &GmpStructure, d: KernelDescriptor) -> Vec<Complex64> {
        let m = build_kernel_matrix(s, st).unwrap();
        let j = m.columns().iter().position(|x| *x == d).unwrap();
        m.data().column(j).iter().copied().collect()
    }

    #[test]
    fn aligned_cubic_example() {
        let st = full_structure(1, 3, 1, false, 0).unwrap();
        let col = column_of(&four(), &st, KernelDescriptor::aligned(2, 1));
        assert_eq!(col, vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0)]);
    }

    #[test]
    fn lagging_cubic_example() {
        let st = full_structure(1, 3, 1, false, 0).unwrap();
        let col = column_of(&four(), &st, KernelDescriptor::lagging(2, 0, 1));
        assert_eq!(col, vec![c(0.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(2.0, 0.0)]);
    }

    #[test]
    fn zero_signal_gives_zero_matrix() {
        let s = IqSignal::new(vec![c(0.0, 0.0); 10], 1.0).unwrap();
        let m = build_kernel_matrix(&s, &full_structure(3, 5, 2, true, 1).unwrap()).unwrap();
        assert!(m.data().iter().all(|z| *z == c(0.0, 0.0)));
    }

    #[test]
    fn linear_column_is_delayed_signal() {
        let s = four();
        let st = full_structure(3, 3, 1, false, 0).unwrap();
        for l in 0..=3 {
            let col = column_of(&s, &st, KernelDescriptor::aligned(0, l));
            for (n, z) in col.iter().enumerate() {
                let want = if n >= l { s.samples()[n - l] } else { c(0.0, 0.0) };
                assert_eq!(*z, want);
            }
        }
    }

    #[test]
    fn discard_warmup_trims_rows() {
        let s = IqSignal::new((0..12).map(|i| c(i as f64, 1.0)).collect(), 1.0).unwrap();
        let st = full_structure(2, 3, 1, true, 1).unwrap();
        let full = build_kernel_matrix(&s, &st).unwrap();
        let trimmed = build_kernel_matrix_with(&s, &st, BoundaryMode::DiscardWarmup).unwrap();
        assert_eq!(trimmed.first_row(), 3);
        assert_eq!(trimmed.nrows(), 12 - 3 - 1);
        assert_eq!(
            trimmed.data(),
            &full.data().rows(3, trimmed.nrows()).into_owned()
        );
        assert_eq!(trimmed.target_rows(&s).unwrap(), &s.samples()[3..11]);
    }

    #[test]
    fn blocks_group_by_order() {
        let st = full_structure(1, 5, 1, false, 0).unwrap();
        let m = build_kernel_matrix(&four(), &st).unwrap();
        assert_eq!(m.block_indices(0), vec![0, 1]);
        assert_eq!(m.block_indices(2), vec![2, 3, 6, 7]);
        assert_eq!(m.block_indices(4), vec![4, 5, 8, 9]);
    }
}
