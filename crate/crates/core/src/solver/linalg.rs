use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;

/// `S^H S`, filled from the upper triangle.
pub(crate) fn gram(s: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let p = s.ncols();
    let mut g = DMatrix::zeros(p, p);
    for j in 0..p {
        let cj = s.column(j);
        for i in 0..=j {
            let v = s.column(i).dotc(&cj);
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
        g[(j, j)] = Complex64::new(g[(j, j)].re, 0.0);
    }
    g
}

/// `S^H x`.
pub(crate) fn correlate(s: &DMatrix<Complex64>, x: &[Complex64]) -> DVector<Complex64> {
    let xv = DVector::from_column_slice(x);
    DVector::from_iterator(s.ncols(), (0..s.ncols()).map(|j| s.column(j).dotc(&xv)))
}

/// `S w`.
pub(crate) fn synthesize(s: &DMatrix<Complex64>, w: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); s.nrows()];
    for (j, wj) in w.iter().enumerate() {
        if *wj == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (o, v) in out.iter_mut().zip(s.column(j).iter()) {
            *o += wj * v;
        }
    }
    out
}

/// Principal sub-matrix on `idx`.
pub(crate) fn submatrix(g: &DMatrix<Complex64>, idx: &[usize]) -> DMatrix<Complex64> {
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| g[(idx[a], idx[b])])
}

/// Inverse square roots of the diagonal, `None` if any diagonal entry is
/// not strictly positive.
fn jacobi_scale(a: &DMatrix<Complex64>) -> Option<Vec<f64>> {
    (0..a.nrows())
        .map(|i| {
            let d = a[(i, i)].re;
            (d > 0.0 && d.is_finite()).then(|| 1.0 / d.sqrt())
        })
        .collect()
}

fn scaled(a: &DMatrix<Complex64>, d: &[f64]) -> DMatrix<Complex64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * (d[i] * d[j]))
}

/// Solves the Hermitian positive definite system `a w = b` by Cholesky on
/// the Jacobi-equilibrated matrix. `None` if the factorization fails.
pub(crate) fn solve_hpd(a: &DMatrix<Complex64>, b: &DVector<Complex64>) -> Option<DVector<Complex64>> {
    let n = a.nrows();
    if n == 0 {
        return Some(DVector::zeros(0));
    }
    let d = jacobi_scale(a)?;
    let chol = Cholesky::new(scaled(a, &d))?;
    let rhs = DVector::from_iterator(n, (0..n).map(|i| b[i] * d[i]));
    let y = chol.solve(&rhs);
    let w = DVector::from_iterator(n, (0..n).map(|i| y[i] * d[i]));
    w.iter().all(|z| z.is_finite()).then_some(w)
}

/// 2-norm condition number of the Jacobi-equilibrated Hermitian matrix;
/// infinite when it is not positive definite.
pub(crate) fn condition_estimate(a: &DMatrix<Complex64>) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    let Some(d) = jacobi_scale(a) else {
        return f64::INFINITY;
    };
    let eig = scaled(a, &d).symmetric_eigenvalues();
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}
