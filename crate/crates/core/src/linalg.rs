//! Small dense helpers over generic scalars.

use nalgebra::DMatrix;

use crate::scalar::Real;

/// Lower Cholesky factor of a symmetric matrix, or `None` when a pivot is
/// not strictly positive.
pub fn cholesky<T: Real>(a: &DMatrix<T>) -> Option<DMatrix<T>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "cholesky needs a square matrix");
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d = d - l[(j, k)] * l[(j, k)];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

/// `x^T A y` for a dense `A`.
pub fn bilinear(a: &DMatrix<f64>, x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    debug_assert_eq!(a.nrows(), n);
    debug_assert_eq!(a.ncols(), y.len());
    let mut total = 0.0;
    for j in 0..y.len() {
        let col = a.column(j);
        let mut s = 0.0;
        for i in 0..n {
            s += col[i] * x[i];
        }
        total += s * y[j];
    }
    total
}

/// `A x` for a dense `A`, column-major friendly.
pub fn mat_vec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        for (o, &aij) in out.iter_mut().zip(a.column(j).iter()) {
            *o += aij * xj;
        }
    }
    out
}
