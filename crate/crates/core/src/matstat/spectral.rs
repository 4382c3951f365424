use nalgebra::{DVector, SymmetricEigen};

use super::cholesky::DenseMatrix;

/// Largest eigenvalue of `X Xᵀ` by power iteration on `v ↦ X (Xᵀ v)`.
///
/// Stops when the Rayleigh quotient changes by less than `rel_tol` relative.
pub fn largest_gram_eigenvalue(x: &DenseMatrix, rel_tol: f64, max_iter: usize) -> f64 {
    let p = x.nrows();
    if p == 0 || x.ncols() == 0 {
        return 0.0;
    }
    // deterministic start with no special alignment
    let mut v = DVector::from_fn(p, |i, _| 1.0 + (i as f64 * 0.618_033_988_75).fract());
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = x * (x.tr_mul(&v));
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (next - lambda).abs() <= rel_tol * next.abs() {
            return next.max(norm);
        }
        lambda = next;
    }
    lambda
}

/// Smallest eigenvalue of a small symmetric matrix.
pub fn smallest_eigenvalue(s: &DenseMatrix) -> f64 {
    SymmetricEigen::new(s.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}
