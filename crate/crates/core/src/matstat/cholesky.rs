use nalgebra::DMatrix;

use crate::error::{EasError, Result};

/// Dense column-major matrix used throughout the crate.
pub type DenseMatrix = DMatrix<f64>;

/// Relative symmetry tolerance accepted by [`cholesky`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Cholesky factor `L` of a symmetric positive-definite matrix `S = L Lᵀ`,
/// together with the cached log-determinant of `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdFactor {
    lower: DenseMatrix,
    log_det: f64,
}

/// Factor a symmetric positive-definite matrix. Fails when any pivot is `<= 0`.
pub fn cholesky(s: &DenseMatrix) -> Result<SpdFactor> {
    cholesky_with_min_pivot(s, 0.0)
}

/// Factor `s`, treating any squared pivot `<= min_pivot` as a rank failure.
pub fn cholesky_with_min_pivot(s: &DenseMatrix, min_pivot: f64) -> Result<SpdFactor> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(EasError::DimensionMismatch(format!(
            "cholesky needs a square matrix, got {}x{}",
            n,
            s.ncols()
        )));
    }
    check_symmetric(s)?;

    // Build U = Lᵀ so that rows of L are contiguous columns.
    let mut u = DenseMatrix::zeros(n, n);
    let data = u.as_mut_slice();
    for j in 0..n {
        let col_j = &mut data[j * n..(j + 1) * n];
        let d = s[(j, j)] - dot(&col_j[..j], &col_j[..j]);
        if !(d > min_pivot) || !d.is_finite() {
            return Err(EasError::NotPositiveDefinite { index: j, pivot: d });
        }
        let djj = d.sqrt();
        col_j[j] = djj;
        for i in (j + 1)..n {
            let (left, right) = data.split_at_mut(i * n);
            let cj = &left[j * n..j * n + j];
            let ci = &mut right[..n];
            ci[j] = (s[(i, j)] - dot(&ci[..j], cj)) / djj;
        }
    }
    let l = u.transpose();
    Ok(SpdFactor::from_lower_unchecked(l))
}

/// Dot product of two equal-length slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for t in 0..4 {
            acc[t] += x[t] * y[t];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn check_symmetric(s: &DenseMatrix) -> Result<()> {
    let scale = s.amax();
    let tol = SYMMETRY_TOL * scale;
    for j in 0..s.ncols() {
        for i in (j + 1)..s.nrows() {
            if (s[(i, j)] - s[(j, i)]).abs() > tol {
                return Err(EasError::Domain(format!(
                    "matrix is not symmetric at ({i}, {j}): {} vs {}",
                    s[(i, j)],
                    s[(j, i)]
                )));
            }
        }
    }
    Ok(())
}

impl SpdFactor {
    pub(crate) fn from_lower_unchecked(lower: DenseMatrix) -> Self {
        let log_det = 2.0 * lower.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        SpdFactor { lower, log_det }
    }

    pub fn identity(dim: usize) -> Self {
        SpdFactor {
            lower: DenseMatrix::identity(dim, dim),
            log_det: 0.0,
        }
    }

    /// Factor of `diag(values)`; every value must be strictly positive.
    pub fn from_diagonal(values: &[f64]) -> Result<Self> {
        if let Some((index, &pivot)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(EasError::NotPositiveDefinite { index, pivot });
        }
        let lower = DenseMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            values.len(),
            values.iter().map(|v| v.sqrt()),
        ));
        Ok(Self::from_lower_unchecked(lower))
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn lower(&self) -> &DenseMatrix {
        &self.lower
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `L Lᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        &self.lower * self.lower.transpose()
    }

    /// Overwrite `b` with `L⁻¹ b`.
    pub fn solve_lower_mut(&self, b: &mut DenseMatrix) {
        let ok = self.lower.solve_lower_triangular_mut(b);
        debug_assert!(ok);
    }

    /// Overwrite `b` with `L⁻ᵀ b`.
    pub fn solve_upper_mut(&self, b: &mut DenseMatrix) {
        let ok = self.lower.tr_solve_lower_triangular_mut(b);
        debug_assert!(ok);
    }

    /// `S⁻¹ b`.
    pub fn solve(&self, b: &DenseMatrix) -> DenseMatrix {
        let mut x = b.clone();
        self.solve_lower_mut(&mut x);
        self.solve_upper_mut(&mut x);
        x
    }

    pub fn inverse(&self) -> DenseMatrix {
        self.solve(&DenseMatrix::identity(self.dim(), self.dim()))
    }

    /// `tr(S⁻¹ A)` for symmetric `A`, evaluated as `tr(L⁻¹ A L⁻ᵀ)`.
    pub fn trace_inv_times(&self, a: &DenseMatrix) -> f64 {
        let mut w = a.clone();
        self.solve_lower_mut(&mut w);
        let mut w = w.transpose();
        self.solve_lower_mut(&mut w);
        w.trace()
    }

    /// `‖L⁻¹ b‖²_F`, the `S⁻¹`-weighted squared Frobenius norm of `b`.
    pub fn whitened_norm_sq(&self, b: &DenseMatrix) -> f64 {
        let mut w = b.clone();
        self.solve_lower_mut(&mut w);
        w.norm_squared()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_factor() {
        let f = cholesky(&DenseMatrix::identity(3, 3)).unwrap();
        assert_eq!(f.lower(), &DenseMatrix::identity(3, 3));
        assert_eq!(f.log_det(), 0.0);
    }

    #[test]
    fn diagonal_factor() {
        let s = DenseMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]);
        let f = cholesky(&s).unwrap();
        assert_eq!(f.lower(), &DenseMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]));
        assert!((f.log_det() - 36f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn random_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = DenseMatrix::from_fn(5, 5, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let s = &a * a.transpose() + DenseMatrix::identity(5, 5) * 5.0;
        let f = cholesky(&s).unwrap();
        let err = (f.reconstruct() - &s).amax();
        assert!(err < 1e-8 * (1.0 + s.amax()), "err {err}");
        let det = s.clone().determinant();
        assert!((f.log_det() - det.ln()).abs() < 1e-10);
    }

    #[test]
    fn indefinite_is_rejected() {
        let s = DenseMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            cholesky(&s),
            Err(EasError::NotPositiveDefinite { index: 1, .. })
        ));
        let zero = DenseMatrix::zeros(2, 2);
        assert!(cholesky(&zero).is_err());
    }

    #[test]
    fn asymmetric_is_rejected() {
        let s = DenseMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.0, 2.0]);
        assert!(matches!(cholesky(&s), Err(EasError::Domain(_))));
    }

    #[test]
    fn solves_and_traces() {
        let s = DenseMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let f = cholesky(&s).unwrap();
        let b = DenseMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let x = f.solve(&b);
        assert!((&s * &x - &b).amax() < 1e-12);

        let a = DenseMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.0, 0.1, 0.0, 5.0]);
        let direct = (s.clone().try_inverse().unwrap() * &a).trace();
        assert!((f.trace_inv_times(&a) - direct).abs() < 1e-12);

        let direct_norm = (b.transpose() * s.try_inverse().unwrap() * &b).trace();
        assert!((f.whitened_norm_sq(&b) - direct_norm).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn reconstruction_bound(seed in 0u64..1000, dim in 1usize..8, shift in 0.01f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = DenseMatrix::from_fn(dim, dim, |_, _| rng.random::<f64>() * 4.0 - 2.0);
            let s = &a * a.transpose() + DenseMatrix::identity(dim, dim) * shift;
            let s = (&s + s.transpose()) * 0.5;
            let f = cholesky(&s).unwrap();
            let err = (f.reconstruct() - &s).amax();
            proptest::prop_assert!(err < 1e-8 * (1.0 + s.amax()));
            let diag_ok = f.lower().diagonal().iter().all(|d| *d > 0.0);
            proptest::prop_assert!(diag_ok);
        }
    }
}
