use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::cholesky::{DenseMatrix, SpdFactor};
use crate::error::{EasError, Result};

/// A reproducible random stream identified by `(seed, stream)`.
///
/// Child streams are derived by hashing, so a replication, fold or grid cell
/// can be replayed on its own without running the siblings before it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed, stream: 0 }
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    /// Derive an independent sub-stream tagged by `id`.
    pub fn child(&self, id: u64) -> Self {
        RngStream {
            seed: self.seed,
            stream: splitmix64(self.stream ^ splitmix64(id.wrapping_add(0x5851_f42d_4c95_7f2d))),
        }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

pub fn standard_normal_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Draw `mean + L_U Z L_Vᵀ`, i.e. Matrix-Normal(mean, U, V) with row covariance
/// `U` and column covariance `V` given by their factors.
pub fn sample_matrix_normal<R: Rng + ?Sized>(
    rng: &mut R,
    mean: &DenseMatrix,
    row_cov: &SpdFactor,
    col_cov: &SpdFactor,
) -> Result<DenseMatrix> {
    let (m, r) = mean.shape();
    if row_cov.dim() != m || col_cov.dim() != r {
        return Err(EasError::DimensionMismatch(format!(
            "matrix normal mean is {m}x{r}, covariances are {}x{} and {}x{}",
            row_cov.dim(),
            row_cov.dim(),
            col_cov.dim(),
            col_cov.dim()
        )));
    }
    let z = standard_normal_matrix(rng, m, r);
    Ok(mean + row_cov.lower() * z * col_cov.lower().transpose())
}

/// Lower-triangular Bartlett factor `A` with `A Aᵀ ~ Wishart_q(dof, I)`.
fn bartlett_factor<R: Rng + ?Sized>(rng: &mut R, dof: usize, q: usize) -> Result<DenseMatrix> {
    let mut a = DenseMatrix::zeros(q, q);
    for i in 0..q {
        let chi = ChiSquared::new((dof - i) as f64)
            .map_err(|e| EasError::Domain(format!("chi-square: {e}")))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = StandardNormal.sample(rng);
        }
    }
    Ok(a)
}

/// Draw from `Wishart_q(dof, scale)` by the Bartlett decomposition.
pub fn sample_wishart<R: Rng + ?Sized>(rng: &mut R, dof: usize, scale: &SpdFactor) -> Result<DenseMatrix> {
    let q = scale.dim();
    if dof < q {
        return Err(EasError::Domain(format!("wishart needs dof >= q, got dof={dof}, q={q}")));
    }
    let la = scale.lower() * bartlett_factor(rng, dof, q)?;
    let w = &la * la.transpose();
    Ok((&w + w.transpose()) * 0.5)
}

/// Draw from the matrix-t law `T_{q,m}(dof, location, row_scale, col_precision⁻¹)`.
///
/// Uses `location + L_Σ (L_W⁻ᵀ Z) L_Ω⁻¹` with `W ~ Wishart_q(dof + q - 1, I)`,
/// `Z` standard normal, `row_scale = L_Σ L_Σᵀ` and `col_precision = L_Ω L_Ωᵀ`.
pub fn sample_matrix_t<R: Rng + ?Sized>(
    rng: &mut R,
    dof: f64,
    location: &DenseMatrix,
    row_scale: &SpdFactor,
    col_precision: &SpdFactor,
) -> Result<DenseMatrix> {
    let (q, m) = location.shape();
    if row_scale.dim() != q || col_precision.dim() != m {
        return Err(EasError::DimensionMismatch(format!(
            "matrix-t location is {q}x{m}, scales are {} and {}",
            row_scale.dim(),
            col_precision.dim()
        )));
    }
    if !(dof > 0.0) || dof.fract() != 0.0 {
        return Err(EasError::DegreesOfFreedom(dof as i64));
    }
    let wishart_dof = dof as usize + q - 1;
    let lw = bartlett_factor(rng, wishart_dof, q)?;
    let mut t = standard_normal_matrix(rng, q, m);
    // L_W⁻ᵀ Z
    let ok = lw.tr_solve_lower_triangular_mut(&mut t);
    debug_assert!(ok);
    // (L_Σ T) L_Ω⁻¹ = ((L_Ω⁻ᵀ (L_Σ T)ᵀ))ᵀ
    let mut right = (row_scale.lower() * t).transpose();
    col_precision.solve_upper_mut(&mut right);
    Ok(location + right.transpose())
}
