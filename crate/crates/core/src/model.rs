//! Datasets, candidate models and the closed-form log fiducial mass.
//!
//! Matrices follow the column-observation convention: `Y` is `q × n`,
//! `X` is `p × n`. Predictor indices are zero-based inside the library.

use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{EasError, Result};
use crate::matstat::{
    cholesky_with_min_pivot, largest_gram_eigenvalue, log_multivariate_gamma, sample_matrix_t,
    DenseMatrix, SpdFactor,
};

/// Relative pivot floor for the Gram factor of `X_M`.
pub const RANK_TOL: f64 = 1e-10;
/// Relative pivot floor for the residual cross-product `Σ̂_M`, scaled by `tr(YYᵀ)/q`.
pub const RESIDUAL_TOL: f64 = 1e-12;

/// Responses and predictors with cached cross-products.
#[derive(Debug)]
pub struct Dataset {
    y: DenseMatrix,
    x: DenseMatrix,
    gram: DenseMatrix,
    xy: DenseMatrix,
    yy: DenseMatrix,
    lambda_max: OnceLock<f64>,
}

impl Clone for Dataset {
    fn clone(&self) -> Self {
        Dataset {
            y: self.y.clone(),
            x: self.x.clone(),
            gram: self.gram.clone(),
            xy: self.xy.clone(),
            yy: self.yy.clone(),
            lambda_max: self.lambda_max.clone(),
        }
    }
}

impl Dataset {
    /// Build from `y` (`q × n`) and `x` (`p × n`).
    pub fn new(y: DenseMatrix, x: DenseMatrix) -> Result<Self> {
        if y.ncols() != x.ncols() {
            return Err(EasError::DimensionMismatch(format!(
                "Y has {} observations, X has {}",
                y.ncols(),
                x.ncols()
            )));
        }
        if y.ncols() == 0 || y.nrows() == 0 || x.nrows() == 0 {
            return Err(EasError::DimensionMismatch(
                "dataset needs n, p, q >= 1".into(),
            ));
        }
        if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(EasError::Domain("dataset contains non-finite entries".into()));
        }
        let gram = &x * x.transpose();
        let xy = &x * y.transpose();
        let yy = &y * y.transpose();
        Ok(Dataset {
            y,
            x,
            gram,
            xy,
            yy,
            lambda_max: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.y.ncols()
    }

    pub fn p(&self) -> usize {
        self.x.nrows()
    }

    pub fn q(&self) -> usize {
        self.y.nrows()
    }

    pub fn y(&self) -> &DenseMatrix {
        &self.y
    }

    pub fn x(&self) -> &DenseMatrix {
        &self.x
    }

    /// `X Xᵀ` (`p × p`).
    pub fn gram(&self) -> &DenseMatrix {
        &self.gram
    }

    /// `X Yᵀ` (`p × q`).
    pub fn xy(&self) -> &DenseMatrix {
        &self.xy
    }

    /// `Y Yᵀ` (`q × q`).
    pub fn yy(&self) -> &DenseMatrix {
        &self.yy
    }

    /// `λ_max(X Xᵀ)`, computed once by power iteration.
    pub fn gram_lambda_max(&self) -> f64 {
        *self
            .lambda_max
            .get_or_init(|| largest_gram_eigenvalue(&self.x, 1e-8, 100_000))
    }

    /// Rows of `X` listed in `idx`, in order.
    pub fn x_rows(&self, idx: &[usize]) -> DenseMatrix {
        self.x.select_rows(idx)
    }

    /// Subtract the row means of `Y` and `X` (an intercept surrogate).
    pub fn centered(&self) -> Result<Dataset> {
        let center = |m: &DenseMatrix| {
            let mut out = m.clone();
            for mut row in out.row_iter_mut() {
                let mean = row.mean();
                row.add_scalar_mut(-mean);
            }
            out
        };
        Dataset::new(center(&self.y), center(&self.x))
    }

    /// Dataset restricted to the listed observation columns.
    pub fn select_observations(&self, cols: &[usize]) -> Result<Dataset> {
        Dataset::new(self.y.select_columns(cols), self.x.select_columns(cols))
    }

    /// Per-predictor score `‖Y X_jᵀ‖₂`, the proposal weight default.
    pub fn correlation_scores(&self) -> Vec<f64> {
        self.xy.row_iter().map(|r| r.norm()).collect()
    }
}

/// A candidate model: strictly increasing zero-based predictor indices.
///
/// Serialized as a list of one-based indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ModelIndexSet(Vec<usize>);

impl Serialize for ModelIndexSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.one_based().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModelIndexSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<usize>::deserialize(d)?;
        ModelIndexSet::from_one_based(&raw).map_err(serde::de::Error::custom)
    }
}

impl ModelIndexSet {
    /// Canonicalize `indices` by sorting; duplicates are rejected.
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(EasError::InvalidModel(format!(
                "duplicate predictor index in {indices:?}"
            )));
        }
        Ok(ModelIndexSet(indices))
    }

    /// Build from one-based indices as written in user-facing files.
    pub fn from_one_based(indices: &[usize]) -> Result<Self> {
        if indices.contains(&0) {
            return Err(EasError::InvalidModel("one-based index 0".into()));
        }
        Self::new(indices.iter().map(|i| i - 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|i| i + 1).collect()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    pub fn with_added(&self, j: usize) -> Self {
        let mut v = self.0.clone();
        if let Err(pos) = v.binary_search(&j) {
            v.insert(pos, j);
        }
        ModelIndexSet(v)
    }

    pub fn with_removed(&self, j: usize) -> Self {
        ModelIndexSet(self.0.iter().copied().filter(|&i| i != j).collect())
    }

    /// Validate against a predictor count.
    pub fn check(&self, p: usize) -> Result<()> {
        match self.0.last() {
            Some(&last) if last >= p => Err(EasError::InvalidModel(format!(
                "index {} out of range for p = {p}",
                last + 1
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ModelIndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}

/// Least-squares artifacts of one candidate model.
#[derive(Debug, Clone)]
pub struct FittedModel {
    model: ModelIndexSet,
    coef: Option<DenseMatrix>,
    sigma: Option<DenseMatrix>,
    sigma_factor: Option<SpdFactor>,
    gram_factor: Option<SpdFactor>,
    full_rank: bool,
}

impl FittedModel {
    pub fn model(&self) -> &ModelIndexSet {
        &self.model
    }

    /// `B̂_M` (`q × |M|`), absent when `X_M` is rank deficient.
    pub fn coef(&self) -> Option<&DenseMatrix> {
        self.coef.as_ref()
    }

    /// `Σ̂_M = Y (I - H_M) Yᵀ`.
    pub fn sigma(&self) -> Option<&DenseMatrix> {
        self.sigma.as_ref()
    }

    /// Cholesky factor of `Σ̂_M`, absent when it is not positive definite.
    pub fn sigma_factor(&self) -> Option<&SpdFactor> {
        self.sigma_factor.as_ref()
    }

    /// Cholesky factor of `X_M X_Mᵀ`.
    pub fn gram_factor(&self) -> Option<&SpdFactor> {
        self.gram_factor.as_ref()
    }

    pub fn full_rank(&self) -> bool {
        self.full_rank
    }

    /// `log det Σ̂_M`; `-∞` when `Σ̂_M` is singular or the model is rank deficient.
    pub fn log_det_sigma(&self) -> f64 {
        self.sigma_factor
            .as_ref()
            .map_or(f64::NEG_INFINITY, SpdFactor::log_det)
    }

    /// Whether every quantity needed downstream is available.
    pub fn is_usable(&self) -> bool {
        self.full_rank && self.sigma_factor.is_some()
    }
}

/// Fit model `M` by least squares using the cached cross-products of `data`.
///
/// `Σ̂_M` is obtained as `YYᵀ - B̂ (X_M Yᵀ)`; the `n × n` hat matrix is never formed.
/// Rank deficiency of `X_M` is reported through [`FittedModel::full_rank`].
pub fn fit_model(data: &Dataset, model: &ModelIndexSet) -> Result<FittedModel> {
    if model.is_empty() {
        return Err(EasError::InvalidModel("empty model".into()));
    }
    model.check(data.p())?;
    let idx = model.indices();
    let gram_m = data.gram().select_rows(idx).select_columns(idx);
    let min_pivot = RANK_TOL * gram_m.trace() / idx.len() as f64;
    let gram_factor = match cholesky_with_min_pivot(&gram_m, min_pivot) {
        Ok(f) => f,
        Err(_) => {
            return Ok(FittedModel {
                model: model.clone(),
                coef: None,
                sigma: None,
                sigma_factor: None,
                gram_factor: None,
                full_rank: false,
            })
        }
    };
    // X_M Yᵀ is |M| × q
    let xmy = data.xy().select_rows(idx);
    let coef_t = gram_factor.solve(&xmy);
    let coef = coef_t.transpose();
    let mut sigma = data.yy() - &coef * &xmy;
    sigma = (&sigma + sigma.transpose()) * 0.5;
    let q = data.q();
    let floor = RESIDUAL_TOL * data.yy().trace() / q as f64;
    let sigma_factor = cholesky_with_min_pivot(&sigma, floor).ok();
    Ok(FittedModel {
        model: model.clone(),
        coef: Some(coef),
        sigma: Some(sigma),
        sigma_factor,
        gram_factor: Some(gram_factor),
        full_rank: true,
    })
}

/// Log unnormalized fiducial mass of a model and its admissibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GfWeight {
    pub log_mass: f64,
    pub admissible: bool,
    pub epsilon: f64,
}

impl GfWeight {
    pub fn inadmissible(epsilon: f64) -> Self {
        GfWeight {
            log_mass: f64::NEG_INFINITY,
            admissible: false,
            epsilon,
        }
    }
}

/// `log r̂_ε(M|Y) = log Γ_q((n-|M|)/2) + (q|M|/2) log π - ((n-|M|-q)/2) log det Σ̂_M + log h`.
///
/// Mass is `-∞` when `h = 0`, when `|M| >= n - q`, or when the fit is unusable.
pub fn log_gf_mass(fitted: &FittedModel, h: bool, n: usize, q: usize, epsilon: f64) -> GfWeight {
    log_gf_mass_expected(fitted, if h { 1.0 } else { 0.0 }, n, q, epsilon)
}

/// As [`log_gf_mass`] with `h` replaced by an estimate of `E[h_ε(B_M)]` in `[0, 1]`.
pub fn log_gf_mass_expected(fitted: &FittedModel, expected_h: f64, n: usize, q: usize, epsilon: f64) -> GfWeight {
    let m = fitted.model().len();
    if !(expected_h > 0.0) || m == 0 || m + q >= n || !fitted.is_usable() {
        return GfWeight::inadmissible(epsilon);
    }
    let dof = (n - m) as f64;
    let lgamma = match log_multivariate_gamma(q, dof / 2.0) {
        Ok(v) => v,
        Err(_) => return GfWeight::inadmissible(epsilon),
    };
    let log_mass = lgamma + (q * m) as f64 / 2.0 * PI.ln()
        - (dof - q as f64) / 2.0 * fitted.log_det_sigma()
        + expected_h.min(1.0).ln();
    GfWeight {
        log_mass,
        admissible: true,
        epsilon,
    }
}

/// Normalize log masses by log-sum-exp.
pub fn normalize_log_masses(log_masses: &[f64]) -> Result<Vec<f64>> {
    let max = log_masses
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(EasError::AllInadmissible);
    }
    let weights: Vec<f64> = log_masses.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

pub fn normalize_masses(weights: &[GfWeight]) -> Result<Vec<f64>> {
    let logs: Vec<f64> = weights.iter().map(|w| w.log_mass).collect();
    normalize_log_masses(&logs)
}

/// Draw `B_M` from its fiducial matrix-t law centred at `B̂_M`,
/// with `n - |M| - q + 1` degrees of freedom.
pub fn sample_coefficients<R: rand::Rng + ?Sized>(
    rng: &mut R,
    fitted: &FittedModel,
    n: usize,
) -> Result<DenseMatrix> {
    let (coef, sigma_f, gram_f) = match (fitted.coef(), fitted.sigma_factor(), fitted.gram_factor()) {
        (Some(c), Some(s), Some(g)) => (c, s, g),
        _ => return Err(EasError::InvalidModel("model fit is not usable".into())),
    };
    let q = coef.nrows();
    let dof = n as i64 - fitted.model().len() as i64 - q as i64 + 1;
    if dof <= 0 {
        return Err(EasError::DegreesOfFreedom(dof));
    }
    sample_matrix_t(rng, dof as f64, coef, sigma_f, gram_f)
}
