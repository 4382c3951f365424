//! The ε-admissibility indicator `h_ε(B_M)`.
//!
//! A model is ε-admissible when no coefficient matrix supported on `|M| - 1`
//! predictors reproduces its fitted mean `B_M X_M` to within ε in the
//! `Σ̂_M`-whitened squared Frobenius norm:
//!
//! ```text
//! g(B) = ½ ‖ L_Σ⁻¹ (B_M X_M - B X) ‖²_F,   h = I(min g ≥ ε) · I(|M| < n - q)
//! ```
//!
//! Two evaluators are provided. [`h_pgd`] runs projected gradient descent with
//! hard thresholding onto `|M| - 1` columns and is valid for any `p`; it can
//! only prove inadmissibility. [`h_exhaustive`] enumerates every support and is
//! exact for small `p`.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{EasError, Result};
use crate::matstat::{dot, smallest_eigenvalue, DenseMatrix, SpdFactor};
use crate::model::{Dataset, FittedModel, RANK_TOL};

/// Default predictor count above which [`h_exhaustive`] refuses to run.
pub const EXHAUSTIVE_CAP: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HConfig {
    pub epsilon: f64,
    /// Stop once `|g_prev - g| <= rel_tol · g_prev`.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Return as soon as an iterate certifies `g < ε`. When false the descent
    /// runs to convergence so the final objective is reported.
    pub early_stop: bool,
    /// Replace the iterate by the exact least-squares fit on its support once
    /// the support has been stable for `polish_after` iterations.
    pub polish: bool,
    pub polish_after: usize,
}

impl HConfig {
    pub fn new(epsilon: f64) -> Self {
        HConfig {
            epsilon,
            rel_tol: 1e-7,
            max_iter: 5000,
            early_stop: true,
            polish: true,
            polish_after: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(EasError::Config(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if !(self.rel_tol > 0.0) {
            return Err(EasError::Config("convergence threshold must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HMethod {
    /// Decided without optimization: size bound, rank failure, or `|M| = 1`.
    Direct,
    Pgd,
    ExhaustiveOracle,
}

/// A sparse coefficient matrix `B` with `B_j = 0` outside `support`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCoef {
    pub support: Vec<usize>,
    /// `q × |support|`.
    pub coef: DenseMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HResult {
    pub h: bool,
    /// Best objective found (exact minimum for the oracle).
    pub objective: f64,
    pub iterations: usize,
    pub method: HMethod,
    /// The minimizer or best iterate; absent for size-bound and rank decisions.
    pub certificate: Option<SparseCoef>,
    /// False when PGD stopped at the iteration cap with `g ≥ ε`.
    pub converged: bool,
}

impl HResult {
    fn direct(h: bool, objective: f64, certificate: Option<SparseCoef>) -> Self {
        HResult {
            h,
            objective,
            iterations: 0,
            method: HMethod::Direct,
            certificate,
            converged: true,
        }
    }
}

/// Pieces shared by both evaluators for one model and target coefficients.
struct Problem<'a> {
    data: &'a Dataset,
    sigma: &'a SpdFactor,
    model: &'a [usize],
    /// Target coefficients on `M` (`q × |M|`), normally `B̂_M`.
    target: &'a DenseMatrix,
    /// `target · X_M` (`q × n`).
    fitted_mean: DenseMatrix,
}

impl<'a> Problem<'a> {
    fn new(data: &'a Dataset, fitted: &'a FittedModel, target: &'a DenseMatrix) -> Option<Self> {
        let sigma = fitted.sigma_factor()?;
        let model = fitted.model().indices();
        let fitted_mean = target * data.x_rows(model);
        Some(Problem {
            data,
            sigma,
            model,
            target,
            fitted_mean,
        })
    }

    fn objective(&self, b: &SparseCoef) -> f64 {
        let mut resid = self.fitted_mean.clone();
        if !b.support.is_empty() {
            resid -= &b.coef * self.data.x_rows(&b.support);
        }
        0.5 * self.sigma.whitened_norm_sq(&resid)
    }

    /// `target · G[M, cols]`, i.e. `B_M X_M X_colsᵀ`.
    fn cross(&self, cols: &[usize]) -> DenseMatrix {
        self.target * self.data.gram().select_rows(self.model).select_columns(cols)
    }

    /// `target · G[M, :]` (`q × p`).
    fn cross_all(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.target.nrows(), self.data.p());
        add_gram_rows(&mut out, self.target, self.model, self.data.gram(), 1.0);
        out
    }

    /// Least-squares fit of the fitted mean on the rows `support` of `X`.
    fn project(&self, support: &[usize]) -> SparseCoef {
        let g = self.data.gram().select_rows(support).select_columns(support);
        let (kept, factor) = independent_cholesky(&g);
        let q = self.target.nrows();
        let mut coef = DenseMatrix::zeros(q, support.len());
        if let Some(factor) = factor {
            let kept_idx: Vec<usize> = kept.iter().map(|&k| support[k]).collect();
            let c = self.cross(&kept_idx);
            let b_kept = factor.solve(&c.transpose()).transpose();
            for (col, &k) in kept.iter().enumerate() {
                coef.set_column(k, &b_kept.column(col));
            }
        }
        SparseCoef {
            support: support.to_vec(),
            coef,
        }
    }
}

/// `out += alpha · coef · G[rows, :]`. `G` is symmetric, so row `j` is read
/// as the contiguous column `j` and accumulated into a transposed buffer.
fn add_gram_rows(out: &mut DenseMatrix, coef: &DenseMatrix, rows: &[usize], gram: &DenseMatrix, alpha: f64) {
    let (q, p) = out.shape();
    let mut acc = vec![0.0; p * q];
    for (k, &j) in rows.iter().enumerate() {
        let g = gram.column(j);
        let g = g.as_slice();
        for (c, dst) in acc.chunks_exact_mut(p).enumerate() {
            let a = alpha * coef[(c, k)];
            if a != 0.0 {
                dst.iter_mut().zip(g).for_each(|(d, v)| *d += a * v);
            }
        }
    }
    for (c, src) in acc.chunks_exact(p).enumerate() {
        for (col, v) in src.iter().enumerate() {
            out[(c, col)] += v;
        }
    }
}

/// Cholesky of `g` that skips columns linearly dependent on earlier ones.
/// Returns the kept positions and the factor of `g[kept, kept]`.
fn independent_cholesky(g: &DenseMatrix) -> (Vec<usize>, Option<SpdFactor>) {
    let k = g.nrows();
    let mut kept: Vec<usize> = Vec::with_capacity(k);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let gjj = g[(j, j)];
        if !(gjj > 0.0) {
            continue;
        }
        let r = kept.len();
        let gj = g.column(j);
        let mut l = vec![0.0; r + 1];
        for a in 0..r {
            let row = &rows[a];
            l[a] = (gj[kept[a]] - dot(&row[..a], &l[..a])) / row[a];
        }
        let d = gjj - l[..r].iter().map(|v| v * v).sum::<f64>();
        if d > RANK_TOL * gjj {
            l[r] = d.sqrt();
            rows.push(l);
            kept.push(j);
        }
    }
    if kept.is_empty() {
        return (kept, None);
    }
    let r = kept.len();
    let lower = DenseMatrix::from_fn(r, r, |i, j| if j <= i { rows[i][j] } else { 0.0 });
    let factor = Some(SpdFactor::from_lower_unchecked(lower));
    (kept, factor)
}

/// `B̂_M` with its minimum-norm column zeroed, embedded in `q × p`.
/// Ties go to the lowest index.
pub fn warm_start(data: &Dataset, fitted: &FittedModel) -> Result<DenseMatrix> {
    let coef = fitted
        .coef()
        .ok_or_else(|| EasError::InvalidModel("rank-deficient model has no coefficients".into()))?;
    let m = coef.ncols();
    if m < 2 {
        return Err(EasError::InvalidModel("warm start needs |M| >= 2".into()));
    }
    let drop = argmin_norm_column(coef);
    let mut out = DenseMatrix::zeros(coef.nrows(), data.p());
    for (k, &j) in fitted.model().indices().iter().enumerate() {
        if k != drop {
            out.set_column(j, &coef.column(k));
        }
    }
    Ok(out)
}

fn argmin_norm_column(coef: &DenseMatrix) -> usize {
    let mut best = 0;
    let mut best_norm = f64::INFINITY;
    for (k, col) in coef.column_iter().enumerate() {
        let nrm = col.norm();
        if nrm < best_norm {
            best = k;
            best_norm = nrm;
        }
    }
    best
}

/// Evaluate `g(B)` for an arbitrary sparse `B` against the model's `B̂_M`.
pub fn objective(data: &Dataset, fitted: &FittedModel, b: &SparseCoef) -> Result<f64> {
    let coef = fitted
        .coef()
        .ok_or_else(|| EasError::InvalidModel("model fit is not usable".into()))?;
    let problem = Problem::new(data, fitted, coef)
        .ok_or_else(|| EasError::InvalidModel("Σ̂ is singular".into()))?;
    Ok(problem.objective(b))
}

/// Checks shared by both evaluators. `Some` when `h` is decided without search.
fn trivial_verdict(data: &Dataset, fitted: &FittedModel, problem: Option<&Problem>, epsilon: f64) -> Option<HResult> {
    let m = fitted.model().len();
    if m == 0 || m + data.q() >= data.n() || !fitted.is_usable() {
        return Some(HResult::direct(false, 0.0, None));
    }
    if m == 1 {
        // only the empty support is allowed: B_min = 0
        let problem = problem?;
        let empty = SparseCoef {
            support: Vec::new(),
            coef: DenseMatrix::zeros(data.q(), 0),
        };
        let g = problem.objective(&empty);
        return Some(HResult::direct(g >= epsilon, g, Some(empty)));
    }
    None
}

/// `h_ε(B̂_M)` by projected gradient descent from the warm start.
pub fn h_pgd(data: &Dataset, fitted: &FittedModel, cfg: &HConfig) -> Result<HResult> {
    match fitted.coef() {
        Some(coef) => h_pgd_at(data, fitted, coef, cfg),
        None => Ok(HResult::direct(false, 0.0, None)),
    }
}

/// `h_ε(B_M)` for arbitrary target coefficients `B_M` on the model's support,
/// with `Σ̂_M` taken from `fitted`.
pub fn h_pgd_at(data: &Dataset, fitted: &FittedModel, target: &DenseMatrix, cfg: &HConfig) -> Result<HResult> {
    cfg.validate()?;
    let eps = cfg.epsilon;
    let problem = Problem::new(data, fitted, target);
    if let Some(r) = trivial_verdict(data, fitted, problem.as_ref(), eps) {
        return Ok(r);
    }
    let problem = problem.expect("usable fit has Σ̂ factor");
    let sigma = fitted.sigma().expect("usable fit has Σ̂");
    let m = problem.model.len();
    let keep = m - 1;
    let q = data.q();

    let lipschitz = data.gram_lambda_max() / smallest_eigenvalue(sigma);
    // B_M X_M Xᵀ, q × p
    let target_cross = problem.cross_all();

    let drop = argmin_norm_column(target);
    let support: Vec<usize> = problem
        .model
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != drop)
        .map(|(_, &j)| j)
        .collect();
    let init_cols: Vec<usize> = (0..m).filter(|&k| k != drop).collect();
    let mut cur = SparseCoef {
        support,
        coef: target.select_columns(&init_cols),
    };
    let mut g = problem.objective(&cur);
    let mut iterations = 0;
    let mut stable = 0;
    let mut converged = false;

    while !(cfg.early_stop && g < eps) {
        if iterations >= cfg.max_iter {
            break;
        }
        iterations += 1;
        // gradient of g: Σ̂⁻¹ (B X Xᵀ - B_M X_M Xᵀ)
        let mut grad = -&target_cross;
        add_gram_rows(&mut grad, &cur.coef, &cur.support, data.gram(), 1.0);
        let step = problem.sigma.solve(&grad);
        let mut full = -step / lipschitz;
        for (k, &j) in cur.support.iter().enumerate() {
            let mut col = full.column_mut(j);
            col += cur.coef.column(k);
        }
        let next_support = top_columns(&full, keep);
        if next_support == cur.support {
            stable += 1;
        } else {
            stable = 0;
        }
        let mut next = SparseCoef {
            coef: full.select_columns(&next_support),
            support: next_support,
        };
        if cfg.polish && stable >= cfg.polish_after {
            next = problem.project(&next.support);
        }
        let g_next = problem.objective(&next);
        let diff = (g - g_next).abs();
        let prev = g;
        cur = next;
        g = g_next;
        if diff <= cfg.rel_tol * prev.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    if g < eps {
        converged = true;
    }
    debug_assert_eq!(cur.coef.nrows(), q);
    Ok(HResult {
        h: g >= eps,
        objective: g,
        iterations,
        method: HMethod::Pgd,
        certificate: Some(cur),
        converged,
    })
}

/// Indices of the `k` columns with largest Euclidean norm, ascending.
/// Equal norms are ranked by lower index first.
fn top_columns(b: &DenseMatrix, k: usize) -> Vec<usize> {
    let norms: Vec<f64> = b.column_iter().map(|c| c.norm_squared()).collect();
    let mut order: Vec<usize> = (0..norms.len()).collect();
    order.sort_by(|&a, &c| norms[c].total_cmp(&norms[a]));
    let mut top: Vec<usize> = order.into_iter().take(k).collect();
    top.sort_unstable();
    top
}

/// Exact `h_ε(B̂_M)` by enumerating every support of size `|M| - 1`.
pub fn h_exhaustive(data: &Dataset, fitted: &FittedModel, epsilon: f64) -> Result<HResult> {
    h_exhaustive_capped(data, fitted, epsilon, EXHAUSTIVE_CAP)
}

pub fn h_exhaustive_capped(data: &Dataset, fitted: &FittedModel, epsilon: f64, cap: usize) -> Result<HResult> {
    if data.p() > cap {
        return Err(EasError::CapExceeded { p: data.p(), cap });
    }
    let problem = fitted.coef().and_then(|c| Problem::new(data, fitted, c));
    if let Some(r) = trivial_verdict(data, fitted, problem.as_ref(), epsilon) {
        return Ok(HResult {
            method: if r.method == HMethod::Direct && fitted.model().len() == 1 {
                HMethod::ExhaustiveOracle
            } else {
                r.method
            },
            ..r
        });
    }
    let problem = problem.expect("usable fit");
    let keep = problem.model.len() - 1;
    let mut best: Option<(f64, SparseCoef)> = None;
    let mut visited = 0;
    for support in (0..data.p()).combinations(keep) {
        visited += 1;
        let cand = problem.project(&support);
        let g = problem.objective(&cand);
        if best.as_ref().map_or(true, |(bg, _)| g < *bg) {
            best = Some((g, cand));
        }
    }
    let (g, cert) = best.expect("at least one support");
    Ok(HResult {
        h: g >= epsilon,
        objective: g,
        iterations: visited,
        method: HMethod::ExhaustiveOracle,
        certificate: Some(cert),
        converged: true,
    })
}
