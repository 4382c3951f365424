//! Choosing ε over a grid by BIC or k-fold cross-validation.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EasError, Result};
use crate::matstat::RngStream;
use crate::model::{fit_model, Dataset, ModelIndexSet};
use crate::sampler::{run_chain, ChainConfig, ChainSummary, WeightSpec};

/// Strictly increasing positive ε values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EpsilonGrid {
    values: Vec<f64>,
}

impl EpsilonGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(EasError::Config("epsilon grid is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(EasError::Config("epsilon values must be finite and positive".into()));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(EasError::Config("epsilon grid must be strictly increasing".into()));
        }
        Ok(EpsilonGrid { values })
    }

    /// `k` equally spaced points from `lo` to `hi` inclusive.
    pub fn uniform(lo: f64, hi: f64, k: usize) -> Result<Self> {
        match k {
            0 => Err(EasError::Config("grid needs at least one point".into())),
            1 => Self::new(vec![lo]),
            _ => {
                let step = (hi - lo) / (k - 1) as f64;
                let mut values: Vec<f64> = (0..k).map(|i| lo + step * i as f64).collect();
                values[k - 1] = hi;
                Self::new(values)
            }
        }
    }

    /// 24 points on `[0.05, 10]`.
    pub fn standard() -> Self {
        Self::uniform(0.05, 10.0, 24).expect("valid grid")
    }

    /// 16 points on `[0.01, 0.2]`, for strongly correlated responses.
    pub fn fine() -> Self {
        Self::uniform(0.01, 0.2, 16).expect("valid grid")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl FromStr for EpsilonGrid {
    type Err = EasError;

    /// Parses `lo:hi:k`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let bad = || EasError::Config(format!("grid spec `{s}` is not lo:hi:k"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].parse().map_err(|_| bad())?;
        let k: usize = parts[2].parse().map_err(|_| bad())?;
        Self::uniform(lo, hi, k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuningMethod {
    Bic,
    Cv,
}

impl fmt::Display for TuningMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TuningMethod::Bic => "bic",
            TuningMethod::Cv => "cv",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningConfig {
    pub grid: EpsilonGrid,
    /// Chain template; its ε is replaced per grid cell and its seed is the root stream.
    pub chain: ChainConfig,
    pub search_steps: usize,
    pub search_burn_in: usize,
    /// Final chain at the chosen ε (CV only; BIC reuses the search chain).
    pub final_steps: usize,
    pub final_burn_in: usize,
    pub folds: usize,
    /// Weight of the model-count penalty in the BIC score; `None` picks it from `(n, p)`.
    #[serde(default)]
    pub ebic_gamma: Option<f64>,
}

impl TuningConfig {
    pub fn bic(grid: EpsilonGrid, chain: ChainConfig) -> Self {
        TuningConfig {
            grid,
            chain,
            search_steps: 5000,
            search_burn_in: 2000,
            final_steps: 5000,
            final_burn_in: 2000,
            folds: 10,
            ebic_gamma: None,
        }
    }

    pub fn cv(grid: EpsilonGrid, chain: ChainConfig) -> Self {
        TuningConfig {
            grid,
            chain,
            search_steps: 500,
            search_burn_in: 200,
            final_steps: 10_000,
            final_burn_in: 5000,
            folds: 10,
            ebic_gamma: None,
        }
    }

    fn cell_chain(template: &ChainConfig, epsilon: f64, stream: RngStream, steps: usize, burn_in: usize) -> ChainConfig {
        let mut cfg = template.clone().with_epsilon(epsilon).with_seed(stream);
        cfg.steps = steps;
        cfg.burn_in = burn_in;
        cfg
    }

    /// Chain template for `data` with data-dependent weights computed once.
    fn template_for(&self, data: &Dataset) -> Result<ChainConfig> {
        let mut chain = self.chain.clone();
        if matches!(chain.weights, WeightSpec::Lasso { .. }) {
            chain.weights = WeightSpec::Custom(chain.weights.resolve(data)?.as_slice().to_vec());
        }
        Ok(chain)
    }
}

/// Score of one grid value; `+∞` when no chain could run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub epsilon: f64,
    #[serde(with = "crate::tuning::float_or_null")]
    pub score: f64,
    pub map_model: Option<ModelIndexSet>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub method: TuningMethod,
    pub chosen_epsilon: f64,
    pub scores: Vec<ScoreRow>,
    pub final_chain: ChainSummary,
}

/// `n·log det(Σ̂_M / n) + q·|M|·log n`.
pub fn bic_score(data: &Dataset, model: &ModelIndexSet) -> Result<f64> {
    let fitted = fit_model(data, model)?;
    let (n, q) = (data.n() as f64, data.q() as f64);
    let log_det = fitted.log_det_sigma();
    if !log_det.is_finite() {
        return Ok(f64::INFINITY);
    }
    Ok(n * (log_det - q * n.ln()) + q * model.len() as f64 * n.ln())
}

/// `log C(p, k)`.
fn log_binomial(p: usize, k: usize) -> f64 {
    let k = k.min(p - k.min(p));
    (0..k).map(|i| ((p - i) as f64 / (i + 1) as f64).ln()).sum()
}

/// Default model-count penalty weight: zero when `p <= n`, otherwise
/// `1 - 1/(2κ)` with `p = n^κ`.
pub fn default_ebic_gamma(n: usize, p: usize) -> f64 {
    if p <= n || n < 2 {
        return 0.0;
    }
    let kappa = (p as f64).ln() / (n as f64).ln();
    (1.0 - 1.0 / (2.0 * kappa)).max(0.0)
}

/// BIC plus `2γ·log C(p, |M|)`, which keeps near-saturated fits from winning when `p > n`.
pub fn extended_bic_score(data: &Dataset, model: &ModelIndexSet, gamma: f64) -> Result<f64> {
    let base = bic_score(data, model)?;
    Ok(base + 2.0 * gamma * log_binomial(data.p(), model.len()))
}

/// Index of the smallest finite score, first on ties.
fn argmin(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_finite() && best.is_none_or(|b| s < scores[b]) {
            best = Some(i);
        }
    }
    best
}

pub fn tune_bic(data: &Dataset, cfg: &TuningConfig) -> Result<TuningResult> {
    let root = cfg.chain.seed;
    let gamma = cfg.ebic_gamma.unwrap_or_else(|| default_ebic_gamma(data.n(), data.p()));
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(EasError::Config(format!("extended BIC weight must be nonnegative, got {gamma}")));
    }
    let template = cfg.template_for(data)?;
    let cells: Vec<(f64, Result<ChainSummary>)> = cfg
        .grid
        .values()
        .par_iter()
        .enumerate()
        .map(|(i, &eps)| {
            let chain = TuningConfig::cell_chain(&template, eps, root.child(i as u64), cfg.search_steps, cfg.search_burn_in);
            (eps, run_chain(data, &chain))
        })
        .collect();

    let mut rows = Vec::with_capacity(cells.len());
    let mut chains = Vec::with_capacity(cells.len());
    let mut first_error = None;
    for (eps, outcome) in cells {
        match outcome {
            Ok(summary) => {
                let score = extended_bic_score(data, &summary.map_model, gamma)?;
                rows.push(ScoreRow {
                    epsilon: eps,
                    score,
                    map_model: Some(summary.map_model.clone()),
                    failures: 0,
                });
                chains.push(Some(summary));
            }
            Err(e) => {
                first_error.get_or_insert(e);
                rows.push(ScoreRow {
                    epsilon: eps,
                    score: f64::INFINITY,
                    map_model: None,
                    failures: 1,
                });
                chains.push(None);
            }
        }
    }
    let scores: Vec<f64> = rows.iter().map(|r| r.score).collect();
    let best = argmin(&scores).ok_or_else(|| {
        first_error.unwrap_or_else(|| EasError::InitializationFailed("no grid value is usable".into()))
    })?;
    Ok(TuningResult {
        method: TuningMethod::Bic,
        chosen_epsilon: rows[best].epsilon,
        scores: rows,
        final_chain: chains[best].take().expect("chain of a finite score"),
    })
}

/// Fold label of each observation from a seeded permutation.
pub fn fold_assignment(n: usize, folds: usize, stream: RngStream) -> Result<Vec<usize>> {
    if folds < 2 || folds > n {
        return Err(EasError::Config(format!("need 2 <= folds <= n, got folds = {folds}, n = {n}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream.rng());
    let mut label = vec![0; n];
    for (pos, &obs) in perm.iter().enumerate() {
        label[obs] = pos % folds;
    }
    Ok(label)
}

/// Held-out prediction error `‖Y - B̂ X_M‖²_F / (n_test·q)` of a least-squares refit on `train`.
pub fn prediction_error(train: &Dataset, test: &Dataset, model: &ModelIndexSet) -> Result<f64> {
    let fitted = fit_model(train, model)?;
    let Some(coef) = fitted.coef() else {
        return Ok(f64::INFINITY);
    };
    let resid = test.y() - coef * test.x_rows(model.indices());
    Ok(resid.norm_squared() / (test.n() * test.q()) as f64)
}

const FOLD_STREAM: u64 = 0xf01d;
const FINAL_STREAM: u64 = 0xf1a1;

pub fn tune_cv(data: &Dataset, cfg: &TuningConfig) -> Result<TuningResult> {
    let root = cfg.chain.seed;
    let labels = fold_assignment(data.n(), cfg.folds, root.child(FOLD_STREAM))?;
    let mut splits = Vec::with_capacity(cfg.folds);
    for f in 0..cfg.folds {
        let train: Vec<usize> = (0..data.n()).filter(|&i| labels[i] != f).collect();
        let test: Vec<usize> = (0..data.n()).filter(|&i| labels[i] == f).collect();
        let train = data.select_observations(&train)?;
        let template = cfg.template_for(&train)?;
        splits.push((train, data.select_observations(&test)?, template));
    }

    let k = cfg.grid.len();
    let cells: Vec<(usize, usize)> = (0..cfg.folds).flat_map(|f| (0..k).map(move |i| (f, i))).collect();
    let errors: Vec<f64> = cells
        .par_iter()
        .map(|&(f, i)| {
            let eps = cfg.grid.values()[i];
            let stream = root.child(((f as u64 + 1) << 32) | i as u64);
            let (train, test, template) = &splits[f];
            let chain = TuningConfig::cell_chain(template, eps, stream, cfg.search_steps, cfg.search_burn_in);
            run_chain(train, &chain)
                .and_then(|s| prediction_error(train, test, &s.map_model))
                .unwrap_or(f64::INFINITY)
        })
        .collect();

    let mut rows = Vec::with_capacity(k);
    for (i, &eps) in cfg.grid.values().iter().enumerate() {
        let per_fold: Vec<f64> = (0..cfg.folds).map(|f| errors[f * k + i]).collect();
        let failures = per_fold.iter().filter(|e| !e.is_finite()).count();
        let score = if failures > 0 {
            f64::INFINITY
        } else {
            per_fold.iter().sum::<f64>() / cfg.folds as f64
        };
        rows.push(ScoreRow {
            epsilon: eps,
            score,
            map_model: None,
            failures,
        });
    }
    let scores: Vec<f64> = rows.iter().map(|r| r.score).collect();
    let best = argmin(&scores)
        .ok_or_else(|| EasError::InitializationFailed("every grid value failed in some fold".into()))?;
    let chosen = rows[best].epsilon;
    let final_cfg = TuningConfig::cell_chain(&cfg.template_for(data)?, chosen, root.child(FINAL_STREAM), cfg.final_steps, cfg.final_burn_in);
    let final_chain = run_chain(data, &final_cfg)?;
    rows[best].map_model = Some(final_chain.map_model.clone());
    Ok(TuningResult {
        method: TuningMethod::Cv,
        chosen_epsilon: chosen,
        scores: rows,
        final_chain,
    })
}

pub fn tune(data: &Dataset, method: TuningMethod, cfg: &TuningConfig) -> Result<TuningResult> {
    match method {
        TuningMethod::Bic => tune_bic(data, cfg),
        TuningMethod::Cv => tune_cv(data, cfg),
    }
}

/// Non-finite floats serialize as `null`, since JSON has no infinity.
pub(crate) mod float_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}
