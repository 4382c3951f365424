//! Metropolis-Hastings over model space and chain post-processing.
//!
//! Each step proposes to add, remove or swap one predictor. A move type that
//! is infeasible at the current model (size bounds, no predictor left to add)
//! is redrawn among the feasible ones, so each feasible type has probability
//! `1 / k(M)` where `k(M)` counts the feasible types. Added predictors are
//! drawn proportionally to the proposal weights over the complement of `M`;
//! removed predictors are drawn uniformly. The Hastings correction is the
//! exact ratio `q(M | M̃) / q(M̃ | M)` of this mixture.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::admissibility::{h_exhaustive, h_pgd, h_pgd_at, HConfig};
use crate::error::{EasError, Result};
use crate::matstat::RngStream;
use crate::model::{fit_model, log_gf_mass, log_gf_mass_expected, sample_coefficients, Dataset, ModelIndexSet};

/// Nonnegative per-predictor weights used to pick predictors to add.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalWeights {
    weights: Vec<f64>,
}

impl ProposalWeights {
    /// Normalize `weights` to sum to one.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(EasError::Config("proposal weights are empty".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(EasError::Config("proposal weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(EasError::Config("proposal weights sum to zero".into()));
        }
        Ok(ProposalWeights {
            weights: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(p: usize) -> Self {
        ProposalWeights {
            weights: vec![1.0 / p as f64; p],
        }
    }

    /// Marginal correlation scores `‖Y X_jᵀ‖`, falling back to uniform when all vanish.
    pub fn correlation(data: &Dataset) -> Self {
        Self::new(data.correlation_scores()).unwrap_or_else(|_| Self::uniform(data.p()))
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, j: usize) -> f64 {
        self.weights[j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    /// Total weight outside `model`.
    fn outside(&self, model: &ModelIndexSet) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .filter(|(j, _)| !model.contains(*j))
            .map(|(_, w)| w)
            .sum()
    }

    /// Draw an index outside `model` with probability `∝ w_j`.
    fn draw_outside<R: Rng + ?Sized>(&self, rng: &mut R, model: &ModelIndexSet, total: f64) -> usize {
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut last = None;
        for (j, &w) in self.weights.iter().enumerate() {
            if w <= 0.0 || model.contains(j) {
                continue;
            }
            acc += w;
            last = Some(j);
            if acc > target {
                return j;
            }
        }
        last.expect("positive weight outside the model")
    }

    /// Indices ordered by decreasing weight, lower index first on ties.
    pub fn ranked(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.weights.len()).collect();
        order.sort_by(|&a, &b| self.weights[b].total_cmp(&self.weights[a]));
        order
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MoveKind {
    Add,
    Remove,
    Swap,
    /// No move type is feasible; the chain stays put.
    Stay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub candidate: ModelIndexSet,
    /// `log q(M | M̃) - log q(M̃ | M)`.
    pub log_correction: f64,
    pub kind: MoveKind,
}

struct Feasible {
    add: bool,
    remove: bool,
    swap: bool,
    outside: f64,
}

impl Feasible {
    fn at(model: &ModelIndexSet, weights: &ProposalWeights, cap: usize) -> Self {
        let outside = weights.outside(model);
        let m = model.len();
        Feasible {
            add: m < cap && outside > 0.0,
            remove: m >= 2,
            swap: m >= 1 && outside > 0.0,
            outside,
        }
    }

    fn count(&self) -> usize {
        self.add as usize + self.remove as usize + self.swap as usize
    }

    fn kinds(&self) -> Vec<MoveKind> {
        let mut v = Vec::with_capacity(3);
        if self.add {
            v.push(MoveKind::Add);
        }
        if self.remove {
            v.push(MoveKind::Remove);
        }
        if self.swap {
            v.push(MoveKind::Swap);
        }
        v
    }
}

/// `log q(to | from)` for the single move connecting the two models.
fn log_proposal_prob(
    from: &ModelIndexSet,
    to: &ModelIndexSet,
    weights: &ProposalWeights,
    cap: usize,
) -> f64 {
    let feas = Feasible::at(from, weights, cap);
    let k = feas.count();
    if k == 0 {
        return f64::NEG_INFINITY;
    }
    let log_type = -(k as f64).ln();
    let added: Vec<usize> = to.indices().iter().copied().filter(|j| !from.contains(*j)).collect();
    let removed: Vec<usize> = from.indices().iter().copied().filter(|j| !to.contains(*j)).collect();
    let m = from.len() as f64;
    match (added.as_slice(), removed.as_slice()) {
        ([j], []) if feas.add => log_type + weights.get(*j).ln() - feas.outside.ln(),
        ([], [_]) if feas.remove => log_type - m.ln(),
        ([j], [_]) if feas.swap => log_type - m.ln() + weights.get(*j).ln() - feas.outside.ln(),
        _ => f64::NEG_INFINITY,
    }
}

/// Propose a neighbour of `current` and the log Hastings correction.
pub fn propose<R: Rng + ?Sized>(
    rng: &mut R,
    current: &ModelIndexSet,
    weights: &ProposalWeights,
    cap: usize,
) -> Proposal {
    let feas = Feasible::at(current, weights, cap);
    let kinds = feas.kinds();
    if kinds.is_empty() {
        return Proposal {
            candidate: current.clone(),
            log_correction: 0.0,
            kind: MoveKind::Stay,
        };
    }
    let kind = kinds[rng.random_range(0..kinds.len())];
    let m = current.len();
    let candidate = match kind {
        MoveKind::Add => current.with_added(weights.draw_outside(rng, current, feas.outside)),
        MoveKind::Remove => current.with_removed(current.indices()[rng.random_range(0..m)]),
        MoveKind::Swap => {
            let out = current.indices()[rng.random_range(0..m)];
            let inn = weights.draw_outside(rng, current, feas.outside);
            current.with_removed(out).with_added(inn)
        }
        MoveKind::Stay => unreachable!(),
    };
    let forward = log_proposal_prob(current, &candidate, weights, cap);
    let backward = log_proposal_prob(&candidate, current, weights, cap);
    Proposal {
        candidate,
        log_correction: backward - forward,
        kind,
    }
}

/// Something that assigns a log mass to a model.
pub trait LogMass {
    fn log_mass(&self, model: &ModelIndexSet) -> f64;
}

impl<F: Fn(&ModelIndexSet) -> f64> LogMass for F {
    fn log_mass(&self, model: &ModelIndexSet) -> f64 {
        self(model)
    }
}

/// How `E[h_ε(B_M)]` enters the model mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum HEstimator {
    /// `h_ε(B̂_M)` by projected gradient descent.
    Pgd,
    /// `h_ε(B̂_M)` by exhaustive enumeration (small `p` only).
    Exhaustive,
    /// Average of the PGD verdict over draws of `B_M` from its matrix-t law.
    MonteCarlo { draws: usize },
}

/// Fiducial log mass of models of one dataset at a fixed ε.
pub struct GfMass<'a> {
    data: &'a Dataset,
    h: HConfig,
    estimator: HEstimator,
    stream: RngStream,
}

impl<'a> GfMass<'a> {
    pub fn new(data: &'a Dataset, h: HConfig, estimator: HEstimator, stream: RngStream) -> Self {
        GfMass {
            data,
            h,
            estimator,
            stream,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.h.epsilon
    }

    fn evaluate(&self, model: &ModelIndexSet) -> Result<f64> {
        let (n, q) = (self.data.n(), self.data.q());
        if model.is_empty() || model.len() + q >= n {
            return Ok(f64::NEG_INFINITY);
        }
        let fitted = fit_model(self.data, model)?;
        if !fitted.is_usable() {
            return Ok(f64::NEG_INFINITY);
        }
        let eps = self.h.epsilon;
        let weight = match self.estimator {
            HEstimator::Pgd => log_gf_mass(&fitted, h_pgd(self.data, &fitted, &self.h)?.h, n, q, eps),
            HEstimator::Exhaustive => {
                log_gf_mass(&fitted, h_exhaustive(self.data, &fitted, eps)?.h, n, q, eps)
            }
            HEstimator::MonteCarlo { draws } => {
                let key = model
                    .indices()
                    .iter()
                    .fold(0xcbf2_9ce4_8422_2325u64, |h, &j| (h ^ j as u64).wrapping_mul(0x1000_0000_01b3));
                let mut rng = self.stream.child(key).rng();
                let mut hits = 0usize;
                for _ in 0..draws.max(1) {
                    let b = sample_coefficients(&mut rng, &fitted, n)?;
                    if h_pgd_at(self.data, &fitted, &b, &self.h)?.h {
                        hits += 1;
                    }
                }
                log_gf_mass_expected(&fitted, hits as f64 / draws.max(1) as f64, n, q, eps)
            }
        };
        Ok(weight.log_mass)
    }
}

impl LogMass for GfMass<'_> {
    fn log_mass(&self, model: &ModelIndexSet) -> f64 {
        self.evaluate(model).unwrap_or(f64::NEG_INFINITY)
    }
}

/// Memoized log masses with least-recently-used eviction beyond `capacity`.
#[derive(Debug, Clone)]
pub struct MassCache {
    entries: HashMap<ModelIndexSet, (f64, u64)>,
    capacity: usize,
    tick: u64,
}

impl MassCache {
    pub fn new(capacity: usize) -> Self {
        MassCache {
            entries: HashMap::new(),
            capacity: capacity.max(1),
            tick: 0,
        }
    }

    pub fn get_or_compute<M: LogMass + ?Sized>(&mut self, mass: &M, model: &ModelIndexSet) -> f64 {
        self.tick += 1;
        let tick = self.tick;
        if let Some(entry) = self.entries.get_mut(model) {
            entry.1 = tick;
            return entry.0;
        }
        let value = mass.log_mass(model);
        if self.entries.len() >= self.capacity {
            self.evict();
        }
        self.entries.insert(model.clone(), (value, tick));
        value
    }

    pub fn get(&self, model: &ModelIndexSet) -> Option<f64> {
        self.entries.get(model).map(|e| e.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    // drop the oldest tenth in one pass
    fn evict(&mut self) {
        let drop = (self.capacity / 10).max(1);
        let mut ticks: Vec<u64> = self.entries.values().map(|e| e.1).collect();
        ticks.sort_unstable();
        let cutoff = ticks[drop.min(ticks.len()) - 1];
        self.entries.retain(|_, e| e.1 > cutoff);
    }
}

/// Current position of a chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub model: ModelIndexSet,
    pub log_mass: f64,
    pub cache: MassCache,
}

/// Outcome of one Metropolis-Hastings step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub proposal: Proposal,
    pub candidate_log_mass: f64,
    pub acceptance_prob: f64,
    pub accepted: bool,
}

/// `min{1, exp(Δ log mass + log correction)}`, zero for a `-∞` candidate.
pub fn acceptance_probability(current: f64, candidate: f64, log_correction: f64) -> f64 {
    if candidate == f64::NEG_INFINITY {
        return 0.0;
    }
    let log_ratio = candidate - current + log_correction;
    if log_ratio >= 0.0 {
        1.0
    } else {
        log_ratio.exp()
    }
}

pub fn mh_step<R: Rng + ?Sized, M: LogMass + ?Sized>(
    rng: &mut R,
    state: &mut ChainState,
    mass: &M,
    weights: &ProposalWeights,
    cap: usize,
) -> StepOutcome {
    let proposal = propose(rng, &state.model, weights, cap);
    if proposal.kind == MoveKind::Stay {
        return StepOutcome {
            proposal,
            candidate_log_mass: state.log_mass,
            acceptance_prob: 1.0,
            accepted: false,
        };
    }
    let candidate_log_mass = state.cache.get_or_compute(mass, &proposal.candidate);
    let alpha = acceptance_probability(state.log_mass, candidate_log_mass, proposal.log_correction);
    let accepted = alpha > 0.0 && (alpha >= 1.0 || rng.random::<f64>() < alpha);
    if accepted {
        state.model = proposal.candidate.clone();
        state.log_mass = candidate_log_mass;
    }
    StepOutcome {
        proposal,
        candidate_log_mass,
        acceptance_prob: alpha,
        accepted,
    }
}

/// Where proposal weights come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSpec {
    Correlation,
    Uniform,
    /// Row norms of a cross-validated group LASSO fit; zero-weight predictors are never proposed.
    Lasso { folds: usize },
    Custom(Vec<f64>),
}

impl WeightSpec {
    pub fn resolve(&self, data: &Dataset) -> Result<ProposalWeights> {
        match self {
            WeightSpec::Correlation => Ok(ProposalWeights::correlation(data)),
            WeightSpec::Uniform => Ok(ProposalWeights::uniform(data.p())),
            WeightSpec::Lasso { folds } => {
                let w = crate::lasso::lasso_weights(data, *folds)?;
                ProposalWeights::new(w).or_else(|_| Ok(ProposalWeights::correlation(data)))
            }
            WeightSpec::Custom(w) => {
                if w.len() != data.p() {
                    return Err(EasError::Config(format!(
                        "{} proposal weights for p = {}",
                        w.len(),
                        data.p()
                    )));
                }
                ProposalWeights::new(w.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Total steps including burn-in.
    pub steps: usize,
    pub burn_in: usize,
    pub seed: RngStream,
    pub h: HConfig,
    pub estimator: HEstimator,
    /// Largest model size; defaults to `min(p, n - q - 1)`.
    pub max_size: Option<usize>,
    pub weights: WeightSpec,
    pub initial: Option<ModelIndexSet>,
    pub cache_capacity: usize,
}

impl ChainConfig {
    pub fn new(epsilon: f64, steps: usize, burn_in: usize, seed: u64) -> Self {
        ChainConfig {
            steps,
            burn_in,
            seed: RngStream::new(seed),
            h: HConfig::new(epsilon),
            estimator: HEstimator::Pgd,
            max_size: None,
            weights: WeightSpec::Correlation,
            initial: None,
            cache_capacity: 1_000_000,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.h.epsilon
    }

    pub fn with_seed(mut self, seed: RngStream) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.h.epsilon = epsilon;
        self
    }

    /// Effective size cap for a dataset.
    pub fn cap(&self, data: &Dataset) -> Result<usize> {
        let (n, p, q) = (data.n(), data.p(), data.q());
        if n <= q + 1 {
            return Err(EasError::Config(format!(
                "n = {n} leaves no admissible model size for q = {q}"
            )));
        }
        let default = p.min(n - q - 1);
        let cap = self.max_size.unwrap_or(default);
        if cap == 0 || cap + q >= n {
            return Err(EasError::Config(format!(
                "model size cap {cap} must satisfy 1 <= cap < n - q = {}",
                n - q
            )));
        }
        Ok(cap.min(p))
    }

    pub fn validate(&self) -> Result<()> {
        self.h.validate()?;
        if self.burn_in >= self.steps {
            return Err(EasError::Config(format!(
                "burn-in {} must be smaller than steps {}",
                self.burn_in, self.steps
            )));
        }
        Ok(())
    }
}

/// One distinct model seen after burn-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitedModel {
    pub model: ModelIndexSet,
    pub log_mass: f64,
    pub visits: usize,
    /// Mass-normalized probability over the visited set.
    pub prob: f64,
    /// Fraction of retained iterations spent in this model.
    pub visit_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub p: usize,
    pub epsilon: f64,
    /// Sorted by decreasing `prob`.
    pub models: Vec<VisitedModel>,
    pub map_model: ModelIndexSet,
    /// Mass-normalized marginal inclusion probabilities, one per predictor.
    pub inclusion: Vec<f64>,
    /// Visit-frequency marginal inclusion probabilities.
    pub visit_inclusion: Vec<f64>,
    pub acceptance_rate: f64,
    pub retained: usize,
    pub initial_model: ModelIndexSet,
}

impl ChainSummary {
    /// Mass-normalized probability of `model`, zero if unvisited.
    pub fn prob_of(&self, model: &ModelIndexSet) -> f64 {
        self.models
            .iter()
            .find(|v| &v.model == model)
            .map_or(0.0, |v| v.prob)
    }

    pub fn visit_prob_of(&self, model: &ModelIndexSet) -> f64 {
        self.models
            .iter()
            .find(|v| &v.model == model)
            .map_or(0.0, |v| v.visit_prob)
    }
}

/// Build a summary from visit counts and log masses of the visited models.
pub fn summarize(
    p: usize,
    epsilon: f64,
    visits: &BTreeMap<ModelIndexSet, (usize, f64)>,
    accepted: usize,
    steps: usize,
    initial_model: ModelIndexSet,
) -> Result<ChainSummary> {
    if visits.is_empty() {
        return Err(EasError::Config("no retained iterations".into()));
    }
    let logs: Vec<f64> = visits.values().map(|v| v.1).collect();
    let probs = crate::model::normalize_log_masses(&logs)?;
    let retained: usize = visits.values().map(|v| v.0).sum();
    let mut models: Vec<VisitedModel> = visits
        .iter()
        .zip(probs)
        .map(|((model, &(count, log_mass)), prob)| VisitedModel {
            model: model.clone(),
            log_mass,
            visits: count,
            prob,
            visit_prob: count as f64 / retained as f64,
        })
        .collect();
    // BTreeMap order breaks ties deterministically
    models.sort_by(|a, b| b.log_mass.total_cmp(&a.log_mass));
    let map_model = models[0].model.clone();
    let mut summary = ChainSummary {
        p,
        epsilon,
        models,
        map_model,
        inclusion: Vec::new(),
        visit_inclusion: Vec::new(),
        acceptance_rate: if steps == 0 { 0.0 } else { accepted as f64 / steps as f64 },
        retained,
        initial_model,
    };
    summary.inclusion = marginal_inclusion(&summary);
    summary.visit_inclusion = inclusion_by(&summary, |v| v.visit_prob);
    Ok(summary)
}

fn inclusion_by(summary: &ChainSummary, weight: impl Fn(&VisitedModel) -> f64) -> Vec<f64> {
    let mut incl = vec![0.0; summary.p];
    for v in &summary.models {
        let w = weight(v);
        for &j in v.model.indices() {
            incl[j] += w;
        }
    }
    incl.iter().map(|x| x.clamp(0.0, 1.0)).collect()
}

/// `P(j) = Σ_{M ∋ j} r̂(M) / Σ_M r̂(M)` over visited models.
pub fn marginal_inclusion(summary: &ChainSummary) -> Vec<f64> {
    inclusion_by(summary, |v| v.prob)
}

/// Greedy forward selection order: repeatedly add the predictor whose column
/// best explains the current least-squares residual, up to `cap` predictors.
pub fn forward_path(data: &Dataset, cap: usize) -> Vec<usize> {
    let p = data.p();
    let gram = data.gram();
    let xy_t = data.xy().transpose();
    let mut order: Vec<usize> = Vec::new();
    let mut chosen = vec![false; p];
    // residual cross-products R Xᵀ (q × p)
    let mut rx = xy_t.clone();
    while order.len() < cap.min(p) {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..p {
            let gjj = gram[(j, j)];
            if chosen[j] || !(gjj > 0.0) {
                continue;
            }
            let score = rx.column(j).norm_squared() / gjj;
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let Some((j, _)) = best else { break };
        chosen[j] = true;
        order.push(j);
        let model = match ModelIndexSet::new(order.clone()) {
            Ok(m) => m,
            Err(_) => break,
        };
        let Ok(fitted) = fit_model(data, &model) else { break };
        let Some(coef) = fitted.coef() else {
            order.pop();
            continue;
        };
        rx = &xy_t - coef * gram.select_rows(model.indices());
    }
    order
}

/// Nested models along the forward-selection path, used as starting candidates.
pub fn stepwise_models(data: &Dataset, cap: usize) -> Vec<ModelIndexSet> {
    let forward = forward_path(data, cap);
    (1..=forward.len())
        .filter_map(|k| ModelIndexSet::new(forward[..k].to_vec()).ok())
        .collect()
}

/// Size bound for the starting models compared by mass.
const SMALL_START: usize = 5;

/// Pick the starting model: the user's model if it has finite mass, else the
/// highest-mass model among the top-`k` predictors by weight and the
/// `candidates` with at most [`SMALL_START`] predictors, else the smallest
/// admissible top-`k` model with larger `k` (over positive weights only), else
/// the first admissible larger candidate in the given order.
///
/// Larger starts are not compared by mass: in `p ≫ n` the heaviest of them is
/// usually a near-saturated model that the chain then never leaves.
pub fn initialize<M: LogMass + ?Sized>(
    mass: &M,
    cache: &mut MassCache,
    weights: &ProposalWeights,
    cap: usize,
    user: Option<&ModelIndexSet>,
    candidates: &[ModelIndexSet],
) -> Result<(ModelIndexSet, f64)> {
    if let Some(m) = user {
        if !m.is_empty() && m.len() <= cap {
            let lm = cache.get_or_compute(mass, m);
            if lm.is_finite() {
                return Ok((m.clone(), lm));
            }
        }
    }
    let ranked = weights.ranked();
    let mut top = Vec::new();
    for k in (1..=SMALL_START.min(cap)).rev() {
        top.push(ModelIndexSet::new(ranked[..k].to_vec())?);
    }
    let usable = |m: &&ModelIndexSet| !m.is_empty() && m.len() <= cap;
    let (small, large): (Vec<&ModelIndexSet>, Vec<&ModelIndexSet>) =
        candidates.iter().filter(usable).partition(|m| m.len() <= SMALL_START);
    let mut best: Option<(ModelIndexSet, f64)> = None;
    for m in top.iter().chain(small) {
        let lm = cache.get_or_compute(mass, m);
        if lm.is_finite() && best.as_ref().is_none_or(|(_, b)| lm > *b) {
            best = Some((m.clone(), lm));
        }
    }
    if let Some(found) = best {
        return Ok(found);
    }
    let positive = weights.as_slice().iter().filter(|w| **w > 0.0).count();
    for k in SMALL_START + 1..=cap.min(positive) {
        let m = ModelIndexSet::new(ranked[..k].to_vec())?;
        let lm = cache.get_or_compute(mass, &m);
        if lm.is_finite() {
            return Ok((m, lm));
        }
    }
    for m in large {
        let lm = cache.get_or_compute(mass, m);
        if lm.is_finite() {
            return Ok((m.clone(), lm));
        }
    }
    Err(EasError::InitializationFailed(
        "neither the supplied model, a top-k weighted model nor a stepwise model is admissible"
            .into(),
    ))
}

/// Run a chain over an arbitrary mass function on `p` predictors.
pub fn run_chain_with<M: LogMass + ?Sized>(
    mass: &M,
    p: usize,
    epsilon: f64,
    weights: &ProposalWeights,
    cap: usize,
    starts: &[ModelIndexSet],
    cfg: &ChainConfig,
) -> Result<ChainSummary> {
    cfg.validate()?;
    if weights.len() != p {
        return Err(EasError::Config("weights length differs from p".into()));
    }
    let mut cache = MassCache::new(cfg.cache_capacity);
    let (init, init_mass) = initialize(mass, &mut cache, weights, cap, cfg.initial.as_ref(), starts)?;
    let mut state = ChainState {
        model: init.clone(),
        log_mass: init_mass,
        cache,
    };
    let mut rng = cfg.seed.rng();
    let mut visits: BTreeMap<ModelIndexSet, (usize, f64)> = BTreeMap::new();
    let mut accepted = 0;
    for step in 0..cfg.steps {
        if mh_step(&mut rng, &mut state, mass, weights, cap).accepted {
            accepted += 1;
        }
        if step >= cfg.burn_in {
            let e = visits.entry(state.model.clone()).or_insert((0, state.log_mass));
            e.0 += 1;
        }
    }
    summarize(p, epsilon, &visits, accepted, cfg.steps, init)
}

/// Run the fiducial model-space chain on `data`.
pub fn run_chain(data: &Dataset, cfg: &ChainConfig) -> Result<ChainSummary> {
    cfg.validate()?;
    if let Some(m) = &cfg.initial {
        m.check(data.p())?;
    }
    let weights = cfg.weights.resolve(data)?;
    let cap = cfg.cap(data)?;
    let mass = GfMass::new(data, cfg.h, cfg.estimator, cfg.seed.child(0x6d61_7373));
    let starts = stepwise_models(data, cap);
    run_chain_with(&mass, data.p(), cfg.epsilon(), &weights, cap, &starts, cfg)
}
