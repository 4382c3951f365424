//! Synthetic experiment designs, selection metrics and a replication harness.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EasError, Result};
use crate::matstat::{cholesky, standard_normal_matrix, DenseMatrix, RngStream};
use crate::model::{Dataset, ModelIndexSet};
use crate::sampler::{ChainConfig, WeightSpec};
use crate::tuning::{tune, EpsilonGrid, TuningConfig, TuningMethod};

/// Structure of a covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CovarianceKind {
    /// `σ² ρ^|i-j|`.
    Ar1 { rho: f64, sigma2: f64 },
    /// `c (1 + I(i = j))`: constant off-diagonal correlation 1/2.
    Compound { scale: f64 },
}

impl CovarianceKind {
    pub fn matrix(&self, d: usize) -> DenseMatrix {
        match *self {
            CovarianceKind::Ar1 { rho, sigma2 } => DenseMatrix::from_fn(d, d, |i, j| {
                sigma2 * rho.powi((i as i64 - j as i64).unsigned_abs() as i32)
            }),
            CovarianceKind::Compound { scale } => {
                DenseMatrix::from_fn(d, d, |i, j| scale * if i == j { 2.0 } else { 1.0 })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationDesign {
    pub name: String,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub true_size: usize,
    pub predictor_cov: CovarianceKind,
    pub error_cov: CovarianceKind,
    /// Zero out the coefficients, leaving pure noise.
    #[serde(default)]
    pub null_signal: bool,
}

pub const PRESETS: [&str; 9] = [
    "ld-sparse",
    "ld-dense",
    "hd-sparse",
    "hd-dense",
    "uhd-ultrasparse",
    "uhd-sparse",
    "largeq-ar1",
    "largeq-nondecay",
    "largeq-dense",
];

const AR1_X: CovarianceKind = CovarianceKind::Ar1 { rho: 0.5, sigma2: 1.0 };
const AR1_V: CovarianceKind = CovarianceKind::Ar1 { rho: 0.5, sigma2: 2.0 };
const NON_DECAYING: CovarianceKind = CovarianceKind::Compound { scale: 0.5 };
const DENSE_V: CovarianceKind = CovarianceKind::Compound { scale: 1.0 };

impl SimulationDesign {
    /// AR(1) predictors with `ρ = 0.5` and AR(1) errors with `σ² = 2`.
    pub fn ar1(name: &str, n: usize, p: usize, q: usize, true_size: usize) -> Self {
        SimulationDesign {
            name: name.to_string(),
            n,
            p,
            q,
            true_size,
            predictor_cov: AR1_X,
            error_cov: AR1_V,
            null_signal: false,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        let d = match name {
            "ld-sparse" => Self::ar1(name, 60, 30, 3, 5),
            "ld-dense" => Self::ar1(name, 80, 60, 6, 40),
            "hd-sparse" => Self::ar1(name, 50, 200, 5, 20),
            "hd-dense" => Self::ar1(name, 60, 100, 6, 40),
            "uhd-ultrasparse" => Self::ar1(name, 100, 500, 3, 10),
            "uhd-sparse" => Self::ar1(name, 150, 1000, 4, 50),
            "largeq-ar1" => Self::ar1(name, 150, 1000, 60, 50),
            "largeq-nondecay" => SimulationDesign {
                predictor_cov: NON_DECAYING,
                ..Self::ar1(name, 150, 1000, 60, 50)
            },
            "largeq-dense" => SimulationDesign {
                predictor_cov: NON_DECAYING,
                error_cov: DENSE_V,
                ..Self::ar1(name, 150, 1000, 60, 50)
            },
            _ => return None,
        };
        Some(d)
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 || self.q == 0 {
            return Err(EasError::Config("n, p and q must be positive".into()));
        }
        if self.true_size > self.p {
            return Err(EasError::Config(format!(
                "true model size {} exceeds p = {}",
                self.true_size, self.p
            )));
        }
        Ok(())
    }
}

/// One generated instance with a test set of the same size.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub train: Dataset,
    pub test: Dataset,
    pub truth: ModelIndexSet,
    /// `q × p`, zero outside the true support.
    pub coef: DenseMatrix,
    pub error_cov: DenseMatrix,
}

/// `U + I(U > -0.5)` with `U ~ Uniform(-5, 4)`.
fn coefficient<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u = Uniform::new(-5.0, 4.0).expect("valid range").sample(rng);
    if u > -0.5 {
        u + 1.0
    } else {
        u
    }
}

fn draw_observations<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    x_factor: &DenseMatrix,
    v_factor: &DenseMatrix,
    coef: &DenseMatrix,
) -> Result<Dataset> {
    let x = x_factor * standard_normal_matrix(rng, x_factor.nrows(), n);
    let y = coef * &x + v_factor * standard_normal_matrix(rng, v_factor.nrows(), n);
    Dataset::new(y, x)
}

pub fn generate(design: &SimulationDesign, stream: RngStream) -> Result<SimulatedData> {
    design.validate()?;
    let (n, p, q) = (design.n, design.p, design.q);
    let gamma = design.predictor_cov.matrix(p);
    let v = design.error_cov.matrix(q);
    let x_factor = cholesky(&gamma)?.lower().clone();
    let v_factor = cholesky(&v)?.lower().clone();

    let mut rng = stream.child(0).rng();
    let truth = ModelIndexSet::new(sample(&mut rng, p, design.true_size).into_vec())?;
    let mut coef = DenseMatrix::zeros(q, p);
    if !design.null_signal {
        for &j in truth.indices() {
            for i in 0..q {
                coef[(i, j)] = coefficient(&mut rng);
            }
        }
    }
    let train = draw_observations(&mut stream.child(1).rng(), n, &x_factor, &v_factor, &coef)?;
    let test = draw_observations(&mut stream.child(2).rng(), n, &x_factor, &v_factor, &coef)?;
    Ok(SimulatedData {
        train,
        test,
        truth,
        coef,
        error_cov: v,
    })
}

/// Entry-level confusion counts; selecting predictor `j` counts `q` entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn count(selected: &ModelIndexSet, truth: &ModelIndexSet, p: usize, q: usize) -> Self {
        let tp = selected.indices().iter().filter(|j| truth.contains(**j)).count();
        let fp = selected.len() - tp;
        let fn_ = truth.len() - tp;
        let tn = p - tp - fp - fn_;
        Confusion {
            tp: tp * q,
            fp: fp * q,
            tn: tn * q,
            fn_: fn_ * q,
        }
    }

    /// `FP / (FP + TP)`, and whether it was `0/0`.
    pub fn fdr(&self) -> (f64, bool) {
        let d = self.fp + self.tp;
        if d == 0 {
            (0.0, true)
        } else {
            (self.fp as f64 / d as f64, false)
        }
    }

    /// `FN / (FN + TN)`: the share of unselected entries that are active.
    pub fn fnr(&self) -> f64 {
        let d = self.fn_ + self.tn;
        if d == 0 {
            0.0
        } else {
            self.fn_ as f64 / d as f64
        }
    }

    /// `(FP + FN) / pq`.
    pub fn mp(&self) -> f64 {
        let total = self.tp + self.fp + self.tn + self.fn_;
        (self.fp + self.fn_) as f64 / total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub replication: usize,
    pub selected: ModelIndexSet,
    pub truth: ModelIndexSet,
    pub chosen_epsilon: f64,
    pub mspe: f64,
    pub fdr: f64,
    pub fdr_undefined: bool,
    pub fnr: f64,
    pub mp: f64,
    pub correct: bool,
    pub confusion: Confusion,
    /// Mass-normalized probability of the true model over visited models.
    pub prob_true: f64,
    /// Fraction of retained iterations spent in the true model.
    pub visit_prob_true: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
}

/// Selection metrics of `selected` against `truth`, with MSPE from a training refit.
pub fn compute_metrics(
    selected: &ModelIndexSet,
    truth: &ModelIndexSet,
    train: &Dataset,
    test: &Dataset,
) -> Result<(Confusion, f64)> {
    let confusion = Confusion::count(selected, truth, train.p(), train.q());
    let mspe = if selected.is_empty() {
        test.y().norm_squared() / (test.n() * test.q()) as f64
    } else {
        crate::tuning::prediction_error(train, test, selected)?
    };
    Ok((confusion, mspe))
}

/// How ε is set in each replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SelectionMethod {
    Bic,
    Cv,
    Fixed { epsilon: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub design: SimulationDesign,
    pub replications: usize,
    pub method: SelectionMethod,
    /// Grid, chain template and chain lengths. For a fixed ε the final lengths are used.
    pub tuning: TuningConfig,
    pub seed: u64,
    #[serde(default)]
    pub timing: bool,
    /// Caps model size at `⌊n^a⌋` when the chain template sets no cap, keeping
    /// chains away from near-saturated models whose `Σ̂` is degenerate.
    #[serde(default)]
    pub size_exponent: Option<f64>,
}

/// Default `a` in the `⌊n^a⌋` model-size cap of simulation experiments.
pub const SIZE_EXPONENT: f64 = 0.95;

/// `⌊n^a⌋`, clamped to the sizes a fit with `q` responses allows.
pub fn size_cap(n: usize, q: usize, exponent: f64) -> Result<usize> {
    if !(exponent > 0.0 && exponent <= 1.0) {
        return Err(EasError::Config(format!("size exponent must lie in (0, 1], got {exponent}")));
    }
    if n <= q + 1 {
        return Err(EasError::Config(format!("n = {n} leaves no admissible model size for q = {q}")));
    }
    let cap = (n as f64).powf(exponent).floor() as usize;
    Ok(cap.clamp(1, n - q - 1))
}

impl ExperimentConfig {
    pub fn new(design: SimulationDesign, replications: usize, method: SelectionMethod, seed: u64) -> Self {
        let mut chain = ChainConfig::new(1.0, 1, 0, seed);
        chain.weights = WeightSpec::Lasso { folds: 10 };
        let grid = EpsilonGrid::standard();
        let tuning = match method {
            SelectionMethod::Cv => TuningConfig::cv(grid, chain),
            _ => TuningConfig::bic(grid, chain),
        };
        ExperimentConfig {
            design,
            replications,
            method,
            tuning,
            seed,
            timing: false,
            size_exponent: Some(SIZE_EXPONENT),
        }
    }
}

fn run_replication(cfg: &ExperimentConfig, rep: usize) -> Result<MetricsRecord> {
    let stream = RngStream::new(cfg.seed).child(rep as u64);
    let sim = generate(&cfg.design, stream.child(0))?;
    let start = Instant::now();
    let mut tuning = cfg.tuning.clone();
    tuning.chain.seed = stream.child(1);
    if let (None, Some(a)) = (tuning.chain.max_size, cfg.size_exponent) {
        tuning.chain.max_size = Some(size_cap(sim.train.n(), sim.train.q(), a)?);
    }
    let (epsilon, summary) = match cfg.method {
        SelectionMethod::Bic | SelectionMethod::Cv => {
            let method = if cfg.method == SelectionMethod::Bic {
                TuningMethod::Bic
            } else {
                TuningMethod::Cv
            };
            let r = tune(&sim.train, method, &tuning)?;
            (r.chosen_epsilon, r.final_chain)
        }
        SelectionMethod::Fixed { epsilon } => {
            let mut chain = tuning.chain.clone().with_epsilon(epsilon);
            chain.steps = tuning.final_steps;
            chain.burn_in = tuning.final_burn_in;
            (epsilon, crate::sampler::run_chain(&sim.train, &chain)?)
        }
    };
    let elapsed = start.elapsed().as_secs_f64();
    let selected = summary.map_model.clone();
    let (confusion, mspe) = compute_metrics(&selected, &sim.truth, &sim.train, &sim.test)?;
    let (fdr, fdr_undefined) = confusion.fdr();
    Ok(MetricsRecord {
        replication: rep,
        correct: selected == sim.truth,
        prob_true: summary.prob_of(&sim.truth),
        visit_prob_true: summary.visit_prob_of(&sim.truth),
        selected,
        truth: sim.truth,
        chosen_epsilon: epsilon,
        mspe,
        fdr,
        fdr_undefined,
        fnr: confusion.fnr(),
        mp: confusion.mp(),
        confusion,
        runtime_seconds: cfg.timing.then_some(elapsed),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationFailure {
    pub replication: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub replications: usize,
    pub failures: usize,
    pub median_mspe: f64,
    pub mean_fdr: f64,
    pub mean_fnr: f64,
    pub mean_mp: f64,
    pub pcm: f64,
    pub mean_prob_true: f64,
    pub mean_visit_prob_true: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_runtime_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub design: SimulationDesign,
    pub method: SelectionMethod,
    pub seed: u64,
    pub aggregate: Aggregate,
    pub records: Vec<MetricsRecord>,
    pub failures: Vec<ReplicationFailure>,
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// Aggregate per-replication records: medians of MSPE and runtime, means of the rest.
pub fn aggregate(records: &[MetricsRecord], failures: usize) -> Aggregate {
    let mut mspe: Vec<f64> = records.iter().map(|r| r.mspe).collect();
    let mut runtimes: Vec<f64> = records.iter().filter_map(|r| r.runtime_seconds).collect();
    Aggregate {
        replications: records.len() + failures,
        failures,
        median_mspe: median(&mut mspe),
        mean_fdr: mean(records.iter().map(|r| r.fdr)),
        mean_fnr: mean(records.iter().map(|r| r.fnr)),
        mean_mp: mean(records.iter().map(|r| r.mp)),
        pcm: mean(records.iter().map(|r| r.correct as u8 as f64)),
        mean_prob_true: mean(records.iter().map(|r| r.prob_true)),
        mean_visit_prob_true: mean(records.iter().map(|r| r.visit_prob_true)),
        median_runtime_seconds: (!runtimes.is_empty()).then(|| median(&mut runtimes)),
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.design.validate()?;
    if cfg.replications == 0 {
        return Err(EasError::Config("replications must be at least 1".into()));
    }
    if let Some(a) = cfg.size_exponent {
        size_cap(cfg.design.n, cfg.design.q, a)?;
    }
    let outcomes: Vec<Result<MetricsRecord>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| run_replication(cfg, rep))
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (rep, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(r) => records.push(r),
            Err(e) => failures.push(ReplicationFailure {
                replication: rep,
                error: e.to_string(),
            }),
        }
    }
    Ok(ExperimentReport {
        design: cfg.design.clone(),
        method: cfg.method,
        seed: cfg.seed,
        aggregate: aggregate(&records, failures.len()),
        records,
        failures,
    })
}

fn method_label(m: &SelectionMethod) -> String {
    match m {
        SelectionMethod::Bic => "EAS-BIC".into(),
        SelectionMethod::Cv => "EAS-CV".into(),
        SelectionMethod::Fixed { epsilon } => format!("EAS(eps={epsilon})"),
    }
}

impl ExperimentReport {
    /// Aligned plain-text summary in the layout of the results tables.
    pub fn table(&self) -> String {
        let a = &self.aggregate;
        let mut header = vec!["design", "method", "reps", "MSPE", "FDR", "FNR", "MP", "PCM", "P(Mo|Y)"];
        let mut row = vec![
            self.design.name.clone(),
            method_label(&self.method),
            format!("{}", a.replications - a.failures),
            format!("{:.3}", a.median_mspe),
            format!("{:.4}", a.mean_fdr),
            format!("{:.4}", a.mean_fnr),
            format!("{:.4}", a.mean_mp),
            format!("{:.3}", a.pcm),
            format!("{:.4}", a.mean_prob_true),
        ];
        if let Some(t) = a.median_runtime_seconds {
            header.push("time(s)");
            row.push(format!("{t:.2}"));
        }
        let widths: Vec<usize> = header.iter().zip(&row).map(|(h, r)| h.len().max(r.len())).collect();
        let mut out = String::new();
        for (i, h) in header.iter().enumerate() {
            let _ = write!(out, "{}{:>w$}", if i == 0 { "" } else { "  " }, h, w = widths[i]);
        }
        out.push('\n');
        for (i, r) in row.iter().enumerate() {
            let _ = write!(out, "{}{:>w$}", if i == 0 { "" } else { "  " }, r, w = widths[i]);
        }
        out.push('\n');
        if a.failures > 0 {
            let _ = writeln!(out, "{} replication(s) failed", a.failures);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fit_model;

    #[test]
    fn presets_match_design_tables() {
        let ld = SimulationDesign::preset("ld-sparse").unwrap();
        assert_eq!((ld.n, ld.p, ld.q, ld.true_size), (60, 30, 3, 5));
        let u = SimulationDesign::preset("uhd-sparse").unwrap();
        assert_eq!((u.n, u.p, u.q, u.true_size), (150, 1000, 4, 50));
        let d = SimulationDesign::preset("largeq-dense").unwrap();
        assert_eq!(d.q, 60);
        assert_eq!(d.error_cov.matrix(2), DenseMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]));
        assert_eq!(
            d.predictor_cov.matrix(2),
            DenseMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0])
        );
        for name in PRESETS {
            assert!(SimulationDesign::preset(name).is_some(), "{name}");
        }
        assert!(SimulationDesign::preset("nope").is_none());
    }

    #[test]
    fn size_cap_keeps_every_true_model() {
        assert_eq!(size_cap(150, 4, 0.95).unwrap(), 116);
        assert_eq!(size_cap(60, 3, 1.0).unwrap(), 56);
        assert!(size_cap(60, 3, 0.0).is_err());
        assert!(size_cap(60, 3, 1.5).is_err());
        for name in PRESETS {
            let d = SimulationDesign::preset(name).unwrap();
            assert!(size_cap(d.n, d.q, SIZE_EXPONENT).unwrap() >= d.true_size, "{name}");
        }
    }

    #[test]
    fn ar1_matrices_are_positive_definite() {
        for d in [1, 3, 30, 200, 1000] {
            assert!(cholesky(&AR1_X.matrix(d)).is_ok());
            assert!(cholesky(&AR1_V.matrix(d)).is_ok());
            assert!(cholesky(&NON_DECAYING.matrix(d)).is_ok());
        }
        let v = AR1_V.matrix(3);
        assert_eq!(v[(0, 2)], 0.5);
        assert_eq!(v[(1, 1)], 2.0);
    }

    #[test]
    fn coefficients_stay_in_support() {
        let mut rng = RngStream::new(1).rng();
        let mut neg = 0;
        for _ in 0..20_000 {
            let b = coefficient(&mut rng);
            assert!((0.5..=5.0).contains(&b.abs()), "{b}");
            neg += (b < 0.0) as usize;
        }
        // P(U <= -0.5) = 0.5
        assert!((neg as f64 / 20_000.0 - 0.5).abs() < 0.02);
    }

    #[test]
    fn generated_shapes_and_support() {
        let d = SimulationDesign::preset("ld-sparse").unwrap();
        let sim = generate(&d, RngStream::new(3)).unwrap();
        assert_eq!((sim.train.n(), sim.train.p(), sim.train.q()), (60, 30, 3));
        assert_eq!(sim.test.n(), 60);
        assert_eq!(sim.truth.len(), 5);
        for j in 0..30 {
            let active = sim.coef.column(j).iter().any(|v| *v != 0.0);
            assert_eq!(active, sim.truth.contains(j));
        }
        let again = generate(&d, RngStream::new(3)).unwrap();
        assert_eq!(again.train.y(), sim.train.y());
    }

    #[test]
    fn ar1_predictor_correlation() {
        let d = SimulationDesign {
            null_signal: true,
            ..SimulationDesign::ar1("t", 10_000, 5, 1, 1)
        };
        let sim = generate(&d, RngStream::new(4)).unwrap();
        let x = sim.train.x();
        let g = x * x.transpose() / 10_000.0;
        for i in 0..5 {
            for j in 0..5 {
                let corr = g[(i, j)] / (g[(i, i)] * g[(j, j)]).sqrt();
                let want = 0.5f64.powi((i as i32 - j as i32).abs());
                assert!((corr - want).abs() < 0.03, "({i},{j}) {corr}");
            }
        }
    }

    #[test]
    fn null_signal_is_pure_noise() {
        let d = SimulationDesign {
            null_signal: true,
            ..SimulationDesign::ar1("t", 20_000, 3, 3, 2)
        };
        let sim = generate(&d, RngStream::new(5)).unwrap();
        assert!(sim.coef.iter().all(|v| *v == 0.0));
        let cov = sim.train.yy() / 20_000.0;
        let v = AR1_V.matrix(3);
        assert!((cov - v).amax() < 0.1);
    }

    #[test]
    fn residual_covariance_is_consistent() {
        let d = SimulationDesign::ar1("t", 2000, 10, 3, 3);
        let sim = generate(&d, RngStream::new(6)).unwrap();
        let fitted = fit_model(&sim.train, &sim.truth).unwrap();
        let v_hat = fitted.sigma().unwrap() / (2000.0 - 3.0);
        for i in 0..3 {
            for j in 0..3 {
                let v = sim.error_cov[(i, j)];
                assert!((v_hat[(i, j)] - v).abs() <= 0.1 * v, "({i},{j})");
            }
        }
    }

    #[test]
    fn metric_examples() {
        let truth = ModelIndexSet::new(vec![0, 1, 2, 3, 4]).unwrap();
        let c = Confusion::count(&truth, &truth, 30, 3);
        assert_eq!(c.fdr(), (0.0, false));
        assert_eq!(c.fnr(), 0.0);
        assert_eq!(c.mp(), 0.0);
        let all = ModelIndexSet::new((0..30).collect()).unwrap();
        let c = Confusion::count(&all, &truth, 30, 3);
        assert_eq!((c.fp, c.tp), (75, 15));
        assert!((c.fdr().0 - 25.0 / 30.0).abs() < 1e-15);
        let none = ModelIndexSet::default();
        let c = Confusion::count(&none, &truth, 30, 3);
        assert_eq!(c.fdr(), (0.0, true));
        assert!((c.fnr() - 15.0 / 90.0).abs() < 1e-15);
    }

    #[test]
    fn median_and_mean() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&mut []).is_nan());
        assert_eq!(mean([1.0, 2.0].into_iter()), 1.5);
    }

    #[test]
    fn small_experiment_is_deterministic() {
        let d = SimulationDesign::ar1("small", 40, 8, 2, 2);
        let mut cfg = ExperimentConfig::new(d, 3, SelectionMethod::Fixed { epsilon: 0.5 }, 7);
        cfg.tuning.final_steps = 500;
        cfg.tuning.final_burn_in = 100;
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.records.len() + a.failures.len(), 3);
        assert!(a.aggregate.median_runtime_seconds.is_none());
        let t = a.table();
        assert!(t.contains("PCM") && t.contains("small"));
    }
}
