//! Multivariate (row-group) LASSO used to build sparse proposal weights.
//!
//! Minimizes `(1/2n)‖Yc − B Xs‖²_F + λ Σ_j ‖B_j‖₂` where `Xs` has centered,
//! unit-variance rows and `Yc` centered rows, by block coordinate descent
//! along a decreasing λ path with warm starts. λ is chosen by K-fold
//! cross-validation on interleaved folds.

use crate::error::{EasError, Result};
use crate::matstat::{dot, DenseMatrix};
use crate::model::Dataset;

const PATH_LEN: usize = 100;
const TOL: f64 = 1e-8;
const MAX_SWEEPS: usize = 10_000;

/// Centered and scaled copy of a dataset's predictors and responses.
struct Standardized {
    x: DenseMatrix,
    y: DenseMatrix,
    x_mean: Vec<f64>,
    x_scale: Vec<f64>,
    y_mean: Vec<f64>,
}

fn row_means(m: &DenseMatrix) -> Vec<f64> {
    let n = m.ncols() as f64;
    m.row_iter().map(|r| r.sum() / n).collect()
}

fn standardize(x: &DenseMatrix, y: &DenseMatrix) -> Standardized {
    let n = x.ncols() as f64;
    let x_mean = row_means(x);
    let y_mean = row_means(y);
    let mut xs = x.clone();
    let mut x_scale = vec![0.0; x.nrows()];
    for (j, mut row) in xs.row_iter_mut().enumerate() {
        row.add_scalar_mut(-x_mean[j]);
        let sd = (row.norm_squared() / n).sqrt();
        x_scale[j] = sd;
        if sd > 0.0 {
            row /= sd;
        }
    }
    let mut ys = y.clone();
    for (k, mut row) in ys.row_iter_mut().enumerate() {
        row.add_scalar_mut(-y_mean[k]);
    }
    Standardized {
        x: xs.transpose(),
        y: ys.transpose(),
        x_mean,
        x_scale,
        y_mean,
    }
}

/// Row-group LASSO solver on standardized data. `x` (`n × p`) and `y`
/// (`n × q`) are stored observation-major so that every predictor and
/// response is a contiguous column.
struct Solver<'a> {
    std: &'a Standardized,
    /// `q × p` coefficients on the standardized scale.
    coef: DenseMatrix,
    /// `n × q` residual `(Yc − B Xs)ᵀ`.
    resid: DenseMatrix,
}

impl<'a> Solver<'a> {
    fn new(std: &'a Standardized) -> Self {
        Solver {
            std,
            coef: DenseMatrix::zeros(std.y.ncols(), std.x.ncols()),
            resid: std.y.clone(),
        }
    }

    fn n(&self) -> f64 {
        self.std.x.nrows() as f64
    }

    /// `(1/n) R x_j` for every response.
    fn partial(&self, j: usize) -> Vec<f64> {
        let xj = self.std.x.column(j);
        let xj = xj.as_slice();
        let n = self.n();
        self.resid.column_iter().map(|r| dot(r.as_slice(), xj) / n).collect()
    }

    /// Update group `j`; returns the squared change of its coefficients.
    fn update(&mut self, j: usize, lambda: f64) -> f64 {
        if self.std.x_scale[j] == 0.0 {
            return 0.0;
        }
        let grad = self.partial(j);
        let old: Vec<f64> = self.coef.column(j).iter().copied().collect();
        let z: Vec<f64> = grad.iter().zip(&old).map(|(g, b)| g + b).collect();
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let shrink = if norm > lambda { 1.0 - lambda / norm } else { 0.0 };
        let mut change = 0.0;
        let xj = self.std.x.column(j);
        for k in 0..z.len() {
            let new = shrink * z[k];
            let delta = new - old[k];
            if delta != 0.0 {
                change += delta * delta;
                self.coef[(k, j)] = new;
                self.resid.column_mut(k).axpy(-delta, &xj, 1.0);
            }
        }
        change
    }

    fn active(&self) -> Vec<usize> {
        (0..self.coef.ncols())
            .filter(|&j| self.coef.column(j).iter().any(|v| *v != 0.0))
            .collect()
    }

    /// Solve at `lambda` from the current coefficients.
    fn solve(&mut self, lambda: f64, scale: f64) {
        let p = self.coef.ncols();
        for _ in 0..MAX_SWEEPS {
            let mut worst = 0.0f64;
            for j in 0..p {
                worst = worst.max(self.update(j, lambda));
            }
            if worst <= TOL * scale {
                return;
            }
            let active = self.active();
            for _ in 0..MAX_SWEEPS {
                let mut worst = 0.0f64;
                for &j in &active {
                    worst = worst.max(self.update(j, lambda));
                }
                if worst <= TOL * scale {
                    break;
                }
            }
        }
    }
}

fn lambda_max(std: &Standardized) -> f64 {
    let n = std.x.nrows() as f64;
    let cross = std.x.tr_mul(&std.y) / n;
    cross.row_iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn path(std: &Standardized) -> Vec<f64> {
    let (n, p) = std.x.shape();
    let top = lambda_max(std);
    let ratio: f64 = if n < p { 0.01 } else { 1e-4 };
    (0..PATH_LEN)
        .map(|i| top * ratio.powf(i as f64 / (PATH_LEN - 1) as f64))
        .collect()
}

/// Response variance scale used for convergence checks.
fn scale(std: &Standardized) -> f64 {
    let n = std.y.nrows() as f64;
    (std.y.norm_squared() / n).max(f64::MIN_POSITIVE)
}

/// Squared prediction error of standardized-scale `coef` fitted on `train` against held-out columns.
fn validation_error(train: &Standardized, coef: &DenseMatrix, x: &DenseMatrix, y: &DenseMatrix) -> f64 {
    let mut err = 0.0;
    for i in 0..x.ncols() {
        for k in 0..y.nrows() {
            let mut pred = train.y_mean[k];
            for j in 0..x.nrows() {
                let b = coef[(k, j)];
                if b != 0.0 {
                    pred += b * (x[(j, i)] - train.x_mean[j]) / train.x_scale[j];
                }
            }
            let d = y[(k, i)] - pred;
            err += d * d;
        }
    }
    err
}

/// Group-LASSO coefficients (`q × p`, standardized scale) at the λ minimizing
/// `folds`-fold cross-validated prediction error.
pub fn cv_group_lasso(data: &Dataset, folds: usize) -> Result<DenseMatrix> {
    let n = data.n();
    if folds < 2 || folds > n {
        return Err(EasError::Config(format!("lasso needs 2 <= folds <= n, got {folds}")));
    }
    let full = standardize(data.x(), data.y());
    let lambdas = path(&full);
    let mut cv_err = vec![0.0; lambdas.len()];
    for f in 0..folds {
        let train: Vec<usize> = (0..n).filter(|i| i % folds != f).collect();
        let test: Vec<usize> = (0..n).filter(|i| i % folds == f).collect();
        let xt = data.x().select_columns(&train);
        let yt = data.y().select_columns(&train);
        let std = standardize(&xt, &yt);
        let sc = scale(&std);
        let xv = data.x().select_columns(&test);
        let yv = data.y().select_columns(&test);
        let mut solver = Solver::new(&std);
        for (l, &lambda) in lambdas.iter().enumerate() {
            solver.solve(lambda, sc);
            cv_err[l] += validation_error(&std, &solver.coef, &xv, &yv);
        }
    }
    let best = cv_err
        .iter()
        .enumerate()
        .fold(0, |b, (i, e)| if *e < cv_err[b] { i } else { b });
    let sc = scale(&full);
    let mut solver = Solver::new(&full);
    for &lambda in &lambdas[..=best] {
        solver.solve(lambda, sc);
    }
    Ok(solver.coef)
}

/// Proposal weights `‖B_j‖₂` from the cross-validated group LASSO.
pub fn lasso_weights(data: &Dataset, folds: usize) -> Result<Vec<f64>> {
    let coef = cv_group_lasso(data, folds)?;
    Ok(coef.column_iter().map(|c| c.norm()).collect())
}
