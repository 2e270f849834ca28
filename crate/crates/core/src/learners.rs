//! LASSO regression and L2-penalised multinomial logistic regression, with
//! a stratified k-fold grid search over the penalty.
//!
//! The fitting functions expect standardised features. [`fit_learner`] wraps
//! them with a scaler fitted on the training rows.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::{accuracy, kfold_split, rmse};
use crate::error::{Error, Result};
use crate::matrix::mean;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Lasso,
    #[default]
    Logit,
}

impl LearnerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerKind::Lasso => "lasso",
            LearnerKind::Logit => "logit",
        }
    }

    pub fn default_grid(&self) -> Vec<f64> {
        match self {
            LearnerKind::Logit => vec![0.001, 0.01, 0.1, 1.0, 10.0],
            // Data-dependent; see `lasso_grid`.
            LearnerKind::Lasso => Vec::new(),
        }
    }
}

/// Response vector: real values for regression, class indices otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Real(Vec<f64>),
    Classes { labels: Vec<usize>, names: Vec<String> },
}

impl Response {
    pub fn len(&self) -> usize {
        match self {
            Response::Real(v) => v.len(),
            Response::Classes { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        match self {
            Response::Real(v) => Response::Real(rows.iter().map(|&i| v[i]).collect()),
            Response::Classes { labels, names } => Response::Classes {
                labels: rows.iter().map(|&i| labels[i]).collect(),
                names: names.clone(),
            },
        }
    }

    pub fn strata(&self) -> Option<&[usize]> {
        match self {
            Response::Real(_) => None,
            Response::Classes { labels, .. } => Some(labels),
        }
    }

    pub fn metric_name(&self) -> &'static str {
        match self {
            Response::Real(_) => "rmse",
            Response::Classes { .. } => "acc",
        }
    }

    /// Whether `a` is a strictly better metric value than `b`.
    pub fn better(&self, a: f64, b: f64) -> bool {
        match self {
            Response::Real(_) => a < b,
            Response::Classes { .. } => a > b,
        }
    }
}

/// A fitted linear predictor. LASSO has one output row; logistic has one
/// row per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: LearnerKind,
    /// Output × feature coefficients.
    pub coefficients: Vec<Vec<f64>>,
    pub intercept: Vec<f64>,
    pub penalty: f64,
    pub classes: Option<Vec<String>>,
    pub converged: bool,
    pub iterations: usize,
}

impl LinearModel {
    fn linear(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let p = self.coefficients.first().map_or(0, Vec::len);
        if x.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: x.ncols(),
            });
        }
        let k = self.coefficients.len();
        let b = DMatrix::from_fn(p, k, |j, c| self.coefficients[c][j]);
        let mut eta = x * b;
        for c in 0..k {
            eta.column_mut(c).add_scalar_mut(self.intercept[c]);
        }
        Ok(eta)
    }

    /// LASSO fitted values.
    pub fn predict_real(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(self.linear(x)?.column(0).iter().copied().collect())
    }

    /// Row-wise softmax class probabilities.
    pub fn predict_proba(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut eta = self.linear(x)?;
        for mut row in eta.row_iter_mut() {
            let m = row.max();
            row.apply(|v| *v = (*v - m).exp());
            let s = row.sum();
            row /= s;
        }
        Ok(eta)
    }

    /// Most probable class per row; ties go to the lower class index.
    pub fn predict_class(&self, x: &DMatrix<f64>) -> Result<Vec<usize>> {
        let eta = self.linear(x)?;
        Ok(eta
            .row_iter()
            .map(|r| {
                let mut best = 0;
                for c in 1..r.len() {
                    if r[c] > r[best] {
                        best = c;
                    }
                }
                best
            })
            .collect())
    }
}

/// Penalty at which every LASSO coefficient is zero: max_j |x_jᵀ(y − ȳ)| / n
/// over centred columns.
pub fn lambda_kill(x: &DMatrix<f64>, y: &[f64]) -> f64 {
    let n = x.nrows() as f64;
    let ym = mean(y);
    (0..x.ncols())
        .map(|j| {
            let col = x.column(j);
            let xm = col.mean();
            col.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum::<f64>().abs() / n
        })
        .fold(0.0, f64::max)
}

/// 20 log-spaced penalties from `lambda_kill` down to 0.001·`lambda_kill`.
pub fn lasso_grid(x: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let top = lambda_kill(x, y);
    if top <= 0.0 {
        return vec![0.0];
    }
    let count = 20;
    (0..count)
        .map(|i| top * 0.001f64.powf(i as f64 / (count - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoSettings {
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoSettings {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_sweeps: 100_000,
        }
    }
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

pub fn lasso_fit(x: &DMatrix<f64>, y: &[f64], penalty: f64) -> Result<LinearModel> {
    lasso_fit_with(x, y, penalty, LassoSettings::default())
}

/// Cyclic coordinate descent on ½·mean((y − b − Xβ)²) + penalty·‖β‖₁.
pub fn lasso_fit_with(x: &DMatrix<f64>, y: &[f64], penalty: f64, settings: LassoSettings) -> Result<LinearModel> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.len() });
    }
    if n == 0 {
        return Err(Error::InvalidData("no rows".into()));
    }
    if !(penalty >= 0.0) {
        return Err(Error::InvalidArgument(format!("penalty {penalty} must be ≥ 0")));
    }
    let nf = n as f64;
    let means: Vec<f64> = (0..p).map(|j| x.column(j).mean()).collect();
    let xc = DMatrix::from_fn(n, p, |i, j| x[(i, j)] - means[j]);
    let ym = mean(y);
    let mut r: Vec<f64> = y.iter().map(|v| v - ym).collect();
    let norms: Vec<f64> = (0..p).map(|j| xc.column(j).norm_squared() / nf).collect();
    let mut beta = vec![0.0; p];
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < settings.max_sweeps {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            if norms[j] == 0.0 {
                continue;
            }
            let col = xc.column(j);
            let rho = col.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / nf + norms[j] * beta[j];
            let next = soft_threshold(rho, penalty) / norms[j];
            let delta = next - beta[j];
            if delta != 0.0 {
                for (ri, a) in r.iter_mut().zip(col.iter()) {
                    *ri -= delta * a;
                }
                beta[j] = next;
                max_change = max_change.max(delta.abs() * norms[j].sqrt());
            }
        }
        if max_change < settings.tol {
            converged = true;
            break;
        }
    }
    let intercept = ym - beta.iter().zip(&means).map(|(b, m)| b * m).sum::<f64>();
    Ok(LinearModel {
        kind: LearnerKind::Lasso,
        coefficients: vec![beta],
        intercept: vec![intercept],
        penalty,
        classes: None,
        converged,
        iterations: sweeps,
    })
}

/// Mean multinomial negative log-likelihood plus (penalty/2)·‖B‖², and its
/// gradient.
///
/// `params` holds the p×C coefficient matrix column by column (one column
/// per class) followed by the C intercepts, which are not penalised.
pub fn logistic_objective(
    x: &DMatrix<f64>,
    y: &[usize],
    classes: usize,
    penalty: f64,
    params: &[f64],
) -> (f64, Vec<f64>) {
    let (n, p) = x.shape();
    let b = DMatrix::from_column_slice(p, classes, &params[..p * classes]);
    let icpt = &params[p * classes..];
    let mut eta = x * &b;
    let mut loss = 0.0;
    for i in 0..n {
        let mut row = eta.row_mut(i);
        for c in 0..classes {
            row[c] += icpt[c];
        }
        let m = row.max();
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - row[y[i]];
        // Residual P − Y in place.
        row.apply(|v| *v = (*v - lse).exp());
        row[y[i]] -= 1.0;
    }
    let nf = n as f64;
    let mut grad_b = x.transpose() * &eta / nf;
    grad_b += &b * penalty;
    let value = loss / nf + 0.5 * penalty * b.norm_squared();
    let mut grad = grad_b.as_slice().to_vec();
    grad.extend((0..classes).map(|c| eta.column(c).sum() / nf));
    (value, grad)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticSettings {
    /// Stop when the Euclidean gradient norm falls below this.
    pub grad_tol: f64,
    pub max_iter: usize,
    pub memory: usize,
}

impl Default for LogisticSettings {
    fn default() -> Self {
        Self {
            grad_tol: 1e-6,
            max_iter: 5000,
            memory: 10,
        }
    }
}

pub fn logistic_fit(x: &DMatrix<f64>, y: &[usize], penalty: f64) -> Result<LinearModel> {
    logistic_fit_with(x, y, penalty, None, LogisticSettings::default())
}

/// L-BFGS with Armijo backtracking on [`logistic_objective`]. The class
/// count is `max(y) + 1` unless `class_names` is given.
pub fn logistic_fit_with(
    x: &DMatrix<f64>,
    y: &[usize],
    penalty: f64,
    class_names: Option<&[String]>,
    settings: LogisticSettings,
) -> Result<LinearModel> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.len() });
    }
    if !(penalty >= 0.0) {
        return Err(Error::InvalidArgument(format!("penalty {penalty} must be ≥ 0")));
    }
    let classes = match class_names {
        Some(names) => names.len(),
        None => y.iter().max().map_or(0, |m| m + 1),
    };
    if let Some(&bad) = y.iter().find(|&&c| c >= classes) {
        return Err(Error::InvalidData(format!("label {bad} outside {classes} classes")));
    }
    let mut present = vec![false; classes];
    y.iter().for_each(|&c| present[c] = true);
    if present.iter().filter(|&&b| b).count() < 2 {
        return Err(Error::InvalidData("logistic regression needs at least two classes".into()));
    }

    let dim = (p + 1) * classes;
    let f = |w: &[f64]| logistic_objective(x, y, classes, penalty, w);
    let mut w = vec![0.0; dim];
    let (mut fx, mut g) = f(&w);
    let mut s_hist: Vec<DVector<f64>> = Vec::new();
    let mut y_hist: Vec<DVector<f64>> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < settings.max_iter {
        let gv = DVector::from_column_slice(&g);
        if gv.norm() < settings.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        // Two-loop recursion.
        let mut q = gv.clone();
        let mut alphas = Vec::with_capacity(s_hist.len());
        for (s, yv) in s_hist.iter().zip(&y_hist).rev() {
            let a = s.dot(&q) / yv.dot(s);
            q -= yv * a;
            alphas.push(a);
        }
        if let (Some(s), Some(yv)) = (s_hist.last(), y_hist.last()) {
            q *= s.dot(yv) / yv.dot(yv);
        }
        for ((s, yv), a) in s_hist.iter().zip(&y_hist).zip(alphas.into_iter().rev()) {
            let b = yv.dot(&q) / yv.dot(s);
            q += s * (a - b);
        }
        let mut dir = -q;
        let mut slope = dir.dot(&gv);
        if !(slope < 0.0) {
            dir = -gv.clone();
            slope = -gv.norm_squared();
            s_hist.clear();
            y_hist.clear();
        }
        let mut step = 1.0;
        let (next_w, next_f, next_g) = loop {
            let cand: Vec<f64> = w.iter().zip(dir.iter()).map(|(a, d)| a + step * d).collect();
            let (fc, gc) = f(&cand);
            if fc <= fx + 1e-4 * step * slope {
                break (cand, fc, gc);
            }
            step *= 0.5;
            if step < 1e-20 {
                break (w.clone(), fx, g.clone());
            }
        };
        if next_w == w {
            // No decrease possible at working precision.
            converged = gv.norm() < settings.grad_tol;
            break;
        }
        let s = DVector::from_iterator(dim, next_w.iter().zip(&w).map(|(a, b)| a - b));
        let yv = DVector::from_iterator(dim, next_g.iter().zip(&g).map(|(a, b)| a - b));
        if s.dot(&yv) > 1e-12 * yv.norm_squared() {
            s_hist.push(s);
            y_hist.push(yv);
            if s_hist.len() > settings.memory {
                s_hist.remove(0);
                y_hist.remove(0);
            }
        }
        w = next_w;
        fx = next_f;
        g = next_g;
    }
    if !converged {
        converged = DVector::from_column_slice(&g).norm() < settings.grad_tol;
    }
    let coefficients = (0..classes).map(|c| w[c * p..(c + 1) * p].to_vec()).collect();
    Ok(LinearModel {
        kind: LearnerKind::Logit,
        coefficients,
        intercept: w[p * classes..].to_vec(),
        penalty,
        classes: Some(match class_names {
            Some(names) => names.to_vec(),
            None => (0..classes).map(|c| c.to_string()).collect(),
        }),
        converged,
        iterations,
    })
}

/// Per-column centring and scaling learned on training rows. Constant
/// columns keep scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let means: Vec<f64> = (0..x.ncols()).map(|j| x.column(j).mean()).collect();
        let scales = (0..x.ncols())
            .map(|j| {
                let m = means[j];
                let ss: f64 = x.column(j).iter().map(|v| (v - m) * (v - m)).sum();
                let sd = if n > 1.0 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { means, scales }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - self.means[j]) / self.scales[j])
    }
}

/// A learner together with the scaler it was trained behind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedLearner {
    pub scaler: FeatureScaler,
    pub model: LinearModel,
}

impl FittedLearner {
    /// Metric of this learner on (`x`, `y`): RMSE or accuracy.
    pub fn score(&self, x: &DMatrix<f64>, y: &Response) -> Result<f64> {
        let z = self.scaler.apply(x);
        match y {
            Response::Real(v) => rmse(v, &self.model.predict_real(&z)?),
            Response::Classes { labels, .. } => accuracy(labels, &self.model.predict_class(&z)?),
        }
    }
}

pub fn fit_learner(kind: LearnerKind, x: &DMatrix<f64>, y: &Response, penalty: f64) -> Result<FittedLearner> {
    let scaler = FeatureScaler::fit(x);
    let z = scaler.apply(x);
    let model = match (kind, y) {
        (LearnerKind::Lasso, Response::Real(v)) => lasso_fit(&z, v, penalty)?,
        (LearnerKind::Logit, Response::Classes { labels, names }) => {
            logistic_fit_with(&z, labels, penalty, Some(names), LogisticSettings::default())?
        }
        (k, _) => {
            return Err(Error::Config(format!(
                "learner `{}` does not match a {} response",
                k.name(),
                if y.strata().is_some() { "categorical" } else { "real" }
            )))
        }
    };
    Ok(FittedLearner { scaler, model })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best_penalty: f64,
    pub grid: Vec<f64>,
    /// `cv_scores[g][f]`: metric of grid point g on fold f.
    pub cv_scores: Vec<Vec<f64>>,
    pub mean_scores: Vec<f64>,
    /// "rmse" (minimised) or "acc" (maximised).
    pub metric: String,
}

/// Mean k-fold metric of `kind` at `penalty`, using the given folds.
pub fn cv_score(kind: LearnerKind, x: &DMatrix<f64>, y: &Response, penalty: f64, folds: &[Vec<usize>]) -> Result<Vec<f64>> {
    let n = x.nrows();
    folds
        .iter()
        .map(|test| {
            let mut in_test = vec![false; n];
            test.iter().for_each(|&i| in_test[i] = true);
            let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
            let fitted = fit_learner(kind, &x.select_rows(&train), &y.select(&train), penalty)?;
            fitted.score(&x.select_rows(test), &y.select(test))
        })
        .collect()
}

/// Stratified (for classes) k-fold search; ties go to the smallest penalty.
pub fn grid_search(
    x: &DMatrix<f64>,
    y: &Response,
    kind: LearnerKind,
    grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty penalty grid".into()));
    }
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {folds}")));
    }
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: y.len(),
        });
    }
    let split = kfold_split(x.nrows(), folds, crate::seed::derive_seed(seed, "grid_search"), y.strata())?;
    let cv_scores = grid
        .par_iter()
        .map(|&pen| cv_score(kind, x, y, pen, &split))
        .collect::<Result<Vec<_>>>()?;
    let mean_scores: Vec<f64> = cv_scores.iter().map(|s| mean(s)).collect();
    let mut best = 0;
    for g in 1..grid.len() {
        let (a, b) = (mean_scores[g], mean_scores[best]);
        if y.better(a, b) || (a == b && grid[g] < grid[best]) {
            best = g;
        }
    }
    Ok(GridSearchResult {
        best_penalty: grid[best],
        grid: grid.to_vec(),
        cv_scores,
        mean_scores,
        metric: y.metric_name().to_string(),
    })
}
