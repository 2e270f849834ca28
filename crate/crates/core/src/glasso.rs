//! Graphical lasso by block coordinate descent, the λ path, the Gaussian
//! log-likelihood and EBIC model selection (EBICglasso).
//!
//! The objective is `log det K − tr(SK) − λ Σ_{i≠j} |κ_ij|`; the diagonal
//! is not penalised, so the fitted covariance keeps `W_ii = S_ii`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Network;
use crate::matrix::{correlation, covariance, precision_to_partial, CovarianceEstimate, DataMatrix, PrecisionMatrix};

/// Entries of K with magnitude at or below this are set to exactly zero.
pub const EDGE_THRESHOLD: f64 = 1e-10;

/// Descending, log-spaced penalties from `λ_max` to `ratio·λ_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPath {
    pub values: Vec<f64>,
    pub min_max_ratio: f64,
}

impl LambdaPath {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn max_abs_off_diagonal(s: &DMatrix<f64>) -> f64 {
    let p = s.nrows();
    let mut m: f64 = 0.0;
    for i in 0..p {
        for j in (i + 1)..p {
            m = m.max(s[(i, j)].abs());
        }
    }
    m
}

pub fn lambda_path(s: &CovarianceEstimate, count: usize, ratio: f64) -> Result<LambdaPath> {
    if count < 2 {
        return Err(Error::InvalidArgument(format!("lambda path needs at least 2 values, got {count}")));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!("min/max ratio must lie in (0, 1), got {ratio}")));
    }
    let lmax = max_abs_off_diagonal(&s.matrix);
    if !(lmax > 0.0) {
        return Err(Error::InvalidData("all off-diagonal entries are zero; lambda_max = 0".into()));
    }
    let last = (count - 1) as f64;
    let values = (0..count)
        .map(|i| {
            if i + 1 == count {
                lmax * ratio
            } else {
                lmax * ratio.powf(i as f64 / last)
            }
        })
        .collect();
    Ok(LambdaPath {
        values,
        min_max_ratio: ratio,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlassoFit {
    pub precision: PrecisionMatrix,
    /// Estimated covariance, the inverse of the precision matrix.
    pub covariance: DMatrix<f64>,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl GlassoFit {
    /// Nonzero upper-triangle entries of K.
    pub fn edges(&self) -> usize {
        let k = &self.precision.matrix;
        let p = k.nrows();
        (0..p).map(|i| ((i + 1)..p).filter(|&j| k[(i, j)] != 0.0).count()).sum()
    }

    /// Largest violation of the stationarity conditions
    /// `W_ij − S_ij = λ·sign(κ_ij)` (κ_ij ≠ 0) and `|W_ij − S_ij| ≤ λ` (κ_ij = 0).
    pub fn kkt_residual(&self, s: &CovarianceEstimate) -> f64 {
        let p = s.p();
        let (w, k) = (&self.covariance, &self.precision.matrix);
        let mut worst: f64 = 0.0;
        for i in 0..p {
            for j in 0..p {
                if i == j {
                    continue;
                }
                let g = w[(i, j)] - s.matrix[(i, j)];
                let r = if k[(i, j)] != 0.0 {
                    (g - self.lambda * k[(i, j)].signum()).abs()
                } else {
                    (g.abs() - self.lambda).max(0.0)
                };
                worst = worst.max(r);
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlassoSettings {
    /// Relative change in W per sweep below which the solver stops.
    pub tol: f64,
    /// Maximum number of full sweeps over the columns.
    pub max_iter: usize,
}

impl Default for GlassoSettings {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iter: 100,
        }
    }
}

/// Solver state carried between penalties for warm starts.
#[derive(Debug, Clone)]
struct Warm {
    w: DMatrix<f64>,
    /// Column j holds the lasso coefficients of column j's block update.
    beta: DMatrix<f64>,
}

const INNER_TOL: f64 = 1e-12;
const INNER_MAX_SWEEPS: usize = 20_000;

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Coordinate descent for `min ½βᵀW₁₁β − βᵀs₁₂ + λ‖β‖₁` on the block
/// obtained by deleting row/column `j`. β is stored in column `j` of `beta`.
fn block_lasso(w: &DMatrix<f64>, s: &DMatrix<f64>, beta: &mut DMatrix<f64>, j: usize, lambda: f64) {
    let p = w.nrows();
    // wb[a] = Σ_b W_ab β_b over b ≠ j
    let mut wb = vec![0.0; p];
    for b in 0..p {
        let bb = beta[(b, j)];
        if b != j && bb != 0.0 {
            for a in 0..p {
                wb[a] += w[(a, b)] * bb;
            }
        }
    }
    let scale = (0..p).filter(|&a| a != j).map(|a| w[(a, a)]).fold(0.0, f64::max);
    for _ in 0..INNER_MAX_SWEEPS {
        let mut max_delta: f64 = 0.0;
        for a in 0..p {
            if a == j {
                continue;
            }
            let old = beta[(a, j)];
            let r = s[(a, j)] - (wb[a] - w[(a, a)] * old);
            let new = soft_threshold(r, lambda) / w[(a, a)];
            let delta = new - old;
            if delta != 0.0 {
                beta[(a, j)] = new;
                for c in 0..p {
                    wb[c] += w[(c, a)] * delta;
                }
                max_delta = max_delta.max(delta.abs() * w[(a, a)]);
            }
        }
        if max_delta <= INNER_TOL * scale {
            break;
        }
    }
}

fn solve(s: &CovarianceEstimate, lambda: f64, settings: GlassoSettings, warm: Option<&Warm>) -> Result<(GlassoFit, Warm)> {
    let p = s.p();
    let sm = &s.matrix;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be a finite value >= 0, got {lambda}")));
    }
    if (0..p).any(|i| !(sm[(i, i)] > 0.0)) {
        return Err(Error::InvalidData("covariance diagonal must be positive".into()));
    }
    if lambda == 0.0 && sm.clone().cholesky().is_none() {
        return Err(Error::Singular("covariance is not invertible; lambda = 0 has no solution".into()));
    }

    let (mut w, mut beta) = match warm {
        Some(state) => (state.w.clone(), state.beta.clone()),
        None => (sm.clone(), DMatrix::zeros(p, p)),
    };
    for i in 0..p {
        w[(i, i)] = sm[(i, i)];
    }

    let mut off_mean = 0.0;
    for i in 0..p {
        for j in 0..p {
            if i != j {
                off_mean += sm[(i, j)].abs();
            }
        }
    }
    off_mean /= (p * p.saturating_sub(1)).max(1) as f64;
    let denom = if off_mean > 0.0 { off_mean } else { 1.0 };

    let mut converged = p == 1;
    let mut iterations = 0;
    while !converged && iterations < settings.max_iter {
        iterations += 1;
        let mut change = 0.0;
        for j in 0..p {
            block_lasso(&w, sm, &mut beta, j, lambda);
            for a in 0..p {
                if a == j {
                    continue;
                }
                let mut v = 0.0;
                for b in 0..p {
                    if b != j {
                        v += w[(a, b)] * beta[(b, j)];
                    }
                }
                change += (v - w[(a, j)]).abs();
                w[(a, j)] = v;
                w[(j, a)] = v;
            }
        }
        change /= (p * (p - 1)) as f64;
        converged = change / denom < settings.tol;
    }

    let mut k = DMatrix::zeros(p, p);
    for j in 0..p {
        let mut q = 0.0;
        for a in 0..p {
            if a != j {
                q += w[(a, j)] * beta[(a, j)];
            }
        }
        let kjj = 1.0 / (w[(j, j)] - q);
        k[(j, j)] = kjj;
        for a in 0..p {
            if a != j {
                k[(a, j)] = -beta[(a, j)] * kjj;
            }
        }
    }
    for i in 0..p {
        for j in (i + 1)..p {
            let mut v = 0.5 * (k[(i, j)] + k[(j, i)]);
            if v.abs() <= EDGE_THRESHOLD {
                v = 0.0;
            }
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }

    let fit = GlassoFit {
        precision: PrecisionMatrix { matrix: k, lambda },
        covariance: w.clone(),
        lambda,
        iterations,
        converged,
    };
    Ok((fit, Warm { w, beta }))
}

/// Fit the graphical lasso at a single penalty from a cold start.
pub fn glasso_fit(s: &CovarianceEstimate, lambda: f64, tol: f64, max_iter: usize) -> Result<GlassoFit> {
    solve(s, lambda, GlassoSettings { tol, max_iter }, None).map(|(fit, _)| fit)
}

/// Fit every penalty on the path, warm-starting each from the previous one.
pub fn glasso_path(s: &CovarianceEstimate, path: &LambdaPath, settings: GlassoSettings) -> Result<Vec<GlassoFit>> {
    let mut warm: Option<Warm> = None;
    let mut fits = Vec::with_capacity(path.len());
    for &lambda in &path.values {
        let (fit, state) = solve(s, lambda, settings, warm.as_ref())?;
        warm = Some(state);
        fits.push(fit);
    }
    Ok(fits)
}

/// `(n/2)(log det K − tr(SK))`; constants that do not depend on K are dropped.
pub fn gaussian_loglik(k: &PrecisionMatrix, s: &CovarianceEstimate, n: usize) -> Result<f64> {
    let chol = k
        .matrix
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("precision matrix has no Cholesky factor".into()))?;
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let trace: f64 = (0..s.p())
        .map(|i| (0..s.p()).map(|j| s.matrix[(i, j)] * k.matrix[(j, i)]).sum::<f64>())
        .sum();
    Ok(0.5 * n as f64 * (logdet - trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EbicScore {
    pub value: f64,
    pub loglik: f64,
    pub edges: usize,
    pub n: usize,
    pub p: usize,
    pub gamma: f64,
}

impl EbicScore {
    pub fn new(loglik: f64, edges: usize, n: usize, p: usize, gamma: f64) -> Self {
        Self {
            value: Self::formula(loglik, edges, n, p, gamma),
            loglik,
            edges,
            n,
            p,
            gamma,
        }
    }

    /// −2L + E·ln N + 4γE·ln P
    pub fn formula(loglik: f64, edges: usize, n: usize, p: usize, gamma: f64) -> f64 {
        let e = edges as f64;
        -2.0 * loglik + e * (n as f64).ln() + 4.0 * gamma * e * (p as f64).ln()
    }

    pub fn recompute(&self) -> f64 {
        Self::formula(self.loglik, self.edges, self.n, self.p, self.gamma)
    }
}

pub fn ebic(fit: &GlassoFit, s: &CovarianceEstimate, n: usize, gamma: f64) -> Result<EbicScore> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be >= 0, got {gamma}")));
    }
    let loglik = gaussian_loglik(&fit.precision, s, n)?;
    Ok(EbicScore::new(loglik, fit.edges(), n, s.p(), gamma))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EbicGlassoSettings {
    pub gamma: f64,
    pub lambda_count: usize,
    pub min_max_ratio: f64,
    pub glasso: GlassoSettings,
    /// Use the correlation matrix (default) rather than the raw covariance.
    pub use_correlation: bool,
}

impl Default for EbicGlassoSettings {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            lambda_count: 100,
            min_max_ratio: 0.01,
            glasso: GlassoSettings::default(),
            use_correlation: true,
        }
    }
}

/// One path point, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub lambda: f64,
    pub edges: usize,
    pub loglik: Option<f64>,
    pub ebic: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct EbicGlassoResult {
    pub network: Network,
    pub precision: PrecisionMatrix,
    pub selected: usize,
    pub score: EbicScore,
    pub path: Vec<PathRecord>,
}

impl EbicGlassoResult {
    pub fn path_json(&self) -> serde_json::Value {
        serde_json::json!({
            "selected": self.selected,
            "lambda": self.path[self.selected].lambda,
            "path": self.path,
        })
    }
}

/// Estimate a partial-correlation network by fitting GLASSO along the λ
/// path and keeping the fit with the smallest EBIC (first one on ties).
pub fn ebicglasso(x: &DataMatrix, settings: &EbicGlassoSettings) -> Result<EbicGlassoResult> {
    let s = if settings.use_correlation {
        correlation(x)?
    } else {
        covariance(x)?
    };
    ebicglasso_from_covariance(&s, x.column_names().to_vec(), settings)
}

pub fn ebicglasso_from_covariance(
    s: &CovarianceEstimate,
    names: Vec<String>,
    settings: &EbicGlassoSettings,
) -> Result<EbicGlassoResult> {
    let p = s.p();
    if names.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: names.len(),
        });
    }
    // With no off-diagonal signal the only model is the empty network.
    if !(max_abs_off_diagonal(&s.matrix) > 0.0) {
        let k = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 / s.matrix[(i, i)] } else { 0.0 });
        let precision = PrecisionMatrix { matrix: k, lambda: 0.0 };
        let score = EbicScore::new(gaussian_loglik(&precision, s, s.n)?, 0, s.n, p, settings.gamma);
        let network = precision_to_partial(&precision)?.with_names(names)?;
        return Ok(EbicGlassoResult {
            network,
            precision,
            selected: 0,
            score,
            path: vec![PathRecord {
                lambda: 0.0,
                edges: 0,
                loglik: Some(score.loglik),
                ebic: Some(score.value),
                converged: true,
            }],
        });
    }

    let path = lambda_path(s, settings.lambda_count, settings.min_max_ratio)?;
    let fits = glasso_path(s, &path, settings.glasso)?;
    let mut records = Vec::with_capacity(fits.len());
    let mut best: Option<(usize, EbicScore)> = None;
    for (idx, fit) in fits.iter().enumerate() {
        let score = if fit.converged {
            ebic(fit, s, s.n, settings.gamma).ok()
        } else {
            None
        };
        records.push(PathRecord {
            lambda: fit.lambda,
            edges: fit.edges(),
            loglik: score.map(|sc| sc.loglik),
            ebic: score.map(|sc| sc.value),
            converged: fit.converged,
        });
        if let Some(sc) = score {
            if best.is_none_or(|(_, b)| sc.value < b.value) {
                best = Some((idx, sc));
            }
        }
    }
    let (selected, score) =
        best.ok_or_else(|| Error::NonConvergence("no GLASSO fit on the lambda path converged".into()))?;
    let precision = fits[selected].precision.clone();
    let network = precision_to_partial(&precision)?.with_names(names)?;
    Ok(EbicGlassoResult {
        network,
        precision,
        selected,
        score,
        path: records,
    })
}
