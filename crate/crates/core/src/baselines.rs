//! PCA and FastICA reduction baselines.
//!
//! Both work on standardised data. The number of retained components comes
//! from a [`ComponentRule`] applied to the correlation spectrum; ICA reuses
//! the count PCA's rule picks.

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{correlation, ColumnScaling, DataMatrix};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum ComponentRule {
    /// Smallest k whose cumulative explained variance reaches the fraction.
    CumulativeVariance(f64),
    /// Acceleration-factor elbow: keep the components before the point of
    /// largest second difference in the scree.
    Elbow,
    Fixed(usize),
}

impl Default for ComponentRule {
    fn default() -> Self {
        ComponentRule::CumulativeVariance(0.80)
    }
}

impl ComponentRule {
    /// Apply to a descending eigenvalue spectrum.
    pub fn select(&self, eigenvalues: &[f64]) -> Result<usize> {
        let p = eigenvalues.len();
        match *self {
            ComponentRule::Fixed(k) => {
                if k == 0 || k > p {
                    return Err(Error::InvalidArgument(format!("k = {k} must lie in 1..={p}")));
                }
                Ok(k)
            }
            ComponentRule::CumulativeVariance(frac) => {
                if !(frac > 0.0 && frac <= 1.0) {
                    return Err(Error::InvalidArgument(format!("variance fraction {frac} not in (0, 1]")));
                }
                let total: f64 = eigenvalues.iter().sum();
                let mut acc = 0.0;
                for (i, ev) in eigenvalues.iter().enumerate() {
                    acc += ev;
                    if acc / total >= frac - 1e-12 {
                        return Ok(i + 1);
                    }
                }
                Ok(p)
            }
            ComponentRule::Elbow => {
                if p < 3 {
                    return Ok(1);
                }
                let mut best = 1;
                let mut best_af = f64::NEG_INFINITY;
                for i in 1..(p - 1) {
                    let af = eigenvalues[i + 1] - 2.0 * eigenvalues[i] + eigenvalues[i - 1];
                    if af > best_af {
                        best_af = af;
                        best = i;
                    }
                }
                Ok(best.max(1))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    /// p×k orthonormal loadings.
    pub components: DMatrix<f64>,
    /// Variances of the retained components, descending.
    pub eigenvalues: Vec<f64>,
    /// The whole spectrum, for explained-variance reporting.
    pub spectrum: Vec<f64>,
    pub k: usize,
    pub scaling: ColumnScaling,
}

impl PcaModel {
    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        let total: f64 = self.spectrum.iter().sum();
        self.eigenvalues.iter().map(|e| e / total).collect()
    }

    pub fn to_json(&self, names: &[String]) -> serde_json::Value {
        let loadings: Vec<serde_json::Value> = (0..self.k)
            .map(|c| {
                let mut m = serde_json::Map::new();
                for (i, name) in names.iter().enumerate() {
                    m.insert(name.clone(), self.components[(i, c)].into());
                }
                serde_json::Value::Object(m)
            })
            .collect();
        serde_json::json!({
            "method": "pca",
            "k": self.k,
            "eigenvalues": self.eigenvalues,
            "explained_variance_ratio": self.explained_variance_ratio(),
            "loadings": loadings,
        })
    }
}

/// Eigenpairs of a symmetric matrix, descending, each vector's largest
/// entry made positive.
fn sorted_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let p = m.nrows();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let mut vectors = DMatrix::zeros(p, p);
    for (c, &i) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(i);
        let pivot = (0..p).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a))).unwrap_or(0);
        let s = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..p {
            vectors[(r, c)] = s * v[r];
        }
    }
    (values, vectors)
}

pub fn pca_fit_with(x: &DataMatrix, rule: ComponentRule) -> Result<PcaModel> {
    let scaling = ColumnScaling::fit(x)?;
    let r = correlation(x)?;
    let (spectrum, vectors) = sorted_eigen(&r.matrix);
    let k = rule.select(&spectrum)?;
    Ok(PcaModel {
        components: vectors.columns(0, k).into_owned(),
        eigenvalues: spectrum[..k].to_vec(),
        spectrum,
        k,
        scaling,
    })
}

/// PCA on the correlation matrix; `k` fixed when given, else the default
/// cumulative-variance rule.
pub fn pca_fit(x: &DataMatrix, k: Option<usize>) -> Result<PcaModel> {
    let rule = k.map_or_else(ComponentRule::default, ComponentRule::Fixed);
    pca_fit_with(x, rule)
}

pub fn pca_transform(model: &PcaModel, x: &DataMatrix) -> Result<DataMatrix> {
    let z = model.scaling.apply(x)?;
    DataMatrix::with_prefix(z.values() * &model.components, "pca_")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcaModel {
    /// k×p: sources = standardised X · unmixingᵀ.
    pub unmixing: DMatrix<f64>,
    /// p×k: whitened = standardised X · whitening.
    pub whitening: DMatrix<f64>,
    /// k×k orthogonal rotation found by FastICA in whitened space.
    pub rotation: DMatrix<f64>,
    pub k: usize,
    pub seed: u64,
    pub converged: bool,
    pub iterations: usize,
    pub scaling: ColumnScaling,
}

impl IcaModel {
    pub fn to_json(&self, names: &[String]) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = (0..self.k)
            .map(|c| {
                let mut m = serde_json::Map::new();
                for (i, name) in names.iter().enumerate() {
                    m.insert(name.clone(), self.unmixing[(c, i)].into());
                }
                serde_json::Value::Object(m)
            })
            .collect();
        serde_json::json!({
            "method": "ica",
            "k": self.k,
            "converged": self.converged,
            "iterations": self.iterations,
            "unmixing": rows,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcaSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IcaSettings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 200,
        }
    }
}

/// W ← (W Wᵀ)^{-1/2} W
fn symmetric_decorrelation(w: &DMatrix<f64>) -> DMatrix<f64> {
    let (vals, vecs) = sorted_eigen(&(w * w.transpose()));
    let inv_sqrt = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        vals.len(),
        vals.iter().map(|v| 1.0 / v.max(f64::MIN_POSITIVE).sqrt()),
    ));
    &vecs * inv_sqrt * vecs.transpose() * w
}

pub fn ica_fit(x: &DataMatrix, k: usize, seed: u64) -> Result<IcaModel> {
    ica_fit_with(x, k, seed, IcaSettings::default())
}

/// PCA whitening to `k` dimensions followed by symmetric FastICA with the
/// logcosh contrast.
pub fn ica_fit_with(x: &DataMatrix, k: usize, seed_value: u64, settings: IcaSettings) -> Result<IcaModel> {
    let p = x.p();
    if k == 0 || k > p {
        return Err(Error::InvalidArgument(format!("k = {k} must lie in 1..={p}")));
    }
    if x.n() <= k {
        return Err(Error::InvalidArgument(format!("need more than {k} rows, have {}", x.n())));
    }
    let scaling = ColumnScaling::fit(x)?;
    let z = scaling.apply(x)?;
    let r = correlation(x)?;
    let (vals, vecs) = sorted_eigen(&r.matrix);
    if vals[k - 1] <= 1e-12 {
        return Err(Error::Singular(format!("correlation matrix has rank < {k}")));
    }
    let mut whitening = vecs.columns(0, k).into_owned();
    for (c, val) in vals.iter().take(k).enumerate() {
        let s = 1.0 / val.sqrt();
        whitening.column_mut(c).iter_mut().for_each(|v| *v *= s);
    }
    let white = z.values() * &whitening; // n×k, covariance I
    let n = white.nrows() as f64;

    let mut rng = seed::rng_for(seed_value, "ica");
    let init = DMatrix::from_fn(k, k, |_, _| StandardNormal.sample(&mut rng));
    let mut w = symmetric_decorrelation(&init);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < settings.max_iter {
        iterations += 1;
        let proj = &white * w.transpose(); // n×k
        let g = proj.map(f64::tanh);
        let g_prime_mean: Vec<f64> =
            (0..k).map(|c| g.column(c).iter().map(|t| 1.0 - t * t).sum::<f64>() / n).collect();
        let mut next = g.transpose() * &white / n; // k×k
        for c in 0..k {
            for d in 0..k {
                next[(c, d)] -= g_prime_mean[c] * w[(c, d)];
            }
        }
        let next = symmetric_decorrelation(&next);
        let lim = (0..k)
            .map(|c| (next.row(c).dot(&w.row(c)).abs() - 1.0).abs())
            .fold(0.0, f64::max);
        w = next;
        if lim < settings.tol {
            converged = true;
            break;
        }
    }
    let unmixing = &w * whitening.transpose();
    Ok(IcaModel {
        unmixing,
        whitening,
        rotation: w,
        k,
        seed: seed_value,
        converged,
        iterations,
        scaling,
    })
}

pub fn ica_transform(model: &IcaModel, x: &DataMatrix) -> Result<DataMatrix> {
    let z = model.scaling.apply(x)?;
    DataMatrix::with_prefix(z.values() * model.unmixing.transpose(), "ica_")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{block_correlation, sample_mvn};

    #[test]
    fn cumulative_rule_on_flat_spectrum() {
        for p in 2..12 {
            let k = ComponentRule::default().select(&vec![1.0; p]).unwrap();
            assert_eq!(k, (0.8 * p as f64 - 1e-9).ceil() as usize, "p = {p}");
        }
    }

    #[test]
    fn elbow_rule() {
        assert_eq!(ComponentRule::Elbow.select(&[5.0, 1.0, 0.9, 0.8]).unwrap(), 1);
        assert_eq!(ComponentRule::Elbow.select(&[4.0, 3.8, 0.5, 0.4, 0.3]).unwrap(), 2);
    }

    #[test]
    fn fixed_k_out_of_range() {
        assert!(ComponentRule::Fixed(0).select(&[1.0, 1.0]).is_err());
        assert!(ComponentRule::Fixed(3).select(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn pca_pair_eigenvalues() {
        let x = sample_mvn(&block_correlation(&[2], 0.8, 0.0), 2000, 3).unwrap();
        let m = pca_fit(&x, None).unwrap();
        let r = correlation(&x).unwrap().matrix[(0, 1)];
        assert!((m.spectrum[0] - (1.0 + r)).abs() < 1e-12);
        assert!((m.spectrum[1] - (1.0 - r)).abs() < 1e-12);
        assert_eq!(m.k, 1);
        let v = m.components.column(0);
        assert!((v[0] - 0.5f64.sqrt()).abs() < 1e-12 && (v[1] - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn pca_k_greater_than_p_errors() {
        let x = sample_mvn(&block_correlation(&[3], 0.3, 0.0), 50, 1).unwrap();
        assert!(pca_fit(&x, Some(4)).is_err());
    }

    #[test]
    fn ica_rejects_bad_k() {
        let x = sample_mvn(&block_correlation(&[3], 0.3, 0.0), 50, 1).unwrap();
        assert!(ica_fit(&x, 0, 1).is_err());
        assert!(ica_fit(&x, 4, 1).is_err());
    }
}
