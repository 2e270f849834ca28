//! Exploratory Graph Analysis: correlation → EBICglasso network →
//! community detection → network loadings → network scores.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glasso::{ebicglasso, EbicGlassoSettings, PathRecord};
use crate::graph::{detect_communities, CommunityAlgorithm, Membership, Network};
use crate::matrix::{correlation, sample_sd, ColumnScaling, DataMatrix};

/// Raw (L) and standardised (ℵ) network loadings, p×F.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadingMatrix {
    pub raw: DMatrix<f64>,
    pub standardized: DMatrix<f64>,
    pub membership: Membership,
}

/// `L_if = Σ_{j∈f} |w_ij|`, standardised by the square root of the column sum.
pub fn network_loadings(net: &Network, m: &Membership) -> Result<LoadingMatrix> {
    let p = net.len();
    if m.len() != p {
        return Err(Error::DimensionMismatch { expected: p, found: m.len() });
    }
    let f = m.count();
    let mut raw = DMatrix::zeros(p, f);
    for i in 0..p {
        for j in 0..p {
            raw[(i, m.community_of(j))] += net.weight(i, j).abs();
        }
    }
    let mut standardized = raw.clone();
    for c in 0..f {
        let total: f64 = raw.column(c).sum();
        if total > 0.0 {
            let root = total.sqrt();
            standardized.column_mut(c).iter_mut().for_each(|v| *v /= root);
        }
    }
    Ok(LoadingMatrix {
        raw,
        standardized,
        membership: m.clone(),
    })
}

/// Relative scoring weights of one community's member variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityWeights {
    pub members: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Relative loading weights per community.
///
/// `V_i = ℵ_if / sd(X_i)` for members of f, normalised to sum to one. A
/// singleton community takes its only variable with weight one.
pub fn score_weights(x: &DataMatrix, loadings: &LoadingMatrix) -> Result<Vec<CommunityWeights>> {
    let m = &loadings.membership;
    if x.p() != m.len() {
        return Err(Error::DimensionMismatch { expected: m.len(), found: x.p() });
    }
    let mut out = Vec::with_capacity(m.count());
    for f in 0..m.count() {
        let members = m.members(f);
        if members.len() == 1 {
            out.push(CommunityWeights { members, weights: vec![1.0] });
            continue;
        }
        let mut v = Vec::with_capacity(members.len());
        for &i in &members {
            let sd = sample_sd(&x.column(i));
            if !(sd > 0.0) {
                return Err(Error::ZeroVariance(x.column_names()[i].clone()));
            }
            v.push(loadings.standardized[(i, f)] / sd);
        }
        let total: f64 = v.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidData(format!(
                "community {} has zero total loading; relative weights undefined",
                f + 1
            )));
        }
        out.push(CommunityWeights {
            members,
            weights: v.iter().map(|vi| vi / total).collect(),
        });
    }
    Ok(out)
}

fn apply_weights(x: &DMatrix<f64>, weights: &[CommunityWeights]) -> DMatrix<f64> {
    let mut scores = DMatrix::zeros(x.nrows(), weights.len());
    for (f, cw) in weights.iter().enumerate() {
        for (&i, &w) in cw.members.iter().zip(&cw.weights) {
            for r in 0..x.nrows() {
                scores[(r, f)] += x[(r, i)] * w;
            }
        }
    }
    scores
}

/// Network scores θ̂ (n×F): weighted sums of each community's variables.
pub fn network_scores(x: &DataMatrix, loadings: &LoadingMatrix) -> Result<DMatrix<f64>> {
    let weights = score_weights(x, loadings)?;
    Ok(apply_weights(x.values(), &weights))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgaSettings {
    pub algorithm: CommunityAlgorithm,
    /// Walktrap walk length.
    pub steps: usize,
    pub glasso: EbicGlassoSettings,
    /// Louvain node-order seed.
    pub seed: u64,
}

impl Default for EgaSettings {
    fn default() -> Self {
        Self {
            algorithm: CommunityAlgorithm::Walktrap,
            steps: 4,
            glasso: EbicGlassoSettings::default(),
            seed: crate::seed::DEFAULT_SEED,
        }
    }
}

/// What is needed to score new rows with a fitted EGA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgaModel {
    pub scaling: ColumnScaling,
    pub communities: Vec<CommunityWeights>,
    pub names: Vec<String>,
}

impl EgaModel {
    pub fn dimension_count(&self) -> usize {
        self.communities.len()
    }

    pub fn transform(&self, x: &DataMatrix) -> Result<DataMatrix> {
        let z = self.scaling.apply(x)?;
        DataMatrix::with_prefix(apply_weights(z.values(), &self.communities), "ega_dim_")
    }
}

#[derive(Debug, Clone)]
pub struct EgaResult {
    pub network: Network,
    pub membership: Membership,
    pub loadings: LoadingMatrix,
    /// n×F network scores, columns `ega_dim_1..F`.
    pub scores: DataMatrix,
    pub dimension_count: usize,
    /// Set when the estimated network had no edges at all.
    pub all_isolated: bool,
    pub selected_lambda: f64,
    pub path: Vec<PathRecord>,
    pub model: EgaModel,
}

impl EgaResult {
    pub fn membership_json(&self) -> serde_json::Value {
        self.membership.to_json(self.network.node_names())
    }
}

/// Column order determined by each column's sorted |correlation| profile,
/// so the estimate does not depend on how the input columns were ordered.
fn canonical_order(x: &DataMatrix) -> Result<Vec<usize>> {
    let r = correlation(x)?;
    let p = x.p();
    let keys: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            let mut k: Vec<f64> = (0..p).filter(|&i| i != j).map(|i| r.matrix[(i, j)].abs()).collect();
            k.sort_by(|a, b| b.total_cmp(a));
            k
        })
        .collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        for (x, y) in keys[a].iter().zip(&keys[b]) {
            match x.total_cmp(y) {
                Ordering::Equal => continue,
                o => return o.reverse(),
            }
        }
        a.cmp(&b)
    });
    Ok(order)
}

/// Run the full EGA pipeline on `x`.
pub fn ega(x: &DataMatrix, settings: &EgaSettings) -> Result<EgaResult> {
    let order = canonical_order(x)?;
    let xc = x.select_columns(&order)?;
    let est = ebicglasso(&xc, &settings.glasso)?;
    let (mc, all_isolated) = detect_communities(&est.network, settings.algorithm, settings.seed, settings.steps)?;

    // Map back to the caller's column order.
    let p = x.p();
    let mut pos = vec![0; p];
    for (canon, &orig) in order.iter().enumerate() {
        pos[orig] = canon;
    }
    let w = DMatrix::from_fn(p, p, |i, j| est.network.weight(pos[i], pos[j]));
    let network = Network::new(w, x.column_names().to_vec())?;
    let labels: Vec<usize> = (0..p).map(|i| mc.community_of(pos[i])).collect();
    let membership = Membership::from_labels(&labels);

    let loadings = network_loadings(&network, &membership)?;
    let scaling = ColumnScaling::fit(x)?;
    let z = scaling.apply(x)?;
    let communities = score_weights(&z, &loadings)?;
    let scores = DataMatrix::with_prefix(apply_weights(z.values(), &communities), "ega_dim_")?;
    let model = EgaModel {
        scaling,
        communities,
        names: x.column_names().to_vec(),
    };
    Ok(EgaResult {
        dimension_count: membership.count(),
        selected_lambda: est.path[est.selected].lambda,
        path: est.path,
        network,
        membership,
        loadings,
        scores,
        all_isolated,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loadings_hand_example() {
        let net = Network::from_edges(3, &[(0, 1, 0.5), (0, 2, 0.2)]).unwrap();
        let m = Membership::from_labels(&[0, 0, 1]);
        let l = network_loadings(&net, &m).unwrap();
        assert_eq!(l.raw.column(0).iter().copied().collect::<Vec<_>>(), vec![0.5, 0.5, 0.2]);
        assert!((l.standardized[(0, 0)] - 0.5 / 1.2f64.sqrt()).abs() < 1e-12);
        assert!((l.standardized[(0, 0)] - 0.4564).abs() < 1e-4);
    }

    #[test]
    fn empty_network_has_zero_loadings() {
        let net = Network::from_edges(3, &[]).unwrap();
        let l = network_loadings(&net, &Membership::singletons(3)).unwrap();
        assert!(l.raw.iter().chain(l.standardized.iter()).all(|v| *v == 0.0));
    }

    #[test]
    fn doubling_weights_scales_loadings() {
        let net = Network::from_edges(4, &[(0, 1, 0.3), (1, 2, 0.2), (2, 3, 0.4), (0, 3, -0.1)]).unwrap();
        let net2 = Network::new(net.weights() * 2.0, net.node_names().to_vec()).unwrap();
        let m = Membership::from_labels(&[0, 0, 1, 1]);
        let a = network_loadings(&net, &m).unwrap();
        let b = network_loadings(&net2, &m).unwrap();
        for (x, y) in a.raw.iter().zip(b.raw.iter()) {
            assert!((2.0 * x - y).abs() < 1e-12);
        }
        for (x, y) in a.standardized.iter().zip(b.standardized.iter()) {
            assert!((2f64.sqrt() * x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_loadings_score_is_mean() {
        let net = Network::from_edges(2, &[(0, 1, 0.4)]).unwrap();
        let m = Membership::single(2);
        let l = network_loadings(&net, &m).unwrap();
        let x = DataMatrix::with_prefix(DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, 1.0, 1.0, -1.0]), "x")
            .unwrap();
        let s = network_scores(&x, &l).unwrap();
        assert_eq!(s.column(0).iter().copied().collect::<Vec<_>>(), vec![-0.5, 0.5, 0.0]);
    }

    #[test]
    fn relative_weights_sum_to_one() {
        let net = Network::from_edges(4, &[(0, 1, 0.3), (1, 2, 0.2), (2, 3, 0.4), (0, 2, 0.1)]).unwrap();
        let m = Membership::from_labels(&[0, 0, 0, 1]);
        let l = network_loadings(&net, &m).unwrap();
        let x = DataMatrix::with_prefix(
            DMatrix::from_fn(5, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 + j as f64 * 0.1),
            "x",
        )
        .unwrap();
        for cw in score_weights(&x, &l).unwrap() {
            assert!((cw.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_loading_community_errors() {
        // community {2,3} on an edgeless network: both loadings are zero
        let m = Membership::from_labels(&[0, 1, 1]);
        let l = network_loadings(&Network::from_edges(3, &[]).unwrap(), &m).unwrap();
        let x = DataMatrix::with_prefix(DMatrix::from_fn(4, 3, |i, j| (i * (j + 1)) as f64 + j as f64), "x").unwrap();
        assert!(score_weights(&x, &l).is_err());
    }
}
