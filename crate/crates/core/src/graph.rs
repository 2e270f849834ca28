//! Weighted networks, node strength, modularity, and the Louvain and
//! Walktrap community-detection algorithms.
//!
//! Weights may be signed (GLASSO partial correlations). Modularity always
//! uses the signed weights; the Walktrap random walk uses |w| because
//! transition probabilities must be nonnegative.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Symmetric weighted adjacency matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    weights: DMatrix<f64>,
    node_names: Vec<String>,
}

impl Network {
    pub fn new(weights: DMatrix<f64>, node_names: Vec<String>) -> Result<Self> {
        let p = weights.nrows();
        if weights.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: weights.ncols(),
            });
        }
        if node_names.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: node_names.len(),
            });
        }
        for i in 0..p {
            if weights[(i, i)] != 0.0 {
                return Err(Error::InvalidData(format!("network diagonal entry {i} is nonzero")));
            }
            for j in 0..i {
                let (a, b) = (weights[(i, j)], weights[(j, i)]);
                if !a.is_finite() || (a - b).abs() > 1e-12 {
                    return Err(Error::InvalidData(format!("network weights ({i},{j}) not symmetric")));
                }
            }
        }
        Ok(Self { weights, node_names })
    }

    /// Build from an unweighted edge list over `p` nodes.
    pub fn from_edges(p: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut w = DMatrix::zeros(p, p);
        for &(i, j, v) in edges {
            if i >= p || j >= p || i == j {
                return Err(Error::InvalidArgument(format!("bad edge ({i},{j})")));
            }
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
        Self::new(w, (1..=p).map(|i| format!("v{i}")).collect())
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: names.len(),
            });
        }
        self.node_names = names;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.weights.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn node_names(&self) -> &[String] {
        &self.node_names
    }

    /// Signed strength d_i = Σ_j w_ij.
    pub fn strength(&self, i: usize) -> f64 {
        self.weights.row(i).iter().sum()
    }

    /// Σ_j |w_ij|.
    pub fn abs_strength(&self, i: usize) -> f64 {
        self.weights.row(i).iter().map(|w| w.abs()).sum()
    }

    /// D = ½ Σ_i Σ_j w_ij.
    pub fn total_weight(&self) -> f64 {
        0.5 * self.weights.iter().sum::<f64>()
    }

    pub fn edge_count(&self) -> usize {
        let p = self.len();
        (0..p).map(|i| ((i + 1)..p).filter(|&j| self.weights[(i, j)] != 0.0).count()).sum()
    }

    pub fn abs(&self) -> Network {
        Network {
            weights: self.weights.map(f64::abs),
            node_names: self.node_names.clone(),
        }
    }

    pub fn is_isolated(&self, i: usize) -> bool {
        self.weights.row(i).iter().all(|w| *w == 0.0)
    }

    pub fn subnetwork(&self, nodes: &[usize]) -> Network {
        let w = DMatrix::from_fn(nodes.len(), nodes.len(), |a, b| self.weights[(nodes[a], nodes[b])]);
        Network {
            weights: w,
            node_names: nodes.iter().map(|&i| self.node_names[i].clone()).collect(),
        }
    }

    /// Upper-triangle nonzero edges as `name_i,name_j,w_ij` lines.
    pub fn edge_list(&self) -> String {
        let mut out = String::new();
        let p = self.len();
        for i in 0..p {
            for j in (i + 1)..p {
                let w = self.weights[(i, j)];
                if w != 0.0 {
                    out.push_str(&format!("{},{},{}\n", self.node_names[i], self.node_names[j], w));
                }
            }
        }
        out
    }
}

/// Assignment of every node to one of `count` non-empty communities.
///
/// Indices are 0-based here; exported JSON uses 1-based community numbers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Membership {
    assignment: Vec<usize>,
    count: usize,
}

impl Membership {
    /// Relabel arbitrary labels to 0..F in order of first appearance.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut map = BTreeMap::new();
        let mut next = 0;
        let assignment = labels
            .iter()
            .map(|l| {
                *map.entry(*l).or_insert_with(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect();
        Self {
            assignment,
            count: next,
        }
    }

    pub fn singletons(p: usize) -> Self {
        Self::from_labels(&(0..p).collect::<Vec<_>>())
    }

    pub fn single(p: usize) -> Self {
        Self::from_labels(&vec![0; p])
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn community_of(&self, i: usize) -> usize {
        self.assignment[i]
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn members(&self, f: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.assignment[i] == f).collect()
    }

    /// `{node name → community number (1-based)}`.
    pub fn to_json(&self, names: &[String]) -> serde_json::Value {
        let mut m = serde_json::Map::new();
        for (name, c) in names.iter().zip(&self.assignment) {
            m.insert(name.clone(), serde_json::Value::from(c + 1));
        }
        serde_json::Value::Object(m)
    }
}

/// Modularity Q = (1/2D) Σ_i Σ_j [w_ij − d_i d_j / 2D] δ(c_i, c_j).
pub fn modularity(net: &Network, m: &Membership) -> Result<f64> {
    if m.len() != net.len() {
        return Err(Error::DimensionMismatch {
            expected: net.len(),
            found: m.len(),
        });
    }
    let two_d = 2.0 * net.total_weight();
    if !(two_d > 0.0) {
        return Err(Error::InvalidData("modularity undefined: total edge weight is not positive".into()));
    }
    // Per community: Σ_{i,j∈c} w_ij − (Σ_{i∈c} d_i)² / 2D, which is the
    // double sum regrouped.
    let f = m.count();
    let mut internal = vec![0.0; f];
    let mut tot = vec![0.0; f];
    for i in 0..net.len() {
        let ci = m.community_of(i);
        tot[ci] += net.strength(i);
        for j in 0..net.len() {
            if m.community_of(j) == ci {
                internal[ci] += net.weight(i, j);
            }
        }
    }
    let q: f64 = (0..f).map(|c| internal[c] - tot[c] * tot[c] / two_d).sum();
    Ok(q / two_d)
}

/// The network modularity is evaluated on: signed weights when their total is
/// positive, absolute weights otherwise.
fn quality_network(net: &Network) -> Network {
    if net.total_weight() > 0.0 {
        net.clone()
    } else {
        net.abs()
    }
}

/// Louvain modularity maximisation.
///
/// Nodes are visited in an order shuffled from `seed`; a node moves to the
/// community with the largest strictly positive modularity gain (ties go to
/// the first candidate in scan order). Communities are then collapsed into
/// latent nodes whose edge weights are the summed member weights, and the
/// process repeats until nothing moves or one community remains.
pub fn louvain(net: &Network, seed: u64) -> Result<Membership> {
    let p = net.len();
    if p <= 1 {
        return Ok(Membership::singletons(p));
    }
    let qnet = quality_network(net);
    if !(qnet.total_weight() > 0.0) {
        return Ok(Membership::singletons(p));
    }
    let mut rng = seed::rng_for(seed, "louvain");
    let mut adj = qnet.weights().clone();
    let mut node_comm: Vec<usize> = (0..p).collect();

    loop {
        let m = adj.nrows();
        let comm = louvain_local_moves(&adj, &mut rng);
        let relabeled = Membership::from_labels(&comm);
        if relabeled.count() == m {
            break;
        }
        for c in node_comm.iter_mut() {
            *c = relabeled.community_of(*c);
        }
        let f = relabeled.count();
        let mut next = DMatrix::zeros(f, f);
        for i in 0..m {
            for j in 0..m {
                next[(relabeled.community_of(i), relabeled.community_of(j))] += adj[(i, j)];
            }
        }
        adj = next;
        if f == 1 {
            break;
        }
    }
    Ok(Membership::from_labels(&node_comm))
}

fn louvain_local_moves(adj: &DMatrix<f64>, rng: &mut impl rand::Rng) -> Vec<usize> {
    let m = adj.nrows();
    let k: Vec<f64> = (0..m).map(|i| adj.row(i).iter().sum()).collect();
    let two_d: f64 = k.iter().sum();
    let scale = 1e-12 * adj.iter().map(|w| w.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);

    let mut comm: Vec<usize> = (0..m).collect();
    let mut size = vec![1usize; m];
    let mut tot = k.clone();
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);

    let mut links = vec![0.0; m];
    let max_passes = 1000;
    for _ in 0..max_passes {
        let mut moved = false;
        for &i in &order {
            let ci = comm[i];
            links.iter_mut().for_each(|l| *l = 0.0);
            for j in 0..m {
                if j != i {
                    links[comm[j]] += adj[(i, j)];
                }
            }
            tot[ci] -= k[i];
            size[ci] -= 1;
            let gain = |c: usize, tot: &[f64]| links[c] - k[i] * tot[c] / two_d;

            let mut best = ci;
            let mut best_gain = gain(ci, &tot);
            let mut seen = vec![false; m];
            seen[ci] = true;
            for &j in &order {
                let c = comm[j];
                if seen[c] || size[c] == 0 {
                    continue;
                }
                seen[c] = true;
                let g = gain(c, &tot);
                if g > best_gain + scale {
                    best = c;
                    best_gain = g;
                }
            }
            // an empty community has zero gain; only reachable with negative weights
            if size[ci] > 0 && best_gain < -scale {
                if let Some(empty) = (0..m).find(|&c| size[c] == 0) {
                    best = empty;
                }
            }
            comm[i] = best;
            tot[best] += k[i];
            size[best] += 1;
            if best != ci {
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    comm
}

/// Row-stochastic transition matrix P = D⁻¹|W|.
pub fn transition_matrix(net: &Network) -> Result<DMatrix<f64>> {
    let a = net.weights().map(f64::abs);
    let p = net.len();
    let mut t = DMatrix::zeros(p, p);
    for i in 0..p {
        let d: f64 = a.row(i).iter().sum();
        if !(d > 0.0) {
            return Err(Error::InvalidData(format!(
                "node `{}` has zero strength; random walk undefined",
                net.node_names()[i]
            )));
        }
        for j in 0..p {
            t[(i, j)] = a[(i, j)] / d;
        }
    }
    Ok(t)
}

/// Walktrap community detection.
///
/// Walk distances between communities are computed from t-step transition
/// probabilities; adjacent communities are merged greedily by Ward's
/// criterion, and the dendrogram level with the highest modularity (on the
/// signed network) is returned.
pub fn walktrap(net: &Network, steps: usize) -> Result<Membership> {
    let p = net.len();
    if steps == 0 {
        return Err(Error::InvalidArgument("walktrap needs at least one step".into()));
    }
    let trans = transition_matrix(net)?;
    if p == 1 {
        return Ok(Membership::singletons(1));
    }
    let qnet = quality_network(net);
    let strength: Vec<f64> = (0..p).map(|i| net.abs_strength(i)).collect();
    let mut pt = trans.clone();
    for _ in 1..steps {
        pt = &pt * &trans;
    }
    // D^{-1/2} scaling folded into the probability vectors
    for i in 0..p {
        for k in 0..p {
            pt[(i, k)] /= strength[k].sqrt();
        }
    }

    struct Cluster {
        profile: Vec<f64>,
        size: usize,
        nodes: Vec<usize>,
    }
    let mut clusters: Vec<Option<Cluster>> = (0..p)
        .map(|i| {
            Some(Cluster {
                profile: pt.row(i).iter().copied().collect(),
                size: 1,
                nodes: vec![i],
            })
        })
        .collect();
    let mut adjacent = DMatrix::from_fn(p, p, |i, j| i != j && net.weight(i, j) != 0.0);

    let mut labels: Vec<usize> = (0..p).collect();
    let mut best = Membership::from_labels(&labels);
    let mut best_q = modularity(&qnet, &best)?;

    loop {
        let mut choice: Option<(usize, usize, f64)> = None;
        for a in 0..p {
            let Some(ca) = &clusters[a] else { continue };
            for b in (a + 1)..p {
                if !adjacent[(a, b)] {
                    continue;
                }
                let Some(cb) = &clusters[b] else { continue };
                let dist2: f64 = ca.profile.iter().zip(&cb.profile).map(|(x, y)| (x - y) * (x - y)).sum();
                let sa = ca.size as f64;
                let sb = cb.size as f64;
                let delta = sa * sb / (sa + sb) * dist2 / p as f64;
                if choice.is_none_or(|(_, _, d)| delta < d) {
                    choice = Some((a, b, delta));
                }
            }
        }
        let Some((a, b, _)) = choice else { break };
        let cb = clusters[b].take().expect("live cluster");
        let ca = clusters[a].as_mut().expect("live cluster");
        let (sa, sb) = (ca.size as f64, cb.size as f64);
        for (x, y) in ca.profile.iter_mut().zip(&cb.profile) {
            *x = (sa * *x + sb * y) / (sa + sb);
        }
        ca.size += cb.size;
        ca.nodes.extend(&cb.nodes);
        for &i in &cb.nodes {
            labels[i] = a;
        }
        for c in 0..p {
            let merged = adjacent[(a, c)] || adjacent[(b, c)];
            adjacent[(a, c)] = merged && c != a;
            adjacent[(c, a)] = merged && c != a;
            adjacent[(b, c)] = false;
            adjacent[(c, b)] = false;
        }
        let m = Membership::from_labels(&labels);
        let q = modularity(&qnet, &m)?;
        if q > best_q + 1e-12 {
            best_q = q;
            best = m;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CommunityAlgorithm {
    #[default]
    Walktrap,
    Louvain,
}

/// Community detection with isolated nodes split off as singletons first.
///
/// Returns the membership and whether every node was isolated.
pub fn detect_communities(
    net: &Network,
    algorithm: CommunityAlgorithm,
    seed: u64,
    steps: usize,
) -> Result<(Membership, bool)> {
    let p = net.len();
    let connected: Vec<usize> = (0..p).filter(|&i| !net.is_isolated(i)).collect();
    if connected.is_empty() {
        return Ok((Membership::singletons(p), true));
    }
    let sub = net.subnetwork(&connected);
    let sub_m = match algorithm {
        CommunityAlgorithm::Walktrap => walktrap(&sub, steps)?,
        CommunityAlgorithm::Louvain => louvain(&sub, seed)?,
    };
    let mut labels = vec![0usize; p];
    for (a, &i) in connected.iter().enumerate() {
        labels[i] = sub_m.community_of(a);
    }
    let mut next = sub_m.count();
    for (i, label) in labels.iter_mut().enumerate() {
        if net.is_isolated(i) {
            *label = next;
            next += 1;
        }
    }
    Ok((Membership::from_labels(&labels), false))
}
