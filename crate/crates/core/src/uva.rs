//! Unique Variable Analysis: weighted topological overlap on the
//! EBICglasso network, with redundant pairs merged one at a time until no
//! pair reaches the threshold.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glasso::{ebicglasso, EbicGlassoSettings};
use crate::graph::Network;
use crate::matrix::{mean, sample_sd, DataMatrix};

/// Symmetric matrix of ω_ij with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WtoMatrix {
    pub omega: DMatrix<f64>,
}

impl WtoMatrix {
    /// Largest off-diagonal ω and its pair; ties go to the lowest (i, j).
    pub fn max_pair(&self) -> Option<(usize, usize, f64)> {
        let p = self.omega.nrows();
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..p {
            for j in (i + 1)..p {
                let v = self.omega[(i, j)];
                if best.is_none_or(|(_, _, b)| v > b) {
                    best = Some((i, j, v));
                }
            }
        }
        best
    }
}

/// ω_ij = (Σ_u a_iu a_uj + a_ij) / (min{k_i, k_j} + 1 − a_ij) with a = |w|
/// and k the absolute strength.
pub fn wto(net: &Network) -> WtoMatrix {
    let a = net.weights().map(f64::abs);
    let p = a.nrows();
    let k: Vec<f64> = (0..p).map(|i| a.row(i).sum()).collect();
    let shared = &a * &a;
    let mut omega = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in (i + 1)..p {
            let num = shared[(i, j)] + a[(i, j)];
            let den = k[i].min(k[j]) + 1.0 - a[(i, j)];
            let v = if num == 0.0 { 0.0 } else { num / den };
            omega[(i, j)] = v;
            omega[(j, i)] = v;
        }
    }
    WtoMatrix { omega }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Combine {
    #[default]
    Sum,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UvaSettings {
    pub threshold: f64,
    pub combine: Combine,
    pub glasso: EbicGlassoSettings,
}

impl Default for UvaSettings {
    fn default() -> Self {
        Self {
            threshold: 0.25,
            combine: Combine::Sum,
            glasso: EbicGlassoSettings::default(),
        }
    }
}

/// One merge: working columns `left` and `right` are standardised, `right`
/// is multiplied by `sign`, and the two are summed (or averaged) into
/// position `left`; `right` is removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeStep {
    pub iteration: usize,
    pub left: String,
    pub right: String,
    pub left_index: usize,
    pub right_index: usize,
    pub wto: f64,
    pub sign: f64,
    pub left_mean: f64,
    pub left_sd: f64,
    pub right_mean: f64,
    pub right_sd: f64,
    pub output: String,
}

/// Provenance of one output column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputGroup {
    pub name: String,
    /// Original input column indices.
    pub members: Vec<usize>,
    /// +1 or −1 per member: direction relative to the composite.
    pub signs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionMap {
    pub input_names: Vec<String>,
    pub groups: Vec<OutputGroup>,
    pub method: Combine,
    pub iterations: usize,
    pub steps: Vec<MergeStep>,
}

impl ReductionMap {
    /// `{columns: {output: {members, signs, method}}, iterations: [...]}`.
    pub fn to_json(&self) -> serde_json::Value {
        let mut cols = serde_json::Map::new();
        for g in &self.groups {
            let members: Vec<&str> = g.members.iter().map(|&i| self.input_names[i].as_str()).collect();
            cols.insert(
                g.name.clone(),
                serde_json::json!({ "members": members, "signs": g.signs, "method": self.method }),
            );
        }
        let log: Vec<serde_json::Value> = self
            .steps
            .iter()
            .map(|s| {
                serde_json::json!({
                    "iteration": s.iteration,
                    "pair": [s.left, s.right],
                    "wto": s.wto,
                    "sign": s.sign,
                    "output": s.output,
                })
            })
            .collect();
        serde_json::json!({ "columns": cols, "iterations": log })
    }

    /// Replay the recorded merges on new rows with the same input columns.
    pub fn transform(&self, x: &DataMatrix) -> Result<DataMatrix> {
        if x.p() != self.input_names.len() {
            return Err(Error::DimensionMismatch {
                expected: self.input_names.len(),
                found: x.p(),
            });
        }
        let mut cols: Vec<Vec<f64>> = (0..x.p()).map(|j| x.column(j)).collect();
        let mut names = x.column_names().to_vec();
        for s in &self.steps {
            let merged = merge_columns(
                &cols[s.left_index],
                &cols[s.right_index],
                (s.left_mean, s.left_sd),
                (s.right_mean, s.right_sd),
                s.sign,
                self.method,
            );
            cols[s.left_index] = merged;
            names[s.left_index] = s.output.clone();
            cols.remove(s.right_index);
            names.remove(s.right_index);
        }
        columns_to_matrix(&cols, names)
    }
}

fn merge_columns(
    left: &[f64],
    right: &[f64],
    (lm, ls): (f64, f64),
    (rm, rs): (f64, f64),
    sign: f64,
    method: Combine,
) -> Vec<f64> {
    let scale = match method {
        Combine::Sum => 1.0,
        Combine::Mean => 0.5,
    };
    left.iter()
        .zip(right)
        .map(|(a, b)| scale * ((a - lm) / ls + sign * (b - rm) / rs))
        .collect()
}

fn columns_to_matrix(cols: &[Vec<f64>], names: Vec<String>) -> Result<DataMatrix> {
    let n = cols[0].len();
    DataMatrix::new(DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]), names)
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

#[derive(Debug, Clone)]
pub struct UvaResult {
    pub data: DataMatrix,
    pub map: ReductionMap,
    /// Set when merging reduced the data to a single column.
    pub collapsed_to_one: bool,
}

/// Iteratively merge the highest-ω pair while max ω ≥ threshold.
///
/// Untouched columns are returned unchanged; composites are built from
/// standardised members (so a composite merged again is re-standardised).
pub fn uva(x: &DataMatrix, settings: &UvaSettings) -> Result<UvaResult> {
    let mut cols: Vec<Vec<f64>> = (0..x.p()).map(|j| x.column(j)).collect();
    let mut names = x.column_names().to_vec();
    let mut groups: Vec<OutputGroup> = (0..x.p())
        .map(|j| OutputGroup {
            name: names[j].clone(),
            members: vec![j],
            signs: vec![1.0],
        })
        .collect();
    let mut steps = Vec::new();
    let mut collapsed_to_one = false;

    loop {
        if cols.len() < 2 {
            collapsed_to_one = true;
            break;
        }
        let current = columns_to_matrix(&cols, names.clone())?;
        let est = ebicglasso(&current, &settings.glasso)?;
        let omega = wto(&est.network);
        let Some((i, j, w)) = omega.max_pair() else { break };
        if !(w >= settings.threshold) {
            break;
        }
        let sign = if pearson(&cols[i], &cols[j]) < 0.0 { -1.0 } else { 1.0 };
        let (lm, ls) = (mean(&cols[i]), sample_sd(&cols[i]));
        let (rm, rs) = (mean(&cols[j]), sample_sd(&cols[j]));
        let merged = merge_columns(&cols[i], &cols[j], (lm, ls), (rm, rs), sign, settings.combine);
        if !(sample_sd(&merged) > 0.0) {
            return Err(Error::InvalidData(format!(
                "merging `{}` and `{}` produced a constant column",
                names[i], names[j]
            )));
        }
        let output = format!("{}+{}", names[i], names[j]);
        steps.push(MergeStep {
            iteration: steps.len() + 1,
            left: names[i].clone(),
            right: names[j].clone(),
            left_index: i,
            right_index: j,
            wto: w,
            sign,
            left_mean: lm,
            left_sd: ls,
            right_mean: rm,
            right_sd: rs,
            output: output.clone(),
        });
        let right = groups.remove(j);
        let left = &mut groups[i];
        left.name = output.clone();
        left.members.extend(right.members);
        left.signs.extend(right.signs.iter().map(|s| s * sign));
        cols[i] = merged;
        names[i] = output;
        cols.remove(j);
        names.remove(j);
    }

    let data = columns_to_matrix(&cols, names)?;
    let map = ReductionMap {
        input_names: x.column_names().to_vec(),
        groups,
        method: settings.combine,
        iterations: steps.len(),
        steps,
    };
    Ok(UvaResult {
        data,
        map,
        collapsed_to_one,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_wto() {
        let net = Network::from_edges(2, &[(0, 1, 0.5)]).unwrap();
        assert!((wto(&net).omega[(0, 1)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn triple_wto() {
        // i=0, j=1, u=2
        let net = Network::from_edges(3, &[(0, 2, 0.3), (2, 1, 0.4), (0, 1, 0.2)]).unwrap();
        let w = wto(&net).omega[(0, 1)];
        assert!((w - 0.32 / 1.3).abs() < 1e-12);
        assert!((w - 0.2462).abs() < 1e-4);
    }

    #[test]
    fn empty_network_wto_is_zero() {
        let net = Network::from_edges(4, &[]).unwrap();
        assert!(wto(&net).omega.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn negative_edges_use_magnitudes() {
        let pos = Network::from_edges(3, &[(0, 2, 0.3), (2, 1, 0.4), (0, 1, 0.2)]).unwrap();
        let neg = Network::from_edges(3, &[(0, 2, -0.3), (2, 1, 0.4), (0, 1, -0.2)]).unwrap();
        assert_eq!(wto(&pos), wto(&neg));
    }

    #[test]
    fn max_pair_ties_lowest_index() {
        let w = WtoMatrix {
            omega: DMatrix::from_row_slice(3, 3, &[0.0, 0.3, 0.3, 0.3, 0.0, 0.3, 0.3, 0.3, 0.0]),
        };
        assert_eq!(w.max_pair(), Some((0, 1, 0.3)));
    }

    #[test]
    fn default_threshold() {
        assert_eq!(UvaSettings::default().threshold, 0.25);
    }
}
