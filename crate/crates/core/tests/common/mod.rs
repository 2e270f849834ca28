//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::DMatrix;
use ndr::graph::{Membership, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_dir() -> PathBuf {
    std::env::var_os("NDR_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

/// Q by the textbook double sum, with 2D = Σ_ij w_ij.
pub fn naive_modularity(w: &DMatrix<f64>, labels: &[usize]) -> f64 {
    let p = w.nrows();
    let mut two_d = 0.0;
    let mut d = vec![0.0; p];
    for i in 0..p {
        for j in 0..p {
            d[i] += w[(i, j)];
            two_d += w[(i, j)];
        }
    }
    let mut q = 0.0;
    for i in 0..p {
        for j in 0..p {
            if labels[i] == labels[j] {
                q += w[(i, j)] - d[i] * d[j] / two_d;
            }
        }
    }
    q / two_d
}

/// ω_ij with an explicit loop over third nodes, on |w|.
pub fn naive_wto(w: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    let p = w.nrows();
    let a = |x: usize, y: usize| w[(x, y)].abs();
    let mut shared = 0.0;
    for u in 0..p {
        if u != i && u != j {
            shared += a(i, u) * a(u, j);
        }
    }
    let ki: f64 = (0..p).map(|u| a(i, u)).sum();
    let kj: f64 = (0..p).map(|u| a(j, u)).sum();
    let num = shared + a(i, j);
    if num == 0.0 {
        return 0.0;
    }
    num / (ki.min(kj) + 1.0 - a(i, j))
}

/// Random symmetric weights in [−1, 1] (or [0, 1]) with the given density.
pub fn random_weights(p: usize, density: f64, signed: bool, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in (i + 1)..p {
            if rng.random::<f64>() < density {
                let mut v = rng.random_range(0.01..1.0);
                if signed && rng.random::<bool>() {
                    v = -v;
                }
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
    }
    w
}

pub fn is_connected(w: &DMatrix<f64>) -> bool {
    let p = w.nrows();
    let mut seen = vec![false; p];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..p {
            if w[(i, j)] != 0.0 && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.iter().all(|&s| s)
}

/// `count` distinct connected unit-weight graphs on 3..=8 nodes.
pub fn connected_unit_graphs(count: usize, seed: u64) -> Vec<Network> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    while out.len() < count {
        let p = rng.random_range(3..=8);
        let density = rng.random_range(0.25..0.8);
        let w = random_weights(p, density, false, &mut rng).map(|v| if v != 0.0 { 1.0 } else { 0.0 });
        if !is_connected(&w) {
            continue;
        }
        let key: Vec<u8> = w.iter().map(|&v| v as u8).chain([p as u8]).collect();
        if seen.insert(key) {
            out.push(Network::new(w, (0..p).map(|i| format!("n{i}")).collect()).unwrap());
        }
    }
    out
}

/// Every set partition of 0..p as restricted-growth label vectors.
pub fn set_partitions(p: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, max: usize, p: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == p {
            out.push(prefix.clone());
            return;
        }
        for l in 0..=max + 1 {
            prefix.push(l);
            grow(prefix, max.max(l), p, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if p == 0 {
        return out;
    }
    let mut prefix = vec![0];
    grow(&mut prefix, 0, p, &mut out);
    out
}

pub fn brute_force_max_modularity(w: &DMatrix<f64>) -> f64 {
    set_partitions(w.nrows())
        .iter()
        .map(|l| naive_modularity(w, l))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// True when two memberships describe the same partition.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    Membership::from_labels(a) == Membership::from_labels(b)
}

/// Sample correlation of `n` standard-normal rows in `p` columns.
pub fn random_correlation(p: usize, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let mix: DMatrix<f64> = DMatrix::from_fn(p, p, |_, _| StandardNormal.sample(rng));
    let z: DMatrix<f64> = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(rng));
    let x = z * mix;
    let means: Vec<f64> = (0..p).map(|j| x.column(j).mean()).collect();
    let xc = DMatrix::from_fn(n, p, |i, j| x[(i, j)] - means[j]);
    let c = xc.transpose() * &xc;
    let mut r = DMatrix::from_fn(p, p, |i, j| c[(i, j)] / (c[(i, i)] * c[(j, j)]).sqrt());
    for i in 0..p {
        r[(i, i)] = 1.0;
        for j in 0..i {
            r[(i, j)] = r[(j, i)];
        }
    }
    r
}
