mod common;

use nalgebra::DMatrix;
use ndr::baselines::{ica_fit, ica_transform, pca_fit, pca_transform};
use ndr::bench::kfold_split;
use ndr::ega::{ega, EgaSettings};
use ndr::glasso::{ebic, glasso_fit};
use ndr::graph::{louvain, modularity, transition_matrix, walktrap, Membership, Network};
use ndr::learners::{lambda_kill, lasso_fit, logistic_fit};
use ndr::matrix::{precision_to_partial, CovarianceEstimate, DataMatrix, PrecisionMatrix};
use ndr::sim::{block_correlation, sample_mvn};
use ndr::uva::{uva, wto, UvaSettings};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use common::*;

fn named(w: DMatrix<f64>) -> Network {
    let p = w.nrows();
    Network::new(w, (0..p).map(|i| format!("n{i}")).collect()).unwrap()
}

fn gaussian(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng))
}

fn covariance_of(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let means = x.row_mean();
    let xc = DMatrix::from_fn(n, x.ncols(), |i, j| x[(i, j)] - means[j]);
    xc.transpose() * xc / (n as f64 - 1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn modularity_is_scale_invariant(seed in any::<u64>(), p in 2usize..10, scale in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_weights(p, 0.6, false, &mut rng);
        prop_assume!(w.sum() > 0.0);
        let labels: Vec<usize> = (0..p).map(|i| i % 3).collect();
        let m = Membership::from_labels(&labels);
        let w_copy = w.clone();
        let q1 = modularity(&named(w.clone()), &m).unwrap();
        let q2 = modularity(&named(w * scale), &m).unwrap();
        prop_assert!((q1 - q2).abs() < 1e-12);
        prop_assert!((q1 - naive_modularity(&w_copy, &labels)).abs() < 1e-12);
    }

    #[test]
    fn partial_correlations_in_unit_interval(seed in any::<u64>(), p in 2usize..9) {
        let x = gaussian(p + 5, p, seed);
        let cov = covariance_of(&x) + DMatrix::identity(p, p) * 1e-3;
        let k = cov.try_inverse().unwrap();
        let net = precision_to_partial(&PrecisionMatrix { matrix: k, lambda: 0.0 }).unwrap();
        for i in 0..p {
            prop_assert_eq!(net.weight(i, i), 0.0);
            for j in 0..p {
                prop_assert!(net.weight(i, j).abs() <= 1.0);
                prop_assert_eq!(net.weight(i, j), net.weight(j, i));
            }
        }
    }

    #[test]
    fn wto_symmetric_nonnegative_and_matches_oracle(seed in any::<u64>(), p in 2usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_weights(p, 0.5, true, &mut rng);
        let om = wto(&named(w.clone())).omega;
        for i in 0..p {
            for j in 0..p {
                prop_assert_eq!(om[(i, j)], om[(j, i)]);
                prop_assert!(om[(i, j)] >= 0.0);
                if i != j {
                    prop_assert!((om[(i, j)] - naive_wto(&w, i, j)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn louvain_beats_singletons(seed in any::<u64>(), p in 2usize..12, order_seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_weights(p, 0.5, false, &mut rng);
        prop_assume!(w.sum() > 0.0);
        let net = named(w);
        let found = modularity(&net, &louvain(&net, order_seed).unwrap()).unwrap();
        let singles = modularity(&net, &Membership::singletons(p)).unwrap();
        prop_assert!(found >= singles - 1e-12);
    }

    #[test]
    fn walktrap_rows_are_stochastic(seed in any::<u64>(), p in 2usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_weights(p, 0.7, true, &mut rng);
        prop_assume!(is_connected(&w));
        let net = named(w);
        let t = transition_matrix(&net).unwrap();
        for r in t.row_iter() {
            prop_assert!((r.sum() - 1.0).abs() < 1e-12);
        }
        let m = walktrap(&net, 4).unwrap();
        prop_assert_eq!(m.len(), p);
    }

    #[test]
    fn folds_partition_rows(n in 2usize..60, k in 2usize..8, seed in any::<u64>(), classes in 1usize..4) {
        prop_assume!(k <= n);
        let labels: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % classes).collect();
        for strata in [None, Some(labels.as_slice())] {
            let folds = kfold_split(n, k, seed, strata).unwrap();
            let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let mut all = folds.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            if let Some(l) = strata {
                for c in 0..classes {
                    let per: Vec<usize> = folds.iter().map(|f| f.iter().filter(|&&i| l[i] == c).count()).collect();
                    prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
                }
            }
        }
    }

    #[test]
    fn glasso_kkt_and_positive_definite(seed in any::<u64>(), p in 2usize..8, frac in 0.05f64..0.95) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = random_correlation(p, p + 20, &mut rng);
        let s = CovarianceEstimate::from_matrix(r.clone(), p + 20, true).unwrap();
        let max_off = (0..p).flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| r[(i, j)].abs()).fold(0.0, f64::max);
        let fit = glasso_fit(&s, frac * max_off, 1e-4, 100).unwrap();
        prop_assert!(fit.kkt_residual(&s) < 1e-3);
        prop_assert!(fit.precision.matrix.clone().cholesky().is_some());
        let sc = ebic(&fit, &s, p + 20, 0.5).unwrap();
        prop_assert_eq!(sc.recompute(), sc.value);
    }

    #[test]
    fn lasso_kkt(seed in any::<u64>(), frac in 0.0f64..1.0) {
        let x = gaussian(40, 5, seed);
        let noise = gaussian(40, 1, seed ^ 1);
        let y: Vec<f64> = (0..40).map(|i| x[(i, 0)] - 2.0 * x[(i, 2)] + noise[(i, 0)]).collect();
        let lam = frac * lambda_kill(&x, &y);
        let m = lasso_fit(&x, &y, lam).unwrap();
        let beta = &m.coefficients[0];
        let r: Vec<f64> = (0..40).map(|i| y[i] - m.intercept[0] - (0..5).map(|j| x[(i, j)] * beta[j]).sum::<f64>()).collect();
        for j in 0..5 {
            let g = (0..40).map(|i| x[(i, j)] * r[i]).sum::<f64>() / 40.0;
            if beta[j] == 0.0 {
                prop_assert!(g.abs() <= lam + 1e-6);
            } else {
                prop_assert!((g - lam * beta[j].signum()).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn logistic_probabilities_sum_to_one(seed in any::<u64>(), classes in 2usize..5, penalty in 0.001f64..10.0) {
        let x = gaussian(30, 3, seed);
        let y: Vec<usize> = (0..30).map(|i| i % classes).collect();
        let m = logistic_fit(&x, &y, penalty).unwrap();
        for row in m.predict_proba(&x).unwrap().row_iter() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pca_invariants(seed in any::<u64>(), within in 0.0f64..0.8) {
        let x = sample_mvn(&block_correlation(&[3, 2], within, 0.1), 200, seed).unwrap();
        let m = pca_fit(&x, Some(5)).unwrap();
        let vtv = m.components.transpose() * &m.components;
        prop_assert!((vtv - DMatrix::identity(5, 5)).abs().max() < 1e-9);
        prop_assert!((m.spectrum.iter().sum::<f64>() - 5.0).abs() < 1e-9);
        prop_assert!(m.eigenvalues.windows(2).all(|w| w[0] >= w[1]) && m.eigenvalues.iter().all(|&e| e >= 0.0));
        let scores = pca_transform(&m, &x).unwrap();
        let c = covariance_of(scores.values());
        for a in 0..5 {
            prop_assert!((c[(a, a)] - m.eigenvalues[a]).abs() < 1e-9);
            for b in 0..a {
                prop_assert!(c[(a, b)].abs() < 1e-6);
            }
        }
        // Full rank: reconstruct standardised X.
        let z = m.scaling.apply(&x).unwrap();
        let back = scores.values() * m.components.transpose();
        prop_assert!((back - z.values()).abs().max() < 1e-9);
    }

    #[test]
    fn ica_sources_are_white(seed in any::<u64>(), k in 1usize..4) {
        let x = sample_mvn(&block_correlation(&[2, 2], 0.5, 0.1), 300, seed).unwrap();
        let m = ica_fit(&x, k, seed).unwrap();
        let s = ica_transform(&m, &x).unwrap();
        let c = covariance_of(s.values());
        prop_assert!((c - DMatrix::identity(k, k)).abs().max() < 1e-6);
        prop_assert_eq!(&ica_fit(&x, k, seed).unwrap(), &m);
    }

    #[test]
    fn ega_is_permutation_equivariant(seed in any::<u64>(), shift in 1usize..7) {
        let x = sample_mvn(&block_correlation(&[4, 3], 0.6, 0.1), 400, seed).unwrap();
        let p = x.p();
        let perm: Vec<usize> = (0..p).map(|i| (i + shift) % p).collect();
        let xp = x.select_columns(&perm).unwrap();
        let a = ega(&x, &EgaSettings::default()).unwrap();
        let b = ega(&xp, &EgaSettings::default()).unwrap();
        let mapped: Vec<usize> = perm.iter().map(|&j| a.membership.community_of(j)).collect();
        prop_assert!(same_partition(&mapped, b.membership.assignment()));
        for cw in &a.model.communities {
            prop_assert!((cw.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uva_conserves_variables_and_is_idempotent(seed in any::<u64>(), within in 0.3f64..0.9) {
        let x = sample_mvn(&block_correlation(&[3, 2, 1, 1], within, 0.05), 300, seed).unwrap();
        let r = uva(&x, &UvaSettings::default()).unwrap();
        let merged: usize = r.map.groups.iter().map(|g| g.members.len() - 1).sum();
        prop_assert_eq!(r.data.p() + merged, x.p());
        let mut seen: Vec<usize> = r.map.groups.iter().flat_map(|g| g.members.clone()).collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..x.p()).collect::<Vec<_>>());
        prop_assert_eq!(uva(&r.data, &UvaSettings::default()).unwrap().map.iterations, 0);
        prop_assert_eq!(r.map.transform(&x).unwrap(), r.data.clone());
        let off = UvaSettings { threshold: 10.0, ..UvaSettings::default() };
        prop_assert_eq!(uva(&x, &off).unwrap().data, x);
    }
}

#[test]
fn uva_sign_alignment_keeps_signal() {
    let base = sample_mvn(&block_correlation(&[2], 0.8, 0.0), 400, 3).unwrap();
    let mut v = base.values().clone();
    v.column_mut(1).neg_mut();
    let x = DataMatrix::new(v, vec!["a".into(), "b_rev".into()]).unwrap();
    let r = uva(&x, &UvaSettings::default()).unwrap();
    assert_eq!(r.map.steps[0].sign, -1.0);
    assert_eq!(r.map.groups[0].signs, vec![1.0, -1.0]);
    assert!(r.collapsed_to_one);
}

fn amari_index(p: &DMatrix<f64>) -> f64 {
    let k = p.nrows() as f64;
    let a = p.abs();
    let rows: f64 = a.row_iter().map(|r| r.sum() / r.max() - 1.0).sum();
    let cols: f64 = a.column_iter().map(|c| c.sum() / c.max() - 1.0).sum();
    (rows + cols) / (2.0 * k * (k - 1.0))
}

#[test]
fn ica_recovers_uniform_sources() {
    let n = 5000;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let uniform = rand_distr::Uniform::new(-3f64.sqrt(), 3f64.sqrt()).unwrap();
    let s = DMatrix::from_fn(n, 3, |_, _| uniform.sample(&mut rng));
    let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.2, 0.3, 1.0, -0.4, -0.6, 0.2, 1.0]);
    let x = DataMatrix::with_prefix(&s * a.transpose(), "x").unwrap();
    let m = ica_fit(&x, 3, 5).unwrap();
    assert!(m.converged);
    let recovered = ica_transform(&m, &x).unwrap();
    let cross = recovered.values().transpose() * &s / n as f64;
    let index = amari_index(&cross);
    assert!(index < 0.05, "amari index {index}");
}
