//! Multivariate-normal simulation with planted block structure.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

/// Correlation matrix with equicorrelated blocks of the given sizes.
pub fn block_correlation(sizes: &[usize], within: f64, between: f64) -> DMatrix<f64> {
    let block: Vec<usize> = sizes.iter().enumerate().flat_map(|(b, &s)| std::iter::repeat_n(b, s)).collect();
    let p = block.len();
    DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else if block[i] == block[j] {
            within
        } else {
            between
        }
    })
}

/// Draw `n` rows from N(0, `sigma`), columns named `x1..xp`.
pub fn sample_mvn(sigma: &DMatrix<f64>, n: usize, seed: u64) -> Result<DataMatrix> {
    let p = sigma.nrows();
    let chol = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("simulation covariance".into()))?;
    let l = chol.l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: DMatrix<f64> = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
    DataMatrix::with_prefix(z * l.transpose(), "x")
}
