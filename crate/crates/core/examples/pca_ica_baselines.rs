//! PCA with the automatic component rule, and FastICA unmixing two
//! independent uniform sources.

use nalgebra::DMatrix;
use ndr::baselines::{ica_fit, ica_transform, pca_fit, ComponentRule};
use ndr::matrix::DataMatrix;
use ndr::sim::{block_correlation, sample_mvn};
use rand::{Rng, SeedableRng};

fn main() -> ndr::Result<()> {
    let x = sample_mvn(&block_correlation(&[3, 3], 0.6, 0.2), 500, 3)?;
    let pca = pca_fit(&x, None)?;
    println!("spectrum: {:.3?}", pca.spectrum);
    println!("kept k = {} (explained {:.3?})", pca.k, pca.explained_variance_ratio());
    println!("elbow rule would keep {}", ComponentRule::Elbow.select(&pca.spectrum)?);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let sources = DMatrix::from_fn(3000, 2, |_, _| rng.random::<f64>() - 0.5);
    let mixing = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.3, 1.0]);
    let mixed = DataMatrix::with_prefix(&sources * mixing.transpose(), "m")?;
    let ica = ica_fit(&mixed, 2, 42)?;
    let est = ica_transform(&ica, &mixed)?;
    println!("\nica converged = {} after {} iterations", ica.converged, ica.iterations);
    for c in 0..2 {
        let corr: Vec<String> = (0..2)
            .map(|s| format!("{:+.3}", pearson(&est.column(c), sources.column(s).as_slice())))
            .collect();
        println!("  ica_{} vs true sources: {}", c + 1, corr.join("  "));
    }
    Ok(())
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
