//! Tune and fit the built-in learners: a LASSO on a sparse linear signal and
//! a multinomial logit on the wine classes.

use std::path::PathBuf;

use nalgebra::DMatrix;
use ndr::learners::{fit_learner, grid_search, lambda_kill, lasso_fit, lasso_grid, LearnerKind, Response};
use ndr::matrix::load_csv;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> ndr::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let x: DMatrix<f64> = DMatrix::from_fn(200, 6, |_, _| StandardNormal.sample(&mut rng));
    let y: Vec<f64> = (0..200)
        .map(|i| 2.0 * x[(i, 0)] - 1.0 * x[(i, 3)] + 0.3 * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect();
    let kill = lambda_kill(&x, &y);
    println!("lambda_kill = {kill:.4}");
    let search = grid_search(&x, &Response::Real(y.clone()), LearnerKind::Lasso, &lasso_grid(&x, &y), 3, 42)?;
    let model = lasso_fit(&x, &y, search.best_penalty)?;
    println!("best penalty {:.5}, coefficients {:.3?}", search.best_penalty, model.coefficients[0]);

    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/wine.csv");
    let (w, target) = load_csv(&path, Some("class"))?;
    let (labels, names) = target.expect("target column").to_labels();
    let resp = Response::Classes { labels, names };
    let grid = LearnerKind::Logit.default_grid();
    let search = grid_search(w.values(), &resp, LearnerKind::Logit, &grid, 3, 42)?;
    println!("\nlogit grid {:?}", search.grid);
    println!("mean cv accuracy {:.4?}", search.mean_scores);
    let fitted = fit_learner(LearnerKind::Logit, w.values(), &resp, search.best_penalty)?;
    println!("training accuracy at {}: {:.4}", search.best_penalty, fitted.score(w.values(), &resp)?);
    Ok(())
}
