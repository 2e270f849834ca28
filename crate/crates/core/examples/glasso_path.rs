//! Fit an EBIC-selected graphical lasso to simulated two-block data and
//! print the regularisation path around the selected penalty.

use ndr::glasso::{ebicglasso, EbicGlassoSettings};
use ndr::sim::{block_correlation, sample_mvn};

fn main() -> ndr::Result<()> {
    let sigma = block_correlation(&[4, 4], 0.7, 0.1);
    let x = sample_mvn(&sigma, 1000, 7)?;
    let est = ebicglasso(&x, &EbicGlassoSettings::default())?;

    println!("{:>4} {:>10} {:>6} {:>12}", "idx", "lambda", "edges", "ebic");
    let lo = est.selected.saturating_sub(3);
    let hi = (est.selected + 4).min(est.path.len());
    for (i, rec) in est.path.iter().enumerate().take(hi).skip(lo) {
        let mark = if i == est.selected { "  <- selected" } else { "" };
        let ebic = rec.ebic.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        println!("{i:>4} {:>10.5} {:>6} {ebic:>12}{mark}", rec.lambda, rec.edges);
    }

    println!("\nselected network ({} edges):", est.network.edge_count());
    print!("{}", est.network.edge_list());
    Ok(())
}
