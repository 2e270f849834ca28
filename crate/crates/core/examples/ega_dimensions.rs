//! Estimate dimensions of the wine data with EGA and show membership,
//! network loadings and the first few network scores.

use std::path::PathBuf;

use ndr::ega::{ega, EgaSettings};
use ndr::matrix::load_csv;

fn main() -> ndr::Result<()> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/wine.csv");
    let (x, _) = load_csv(&path, Some("class"))?;
    let r = ega(&x, &EgaSettings::default())?;

    println!("dimensions: {} (lambda {:.4})", r.dimension_count, r.selected_lambda);
    for f in 0..r.dimension_count {
        let names: Vec<&str> = r.membership.members(f).iter().map(|&i| x.column_names()[i].as_str()).collect();
        println!("  dim {}: {}", f + 1, names.join(", "));
    }

    println!("\nstandardised loadings:");
    for (i, name) in x.column_names().iter().enumerate() {
        let row: Vec<String> = (0..r.dimension_count).map(|f| format!("{:6.3}", r.loadings.standardized[(i, f)])).collect();
        println!("  {name:<30} {}", row.join(" "));
    }

    println!("\nscores (first 5 rows):");
    for i in 0..5 {
        let row: Vec<String> = (0..r.scores.p()).map(|f| format!("{:8.4}", r.scores.values()[(i, f)])).collect();
        println!("  {}", row.join(" "));
    }
    Ok(())
}
