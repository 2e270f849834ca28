//! Collapse redundant variables with UVA: a noisy copy of one column is
//! merged with it, independent columns are left alone.

use nalgebra::DMatrix;
use ndr::matrix::DataMatrix;
use ndr::sim::{block_correlation, sample_mvn};
use ndr::uva::{uva, UvaSettings};

fn main() -> ndr::Result<()> {
    let base = sample_mvn(&block_correlation(&[1; 5], 0.0, 0.0), 800, 11)?;
    let noise = sample_mvn(&block_correlation(&[1], 0.0, 0.0), 800, 12)?;
    let n = base.n();
    let mut v: DMatrix<f64> = base.values().clone().insert_column(5, 0.0);
    for i in 0..n {
        // Reverse-keyed near-duplicate of x2.
        v[(i, 5)] = -v[(i, 1)] + 0.2 * noise.values()[(i, 0)];
    }
    let mut names = base.column_names().to_vec();
    names.push("x2_reversed".into());
    let x = DataMatrix::new(v, names)?;

    let r = uva(&x, &UvaSettings::default())?;
    println!("input:  {:?}", x.column_names());
    println!("output: {:?}", r.data.column_names());
    println!("{}", serde_json::to_string_pretty(&r.map.to_json())?);

    let again = uva(&r.data, &UvaSettings::default())?;
    println!("second pass merges: {}", again.map.iterations);
    Ok(())
}
