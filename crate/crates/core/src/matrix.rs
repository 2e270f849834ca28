//! Tabular data, column standardisation, correlation/covariance estimation
//! and the precision → partial-correlation conversion.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Network;

/// An n×p numeric table with named columns and no missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    column_names: Vec<String>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>, column_names: Vec<String>) -> Result<Self> {
        if values.ncols() != column_names.len() {
            return Err(Error::DimensionMismatch {
                expected: values.ncols(),
                found: column_names.len(),
            });
        }
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::InvalidData("empty data matrix".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("data contains non-finite values".into()));
        }
        Ok(Self {
            values,
            column_names,
        })
    }

    /// Build from a matrix, naming columns `{prefix}1..p`.
    pub fn with_prefix(values: DMatrix<f64>, prefix: &str) -> Result<Self> {
        let names = (1..=values.ncols()).map(|j| format!("{prefix}{j}")).collect();
        Self::new(values, names)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("row selection is empty".into()));
        }
        let values = self.values.select_rows(rows.iter());
        Ok(Self {
            values,
            column_names: self.column_names.clone(),
        })
    }

    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if cols.is_empty() {
            return Err(Error::InvalidArgument("column selection is empty".into()));
        }
        let values = self.values.select_columns(cols.iter());
        let column_names = cols.iter().map(|&j| self.column_names[j].clone()).collect();
        Ok(Self {
            values,
            column_names,
        })
    }

    /// Write as CSV with a header row. Optional trailing target column.
    pub fn to_csv_bytes(&self, target: Option<&Target>) -> Result<Vec<u8>> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = self.column_names.iter().map(String::as_str).collect();
        if let Some(t) = target {
            if t.values.len() != self.n() {
                return Err(Error::DimensionMismatch {
                    expected: self.n(),
                    found: t.values.len(),
                });
            }
            header.push(&t.name);
        }
        wtr.write_record(&header).map_err(|e| Error::Csv(e.to_string()))?;
        for i in 0..self.n() {
            let mut row: Vec<String> = (0..self.p()).map(|j| self.values[(i, j)].to_string()).collect();
            if let Some(t) = target {
                row.push(t.values[i].clone());
            }
            wtr.write_record(&row).map_err(|e| Error::Csv(e.to_string()))?;
        }
        wtr.into_inner().map_err(|e| Error::Csv(e.to_string()))
    }
}

/// The response column, kept as text and never standardised.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Target {
    pub name: String,
    pub values: Vec<String>,
}

impl Target {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_real(&self) -> Result<Vec<f64>> {
        self.values
            .iter()
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::InvalidData(format!("target `{}` has non-numeric value `{v}`", self.name)))
            })
            .collect()
    }

    /// Encode as class indices; classes are sorted, so encoding is stable.
    pub fn to_labels(&self) -> (Vec<usize>, Vec<String>) {
        let mut classes: Vec<String> = self.values.clone();
        classes.sort();
        classes.dedup();
        let labels = self
            .values
            .iter()
            .map(|v| classes.binary_search(v).expect("class present"))
            .collect();
        (labels, classes)
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            values: rows.iter().map(|&i| self.values[i].clone()).collect(),
        }
    }
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c == "NA"
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Load a delimited file with a header row. The delimiter is `;` when the
/// header contains semicolons but no commas, otherwise `,`.
///
/// Non-numeric columns (other than `target_column`) are dropped, then any
/// row with a missing cell ("" or "NA") in a kept column is removed, then
/// constant columns are dropped.
pub fn load_csv(path: impl AsRef<Path>, target_column: Option<&str>) -> Result<(DataMatrix, Option<Target>)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&bytes, target_column)
}

/// Same as [`load_csv`] on in-memory bytes.
pub fn parse_csv(bytes: &[u8], target_column: Option<&str>) -> Result<(DataMatrix, Option<Target>)> {
    let first_line = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
    let delimiter = if first_line.contains(&b';') && !first_line.contains(&b',') {
        b';'
    } else {
        b','
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .delimiter(delimiter)
        .from_reader(bytes);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::Csv("header row missing".into()));
    }
    let mut rows: Vec<Vec<String>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }

    let target_idx = match target_column {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Config(format!("target column `{name}` not found")))?,
        ),
        None => None,
    };

    // A column is numeric when every non-missing cell parses as a finite number.
    let numeric: Vec<usize> = (0..header.len())
        .filter(|&j| Some(j) != target_idx)
        .filter(|&j| {
            let mut seen = false;
            for r in &rows {
                let c = &r[j];
                if is_missing(c) {
                    continue;
                }
                if parse_cell(c).is_none() {
                    return false;
                }
                seen = true;
            }
            seen
        })
        .collect();

    let complete: Vec<&Vec<String>> = rows
        .iter()
        .filter(|r| {
            numeric.iter().all(|&j| !is_missing(&r[j])) && target_idx.is_none_or(|t| !is_missing(&r[t]))
        })
        .collect();
    if complete.len() < 3 {
        return Err(Error::InvalidData(format!(
            "only {} complete rows; at least 3 required",
            complete.len()
        )));
    }

    let n = complete.len();
    let mut kept = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for &j in &numeric {
        let col: Vec<f64> = complete.iter().map(|r| parse_cell(&r[j]).expect("checked numeric")).collect();
        if sample_sd(&col) > 0.0 {
            kept.push(j);
            columns.push(col);
        }
    }
    if kept.len() < 2 {
        return Err(Error::InvalidData(format!(
            "{} usable feature columns after preprocessing; at least 2 required",
            kept.len()
        )));
    }
    let values = DMatrix::from_fn(n, kept.len(), |i, j| columns[j][i]);
    let names = kept.iter().map(|&j| header[j].clone()).collect();
    let data = DataMatrix::new(values, names)?;
    let target = target_idx.map(|t| Target {
        name: header[t].clone(),
        values: complete.iter().map(|r| r[t].trim().to_string()).collect(),
    });
    Ok((data, target))
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation, divisor n−1.
pub(crate) fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Per-column centring and scaling learned on one matrix and replayable on
/// another with the same columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl ColumnScaling {
    pub fn fit(x: &DataMatrix) -> Result<Self> {
        let mut means = Vec::with_capacity(x.p());
        let mut sds = Vec::with_capacity(x.p());
        for j in 0..x.p() {
            let col = x.column(j);
            let sd = sample_sd(&col);
            if !(sd > 0.0) {
                return Err(Error::ZeroVariance(x.column_names()[j].clone()));
            }
            means.push(mean(&col));
            sds.push(sd);
        }
        Ok(Self { means, sds })
    }

    pub fn apply(&self, x: &DataMatrix) -> Result<DataMatrix> {
        if x.p() != self.means.len() {
            return Err(Error::DimensionMismatch {
                expected: self.means.len(),
                found: x.p(),
            });
        }
        let values = DMatrix::from_fn(x.n(), x.p(), |i, j| (x.values()[(i, j)] - self.means[j]) / self.sds[j]);
        DataMatrix::new(values, x.column_names().to_vec())
    }
}

/// Centre every column to mean 0 and scale to sample sd 1.
pub fn standardize(x: &DataMatrix) -> Result<DataMatrix> {
    ColumnScaling::fit(x)?.apply(x)
}

/// A sample covariance or correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub matrix: DMatrix<f64>,
    pub n: usize,
    pub is_correlation: bool,
}

impl CovarianceEstimate {
    /// Wrap an externally supplied matrix, checking symmetry and the diagonal.
    pub fn from_matrix(matrix: DMatrix<f64>, n: usize, is_correlation: bool) -> Result<Self> {
        let p = matrix.nrows();
        if matrix.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: matrix.ncols(),
            });
        }
        for i in 0..p {
            if !(matrix[(i, i)] > 0.0) {
                return Err(Error::InvalidData(format!("diagonal entry {i} is not positive")));
            }
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-12 * (1.0 + matrix[(i, j)].abs()) {
                    return Err(Error::InvalidData("covariance matrix is not symmetric".into()));
                }
            }
        }
        Ok(Self {
            matrix,
            n,
            is_correlation,
        })
    }

    pub fn p(&self) -> usize {
        self.matrix.nrows()
    }
}

fn cross_product(z: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = z.shape();
    let mut s = z.transpose() * z;
    s /= (n - 1) as f64;
    // exact symmetry
    for i in 0..p {
        for j in 0..i {
            let v = s[(i, j)];
            s[(j, i)] = v;
        }
    }
    s
}

/// Pearson correlation matrix.
pub fn correlation(x: &DataMatrix) -> Result<CovarianceEstimate> {
    if x.n() < 3 {
        return Err(Error::InvalidData(format!("{} observations; at least 3 required", x.n())));
    }
    let z = standardize(x)?;
    let mut r = cross_product(z.values());
    for i in 0..x.p() {
        r[(i, i)] = 1.0;
    }
    Ok(CovarianceEstimate {
        matrix: r,
        n: x.n(),
        is_correlation: true,
    })
}

/// Sample covariance matrix (divisor n−1).
pub fn covariance(x: &DataMatrix) -> Result<CovarianceEstimate> {
    if x.n() < 3 {
        return Err(Error::InvalidData(format!("{} observations; at least 3 required", x.n())));
    }
    let means: Vec<f64> = (0..x.p()).map(|j| mean(&x.column(j))).collect();
    let c = DMatrix::from_fn(x.n(), x.p(), |i, j| x.values()[(i, j)] - means[j]);
    let s = cross_product(&c);
    for j in 0..x.p() {
        if !(s[(j, j)] > 0.0) {
            return Err(Error::ZeroVariance(x.column_names()[j].clone()));
        }
    }
    Ok(CovarianceEstimate {
        matrix: s,
        n: x.n(),
        is_correlation: false,
    })
}

/// An estimated inverse covariance matrix and the penalty that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionMatrix {
    pub matrix: DMatrix<f64>,
    pub lambda: f64,
}

/// Partial correlations −κ_ij / √(κ_ii κ_jj) with a zero diagonal.
pub fn precision_to_partial(k: &PrecisionMatrix) -> Result<Network> {
    let m = &k.matrix;
    let p = m.nrows();
    if m.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: m.ncols(),
        });
    }
    let diag: Vec<f64> = (0..p).map(|i| m[(i, i)]).collect();
    if let Some(i) = diag.iter().position(|d| !(*d > 0.0)) {
        return Err(Error::NotPositiveDefinite(format!("precision diagonal entry {i} is not positive")));
    }
    let mut w = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in (i + 1)..p {
            let kij = 0.5 * (m[(i, j)] + m[(j, i)]);
            let v = (-kij / (diag[i] * diag[j]).sqrt()).clamp(-1.0, 1.0);
            // avoid -0.0 so exported networks print cleanly
            let v = if v == 0.0 { 0.0 } else { v };
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    Network::new(w, (1..=p).map(|i| format!("v{i}")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn dm(rows: &[&[f64]]) -> DataMatrix {
        let n = rows.len();
        let p = rows[0].len();
        DataMatrix::with_prefix(DMatrix::from_fn(n, p, |i, j| rows[i][j]), "x").unwrap()
    }

    #[test]
    fn semicolon_files() {
        let (x, t) = parse_csv(b"Atr1;Atr2;Class\n0;1;1\n2;3;0\n4;1;1\n", Some("Class")).unwrap();
        assert_eq!(x.column_names(), ["Atr1", "Atr2"]);
        assert_eq!(t.unwrap().values, ["1", "0", "1"]);
    }

    #[test]
    fn listwise_deletion_drops_incomplete_rows() {
        let csv = b"a,b,c\n1,2,3\n4,,6\n7,8,10\n2,5,1\n";
        let (x, t) = parse_csv(csv, None).unwrap();
        assert_eq!(x.n(), 3);
        assert_eq!(x.p(), 3);
        assert!(t.is_none());
        assert_eq!(x.values()[(1, 0)], 7.0);
    }

    #[test]
    fn na_counts_as_missing() {
        let csv = b"a,b\n1,2\nNA,3\n3,1\n5,5\n";
        let (x, _) = parse_csv(csv, None).unwrap();
        assert_eq!(x.n(), 3);
    }

    #[test]
    fn text_columns_dropped_target_kept() {
        let csv = b"name,a,b,c,label\nx,1,2,3,yes\ny,2,1,5,no\nz,3,7,1,yes\nw,0,2,2,no\n";
        let (x, t) = parse_csv(csv, Some("label")).unwrap();
        assert_eq!(x.p(), 3);
        assert_eq!(x.column_names(), ["a", "b", "c"]);
        let t = t.unwrap();
        assert_eq!(t.values, ["yes", "no", "yes", "no"]);
        let (labels, classes) = t.to_labels();
        assert_eq!(classes, ["no", "yes"]);
        assert_eq!(labels, [1, 0, 1, 0]);
    }

    #[test]
    fn too_few_rows_is_an_error() {
        let csv = b"a,b\n1,2\n3,\n4,5\n";
        assert!(matches!(parse_csv(csv, None), Err(Error::InvalidData(_))));
    }

    #[test]
    fn constant_only_columns_are_an_error() {
        let csv = b"a,b,c\n1,1,1\n1,1,2\n1,1,3\n";
        assert!(parse_csv(csv, None).is_err());
    }

    #[test]
    fn missing_target_is_config_error() {
        let csv = b"a,b\n1,2\n2,1\n3,3\n";
        assert!(matches!(parse_csv(csv, Some("y")), Err(Error::Config(_))));
    }

    #[test]
    fn standardize_hand_example() {
        let x = dm(&[&[1.0, 5.0], &[2.0, 1.0], &[3.0, 0.0]]);
        let z = standardize(&x).unwrap();
        let c = z.column(0);
        assert!((c[0] + 1.0).abs() < 1e-15 && c[1].abs() < 1e-15 && (c[2] - 1.0).abs() < 1e-15);
        let again = standardize(&z).unwrap();
        for (a, b) in again.values().iter().zip(z.values().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn standardize_rejects_constant_column() {
        let x = dm(&[&[1.0, 2.0], &[1.0, 3.0], &[1.0, 4.0]]);
        assert!(matches!(standardize(&x), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn correlation_of_linear_pair_is_one() {
        let x = dm(&[&[1.0, 2.0], &[2.0, 4.0], &[3.0, 6.0]]);
        let r = correlation(&x).unwrap();
        assert!(r.is_correlation);
        assert!((r.matrix[(0, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_of_independent_columns_is_small() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let v: DMatrix<f64> = DMatrix::from_fn(10_000, 2, |_, _| StandardNormal.sample(&mut rng));
        let x = DataMatrix::with_prefix(v, "x").unwrap();
        let r = correlation(&x).unwrap();
        assert!(r.matrix[(0, 1)].abs() < 0.05);
    }

    #[test]
    fn two_by_two_partial_equals_correlation() {
        let r = 0.5;
        let s = DMatrix::from_row_slice(2, 2, &[1.0, r, r, 1.0]);
        let k = s.try_inverse().unwrap();
        let net = precision_to_partial(&PrecisionMatrix { matrix: k, lambda: 0.0 }).unwrap();
        assert!((net.weight(0, 1) - 0.5).abs() < 1e-12);
        assert_eq!(net.weight(0, 0), 0.0);
    }

    #[test]
    fn diagonal_precision_gives_empty_network() {
        let k = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let net = precision_to_partial(&PrecisionMatrix { matrix: k, lambda: 0.0 }).unwrap();
        assert!(net.weights().iter().all(|w| *w == 0.0));
    }

    #[test]
    fn chain_precision_partials() {
        // chain 1-2-3: kappa_13 = 0
        let k = DMatrix::from_row_slice(3, 3, &[2.0, -0.8, 0.0, -0.8, 2.5, 0.6, 0.0, 0.6, 1.5]);
        let net = precision_to_partial(&PrecisionMatrix { matrix: k, lambda: 0.0 }).unwrap();
        assert!((net.weight(0, 1) - 0.8 / (2.0f64 * 2.5).sqrt()).abs() < 1e-9);
        assert!((net.weight(1, 2) - (-0.6 / (2.5f64 * 1.5).sqrt())).abs() < 1e-9);
        assert_eq!(net.weight(0, 2), 0.0);
    }

    #[test]
    fn non_positive_precision_diagonal_rejected() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.1, 0.0]);
        assert!(precision_to_partial(&PrecisionMatrix { matrix: k, lambda: 0.0 }).is_err());
    }
}
