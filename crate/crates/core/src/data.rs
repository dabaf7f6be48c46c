//! Observations `(X, A, Y)` and their CSV / JSON persistence.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Row-major `n × d` covariate matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariates {
    d: usize,
    values: Vec<f64>,
}

impl Covariates {
    pub fn new(d: usize, values: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("covariate dimension must be at least 1"));
        }
        if !values.len().is_multiple_of(d) {
            return Err(Error::invalid(format!(
                "{} values do not fill rows of width {d}",
                values.len()
            )));
        }
        Ok(Self { d, values })
    }

    /// One-dimensional covariates from a column.
    pub fn from_column(column: Vec<f64>) -> Self {
        Self { d: 1, values: column }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(1, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * d);
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: r.len() });
            }
            values.extend_from_slice(r);
        }
        Covariates::new(d, values)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn select(&self, idx: &[usize]) -> Covariates {
        let mut values = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Covariates { d: self.d, values }
    }
}

/// `n` observations of `(X ∈ R^d, A, Y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Covariates,
    pub a: Vec<f64>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Covariates, a: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if a.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: a.len() });
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: y.len() });
        }
        let finite = x.as_slice().iter().chain(&a).chain(&y).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Domain("dataset contains non-finite values".into()));
        }
        Ok(Self { x, a, y })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(idx),
            a: idx.iter().map(|&i| self.a[i]).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
        }
    }

    /// Short hex digest of the exact bit patterns of the data.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim() as u64).to_le_bytes());
        for v in self.x.as_slice().iter().chain(&self.a).chain(&self.y) {
            h.update(v.to_bits().to_le_bytes());
        }
        let out = h.finalize();
        out.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn header(d: usize) -> Vec<String> {
        let mut h: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
        h.push("a".into());
        h.push("y".into());
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(Self::header(self.dim()))?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.x.row(i).iter().map(|v| v.to_string()).collect();
            rec.push(self.a[i].to_string());
            rec.push(self.y[i].to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(File::create(path)?)
    }

    /// Parse the `x1,...,xd,a,y` schema. Row numbers in errors are file
    /// line numbers (the header is line 1).
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rdr.headers()?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        if cols.len() < 3 {
            return Err(Error::Data {
                row: 1,
                field: "header".into(),
                message: format!("expected x1,...,xd,a,y; got {}", cols.join(",")),
            });
        }
        let d = cols.len() - 2;
        let expected = Self::header(d);
        for (c, e) in cols.iter().zip(&expected) {
            if c != e {
                return Err(Error::Data {
                    row: 1,
                    field: (*c).to_string(),
                    message: format!("expected column `{e}`"),
                });
            }
        }
        let mut x = Vec::new();
        let mut a = Vec::new();
        let mut y = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let line = k + 2;
            let rec = rec.map_err(|e| Error::Data {
                row: line,
                field: "record".into(),
                message: e.to_string(),
            })?;
            if rec.len() != d + 2 {
                return Err(Error::Data {
                    row: line,
                    field: "record".into(),
                    message: format!("expected {} fields, got {}", d + 2, rec.len()),
                });
            }
            for (j, cell) in rec.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| Error::Data {
                    row: line,
                    field: expected[j].clone(),
                    message: format!("`{cell}` is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Data {
                        row: line,
                        field: expected[j].clone(),
                        message: "value is not finite".into(),
                    });
                }
                match j {
                    j if j < d => x.push(v),
                    j if j == d => a.push(v),
                    _ => y.push(v),
                }
            }
        }
        Dataset::new(Covariates::new(d, x)?, a, y)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::read_csv(File::open(path)?)
    }
}

/// JSON sidecar stored next to a generated CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub dgp: String,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub noise_variance: f64,
    pub psi_true: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holder: Option<HolderMetadata>,
    pub rng: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderMetadata {
    pub s: f64,
    pub n_ref: usize,
    pub amplitude: f64,
    pub function_seed: u64,
    pub bumps: usize,
    pub holder_constant: f64,
}

impl DatasetMetadata {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(File::open(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        let x = Covariates::from_rows(&[vec![0.1, 0.2], vec![0.3, 0.4], vec![0.5, 0.6]]).unwrap();
        Dataset::new(x, vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 1e-17]).unwrap()
    }

    #[test]
    fn csv_roundtrip_is_bit_exact() {
        let ds = tiny();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x1,x2,a,y\n"));
        let back = Dataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.digest(), ds.digest());
    }

    #[test]
    fn non_numeric_cell_reports_line_and_field() {
        let text = "x1,a,y\n0.1,1,2\n0.2,oops,3\n";
        match Dataset::read_csv(text.as_bytes()) {
            Err(Error::Data { row, field, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(field, "a");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_header_is_rejected() {
        let text = "x1,b,y\n0.1,1,2\n";
        assert!(matches!(Dataset::read_csv(text.as_bytes()), Err(Error::Data { row: 1, .. })));
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let x = Covariates::from_column(vec![0.1, 0.2]);
        assert!(Dataset::new(x, vec![1.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn subset_keeps_rows_together() {
        let ds = tiny();
        let s = ds.subset(&[2, 0]);
        assert_eq!(s.x.row(0), &[0.5, 0.6]);
        assert_eq!(s.a, vec![3.0, 1.0]);
    }
}
