//! Tabular data, quantile binning and sampled effect curves.
//!
//! A [`Dataset`] is an immutable column-major table of finite predictors with
//! an optional response column. It doubles as the empirical distribution that
//! every estimator in the crate averages over.

mod bins;
mod curve;

use std::collections::HashSet;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bins::{quantile_bins, BinScheme};
pub use curve::{center, CurveKind, EffectCurve};

/// Named response column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    response: Option<Response>,
}

/// Which CSV column, if any, holds the response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResponseColumn {
    None,
    Last,
    Named(String),
}

impl Dataset {
    pub fn new(
        names: Vec<String>,
        columns: Vec<Vec<f64>>,
        response: Option<Response>,
    ) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::InvalidDataset(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        if columns.is_empty() {
            return Err(Error::InvalidDataset("no predictor columns".into()));
        }
        let n = columns[0].len();
        if n == 0 {
            return Err(Error::InvalidDataset("no rows".into()));
        }
        let mut seen = HashSet::new();
        for (j, name) in names.iter().enumerate() {
            if name.trim().is_empty() {
                return Err(Error::EmptyName(j));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateName(name.clone()));
            }
        }
        if let Some(r) = &response {
            if seen.contains(r.name.as_str()) {
                return Err(Error::DuplicateName(r.name.clone()));
            }
            if r.name.trim().is_empty() {
                return Err(Error::EmptyName(names.len()));
            }
        }
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::InvalidDataset(format!(
                    "column '{}' has {} rows, expected {n}",
                    names[j],
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    row: i,
                    what: format!("column '{}'", names[j]),
                });
            }
        }
        if let Some(r) = &response {
            if r.values.len() != n {
                return Err(Error::InvalidDataset(format!(
                    "response has {} rows, expected {n}",
                    r.values.len()
                )));
            }
            if let Some(i) = r.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    row: i,
                    what: format!("response '{}'", r.name),
                });
            }
        }
        Ok(Dataset {
            names,
            columns,
            response,
        })
    }

    pub fn n(&self) -> usize {
        self.columns[0].len()
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn response(&self) -> Option<&[f64]> {
        self.response.as_ref().map(|r| r.values.as_slice())
    }

    pub fn response_name(&self) -> Option<&str> {
        self.response.as_ref().map(|r| r.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn check_index(&self, j: usize) -> Result<()> {
        if j < self.p() {
            Ok(())
        } else {
            Err(Error::VariableIndex {
                index: j,
                p: self.p(),
            })
        }
    }

    /// Row-major `N x p` copy of the predictors.
    pub fn to_matrix(&self) -> Array2<f64> {
        let (n, p) = (self.n(), self.p());
        Array2::from_shape_fn((n, p), |(i, j)| self.columns[j][i])
    }

    /// Same predictors with the response replaced (e.g. by another model's
    /// scores when fitting a surrogate).
    pub fn with_response(&self, name: &str, values: Vec<f64>) -> Result<Self> {
        Dataset::new(
            self.names.clone(),
            self.columns.clone(),
            Some(Response {
                name: name.to_string(),
                values,
            }),
        )
    }

    pub fn without_response(&self) -> Self {
        Dataset {
            names: self.names.clone(),
            columns: self.columns.clone(),
            response: None,
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let columns = self
            .columns
            .iter()
            .map(|c| rows.iter().map(|&i| c[i]).collect())
            .collect();
        let response = self.response.as_ref().map(|r| Response {
            name: r.name.clone(),
            values: rows.iter().map(|&i| r.values[i]).collect(),
        });
        Dataset::new(self.names.clone(), columns, response)
    }

    /// Reads a comma-separated file with a header row.
    pub fn load_csv(path: impl AsRef<Path>, response: &ResponseColumn) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, response)
    }

    pub fn read_csv<R: std::io::Read>(reader: R, response: &ResponseColumn) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::InvalidDataset(format!("header: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.is_empty() {
            return Err(Error::InvalidDataset("empty header".into()));
        }
        let response_idx = match response {
            ResponseColumn::None => None,
            ResponseColumn::Last => Some(header.len() - 1),
            ResponseColumn::Named(name) => Some(
                header
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| {
                        Error::InvalidDataset(format!("response column '{name}' not found"))
                    })?,
            ),
        };
        let width = header.len();
        let mut raw: Vec<Vec<f64>> = vec![Vec::new(); width];
        for (row, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Parse {
                row,
                column: "?".into(),
                message: e.to_string(),
            })?;
            if record.len() != width {
                return Err(Error::Ragged {
                    row,
                    expected: width,
                    found: record.len(),
                });
            }
            for (col, cell) in record.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row,
                    column: header[col].clone(),
                    message: format!("'{cell}' is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row,
                        column: header[col].clone(),
                        message: format!("'{cell}' is not finite"),
                    });
                }
                raw[col].push(v);
            }
        }
        let mut names = Vec::with_capacity(width);
        let mut columns = Vec::with_capacity(width);
        let mut resp = None;
        for (col, (name, values)) in header.into_iter().zip(raw).enumerate() {
            if Some(col) == response_idx {
                resp = Some(Response { name, values });
            } else {
                names.push(name);
                columns.push(values);
            }
        }
        Dataset::new(names, columns, resp)
    }

    /// Writes predictors then the response (if any). Values use the shortest
    /// representation that parses back to the same `f64`.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header: Vec<&str> = self.names.iter().map(String::as_str).collect();
        if let Some(r) = &self.response {
            header.push(&r.name);
        }
        writeln!(w, "{}", header.join(","))?;
        let mut line = String::new();
        for i in 0..self.n() {
            line.clear();
            for (j, col) in self.columns.iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&col[i].to_string());
            }
            if let Some(r) = &self.response {
                line.push(',');
                line.push_str(&r.values[i].to_string());
            }
            writeln!(w, "{line}")?;
        }
        w.flush()
    }
}
