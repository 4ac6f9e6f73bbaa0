//! File formats: versioned JSON documents and flat CSV tables.
//!
//! Every JSON document carries `"schema": "atdev/1"` next to its payload.
//! Indices (`j`, `k`, `i`) are zero-based column positions.

use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::{CurveKind, EffectCurve};
use crate::dependence::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::effects::EffectMatrix;
use crate::importance::ImportanceReport;
use crate::simgen::SimSpec;

pub const SCHEMA: &str = "atdev/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versioned<T> {
    pub schema: String,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Versioned<T> {
    pub fn new(body: T) -> Self {
        Versioned {
            schema: SCHEMA.to_string(),
            body,
        }
    }
}

/// Settings a curve or matrix was produced with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub bins: usize,
    pub gradient_method: String,
    pub dependence_method: String,
    pub centered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveDocument {
    pub name: String,
    pub meta: RunMeta,
    pub curve: EffectCurve,
}

/// Curves sharing one x-axis, meant to be drawn on top of each other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayBundle {
    pub name: String,
    pub j: usize,
    /// `atdev_marginal` or `pd_marginal_ale`.
    pub group: String,
    pub meta: RunMeta,
    pub curves: Vec<EffectCurve>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatScale {
    /// Values in [-1, 1] (correlations).
    Signed,
    /// Values >= 0; `brightness` is value / max.
    Nonnegative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatMapData {
    pub names: Vec<String>,
    pub scale: HeatScale,
    /// Row-major `p x p`.
    pub values: Vec<Vec<f64>>,
    /// Display intensity in [0, 1] for nonnegative maps, |r| for signed maps.
    pub brightness: Vec<Vec<f64>>,
}

impl HeatMapData {
    pub fn correlation(c: &CorrelationMatrix) -> Self {
        HeatMapData {
            names: c.names.clone(),
            scale: HeatScale::Signed,
            brightness: c
                .values
                .iter()
                .map(|row| row.iter().map(|v| v.abs()).collect())
                .collect(),
            values: c.values.clone(),
        }
    }

    pub fn importance(r: &ImportanceReport) -> Self {
        let max = r.v.iter().flatten().copied().fold(0.0_f64, f64::max);
        HeatMapData {
            names: r.names.clone(),
            scale: HeatScale::Nonnegative,
            brightness: r
                .v
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|v| if max > 0.0 { v / max } else { 0.0 })
                        .collect()
                })
                .collect(),
            values: r.v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarData {
    pub label: String,
    pub names: Vec<String>,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standard_errors: Option<Vec<f64>>,
}

/// Raw `(x_j, df/dx_k)` pairs behind one LE cell, possibly subsampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterCell {
    pub k: usize,
    pub j: usize,
    pub total_points: usize,
    pub x: Vec<f64>,
    pub derivative: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub k: usize,
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Equal-width histogram over the observed range.
    pub fn equal_width(k: usize, values: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if values.is_empty() {
            (0.0, 1.0)
        } else if lo == hi {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        };
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0; bins];
        for &v in values {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Histogram { k, edges, counts }
    }
}

/// Sidecar written next to a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationDocument {
    pub spec: SimSpec,
    pub theoretical_r2: f64,
    pub correlation: CorrelationMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDocument {
    pub meta: RunMeta,
    pub matrix: EffectMatrix,
}

/// LE scatter cells; every cell uses the same seeded subset of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterDocument {
    pub cap: usize,
    pub seed: u64,
    pub cells: Vec<ScatterCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramDocument {
    pub names: Vec<String>,
    pub histograms: Vec<Histogram>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceDocument {
    pub meta: RunMeta,
    pub report: ImportanceReport,
}

pub fn to_json<T: Serialize>(body: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Versioned::new(body))?;
    s.push('\n');
    Ok(s)
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let v: Versioned<T> = serde_json::from_str(text)?;
    if v.schema != SCHEMA {
        return Err(Error::InvalidArgument(format!(
            "unsupported schema '{}' (expected '{SCHEMA}')",
            v.schema
        )));
    }
    Ok(v.body)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, body: &T) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_json(body)?).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}

#[derive(Debug, Serialize, Deserialize)]
struct CurveRow {
    kind: String,
    j: usize,
    k: Option<usize>,
    grid: f64,
    value: f64,
    count: usize,
}

/// Long-format CSV: `kind,j,k,grid,value,count`, one row per grid point.
/// `k` is empty for curves without a row variable.
pub fn write_curves_csv<W: Write>(w: W, curves: &[EffectCurve]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for c in curves {
        for i in 0..c.len() {
            out.serialize(CurveRow {
                kind: c.kind.as_str().to_string(),
                j: c.j,
                k: c.k,
                grid: c.grid[i],
                value: c.values[i],
                count: c.counts[i],
            })
            .map_err(csv_error)?;
        }
    }
    out.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Reads curves back from [`write_curves_csv`] output. Consecutive rows with
/// the same `(kind, j, k)` form one curve. `centered` is not stored in the
/// CSV and is set by the caller.
pub fn read_curves_csv<R: Read>(r: R, centered: bool) -> Result<Vec<EffectCurve>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut curves: Vec<EffectCurve> = Vec::new();
    for row in rdr.deserialize() {
        let row: CurveRow = row.map_err(csv_error)?;
        let kind = CurveKind::parse(&row.kind)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown curve kind '{}'", row.kind)))?;
        let same = curves
            .last()
            .is_some_and(|c| c.kind == kind && c.j == row.j && c.k == row.k);
        if !same {
            curves.push(EffectCurve {
                kind,
                j: row.j,
                k: row.k,
                grid: Vec::new(),
                values: Vec::new(),
                counts: Vec::new(),
                centered,
            });
        }
        let c = curves.last_mut().expect("pushed above");
        c.grid.push(row.grid);
        c.values.push(row.value);
        c.counts.push(row.count);
    }
    Ok(curves)
}

/// Flat `i,j,v` table of the importance matrix.
pub fn write_importance_csv<W: Write>(w: W, r: &ImportanceReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["i", "j", "v"]).map_err(csv_error)?;
    for (i, row) in r.v.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out.write_record([i.to_string(), j.to_string(), v.to_string()])
                .map_err(csv_error)?;
        }
    }
    out.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Square CSV with a leading name column.
pub fn write_correlation_csv<W: Write>(w: W, c: &CorrelationMatrix) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec![String::new()];
    header.extend(c.names.iter().cloned());
    out.write_record(&header).map_err(csv_error)?;
    for (name, row) in c.names.iter().zip(&c.values) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(f64::to_string));
        out.write_record(&rec).map_err(csv_error)?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_correlation_csv<R: Read>(r: R) -> Result<CorrelationMatrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let names: Vec<String> = rdr
        .headers()
        .map_err(csv_error)?
        .iter()
        .skip(1)
        .map(str::to_string)
        .collect();
    let mut values = Vec::with_capacity(names.len());
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let row = rec
            .iter()
            .skip(1)
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::InvalidArgument(format!("correlation entry '{s}': {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        values.push(row);
    }
    if values.len() != names.len() || values.iter().any(|r| r.len() != names.len()) {
        return Err(Error::InvalidArgument("correlation CSV is not square".into()));
    }
    Ok(CorrelationMatrix { names, values })
}

fn csv_error(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("csv: {e}"))
}
