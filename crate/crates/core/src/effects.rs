//! Effect-curve estimators and the p x p effect matrices.
//!
//! Accumulated curves (ALE, ACE, ATDEV) average per-sample derivatives inside
//! each bin of `x_j` and integrate with bin widths as quadrature weights. The
//! value reported at a bin midpoint is the integral from the lower support
//! edge up to that midpoint, i.e. the preceding bins in full plus half of the
//! current one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{center, quantile_bins, BinScheme, CurveKind, Dataset, EffectCurve};
use crate::dependence::{fit_dependence, DependenceMethod, DependenceModel};
use crate::error::{Error, Result};
use crate::gradients::{GradientOptions, GradientTable};
use crate::model::{predict_checked, Predictor};

/// Midpoint-anchored cumulative sum of `means[b] * widths[b]`.
pub fn accumulate(means: &[f64], widths: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(means.len());
    let mut before = 0.0;
    for (m, w) in means.iter().zip(widths) {
        out.push(before + 0.5 * m * w);
        before += m * w;
    }
    out
}

fn curve(kind: CurveKind, j: usize, k: Option<usize>, bins: &BinScheme, values: Vec<f64>) -> EffectCurve {
    EffectCurve {
        kind,
        j,
        k,
        grid: bins.midpoints.clone(),
        values,
        counts: bins.counts(),
        centered: false,
    }
}

fn check_bins(d: &Dataset, j: usize, bins: &BinScheme) -> Result<()> {
    d.check_index(j)?;
    if bins.var != j || bins.assignment().len() != d.n() {
        return Err(Error::InvalidArgument(format!(
            "bin scheme for variable {} with {} rows used for variable {j} with {} rows",
            bins.var,
            bins.assignment().len(),
            d.n()
        )));
    }
    Ok(())
}

/// Partial dependence on an arbitrary grid: the mean prediction with `x_j`
/// overwritten at every row. Grid points must lie within the observed range.
pub fn pdp_grid(m: &dyn Predictor, d: &Dataset, j: usize, grid: &[f64]) -> Result<EffectCurve> {
    d.check_index(j)?;
    let x = d.column(j);
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if let Some(g) = grid.iter().find(|g| !(**g >= lo && **g <= hi)) {
        return Err(Error::InvalidArgument(format!(
            "grid point {g} outside the observed range [{lo}, {hi}]"
        )));
    }
    let base = d.to_matrix();
    let values = grid
        .par_iter()
        .map(|&g| {
            let mut sweep = base.clone();
            sweep.column_mut(j).fill(g);
            let pred = predict_checked(m, sweep.view())?;
            Ok(pred.iter().sum::<f64>() / pred.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(EffectCurve {
        kind: CurveKind::PD,
        j,
        k: None,
        grid: grid.to_vec(),
        values,
        counts: vec![1; grid.len()],
        centered: false,
    })
}

/// Partial dependence on the bin midpoints, weighted by bin counts.
pub fn pdp(m: &dyn Predictor, d: &Dataset, j: usize, bins: &BinScheme) -> Result<EffectCurve> {
    check_bins(d, j, bins)?;
    let mut c = pdp_grid(m, d, j, &bins.midpoints)?;
    c.counts = bins.counts();
    Ok(c)
}

/// Per-bin mean of predictions at the observed rows.
pub fn marginal(m: &dyn Predictor, d: &Dataset, j: usize, bins: &BinScheme) -> Result<EffectCurve> {
    check_bins(d, j, bins)?;
    let pred = predict_checked(m, d.to_matrix().view())?;
    Ok(marginal_from_values(&pred, j, bins))
}

/// Per-bin mean of the observed response.
pub fn marginal_response(d: &Dataset, j: usize, bins: &BinScheme) -> Result<EffectCurve> {
    check_bins(d, j, bins)?;
    let y = d
        .response()
        .ok_or_else(|| Error::InvalidDataset("response-based marginal needs a response column".into()))?;
    Ok(marginal_from_values(y, j, bins))
}

/// Marginal curve from precomputed per-row values (predictions or response).
pub fn marginal_from_values(values: &[f64], j: usize, bins: &BinScheme) -> EffectCurve {
    curve(CurveKind::Marginal, j, None, bins, bins.bin_means(values))
}

/// ALE of `x_j` from a precomputed gradient table.
pub fn ale_from(table: &GradientTable, j: usize, bins: &BinScheme) -> EffectCurve {
    let means = bins.bin_means(table.values(j));
    curve(CurveKind::ALE, j, None, bins, accumulate(&means, &bins.widths()))
}

pub fn ale(m: &dyn Predictor, d: &Dataset, j: usize, bins: &BinScheme) -> Result<EffectCurve> {
    check_bins(d, j, bins)?;
    let table = GradientTable::compute(m, d, GradientOptions::default())?;
    Ok(ale_from(&table, j, bins))
}

fn check_dep(d: &Dataset, k: usize, j: usize, dep: &DependenceModel) -> Result<()> {
    d.check_index(k)?;
    if k == j {
        return Err(Error::InvalidArgument(format!("cross effect needs k != j (both {j})")));
    }
    if dep.anchor() != j || dep.p() != d.p() {
        return Err(Error::InvalidArgument(format!(
            "dependence model anchored at {} used for variable {j}",
            dep.anchor()
        )));
    }
    Ok(())
}

/// ACE of `x_j` transmitted through `x_k`: accumulated per-bin mean of
/// `df/dx_k * m_k'(x_j)`.
pub fn ace_from(
    table: &GradientTable,
    d: &Dataset,
    k: usize,
    j: usize,
    dep: &DependenceModel,
    bins: &BinScheme,
) -> Result<EffectCurve> {
    check_dep(d, k, j, dep)?;
    let xj = d.column(j);
    let weighted: Vec<f64> = table
        .values(k)
        .iter()
        .zip(xj)
        .map(|(g, &x)| g * dep.slope_at(k, x))
        .collect();
    let means = bins.bin_means(&weighted);
    Ok(curve(
        CurveKind::ACE,
        j,
        Some(k),
        bins,
        accumulate(&means, &bins.widths()),
    ))
}

pub fn ace(
    m: &dyn Predictor,
    d: &Dataset,
    k: usize,
    j: usize,
    dep: &DependenceModel,
    bins: &BinScheme,
) -> Result<EffectCurve> {
    check_bins(d, j, bins)?;
    check_dep(d, k, j, dep)?;
    let table = GradientTable::compute(m, d, GradientOptions::default())?;
    ace_from(&table, d, k, j, dep, bins)
}

/// ATDEV of `x_j`: the ALE plus every ACE term, summed pointwise.
pub fn atdev_from(
    table: &GradientTable,
    d: &Dataset,
    j: usize,
    dep: &DependenceModel,
    bins: &BinScheme,
) -> Result<EffectCurve> {
    let mut total = ale_from(table, j, bins);
    for k in (0..d.p()).filter(|&k| k != j) {
        let c = ace_from(table, d, k, j, dep, bins)?;
        for (t, v) in total.values.iter_mut().zip(&c.values) {
            *t += v;
        }
    }
    total.kind = CurveKind::ATDEV;
    Ok(total)
}

pub fn atdev(
    m: &dyn Predictor,
    d: &Dataset,
    j: usize,
    dep: &DependenceModel,
    bins: &BinScheme,
) -> Result<EffectCurve> {
    check_bins(d, j, bins)?;
    let table = GradientTable::compute(m, d, GradientOptions::default())?;
    atdev_from(&table, d, j, dep, bins)
}

/// Per-bin mean of `df/dx_k` over bins of `x_j`, without integration.
pub fn le_from(table: &GradientTable, k: usize, j: usize, bins: &BinScheme) -> EffectCurve {
    let kind = if k == j { CurveKind::LE } else { CurveKind::LEcross };
    let means = bins.bin_means(table.values(k));
    curve(kind, j, (k != j).then_some(k), bins, means)
}

pub fn le_curve(m: &dyn Predictor, d: &Dataset, k: usize, j: usize, bins: &BinScheme) -> Result<EffectCurve> {
    check_bins(d, j, bins)?;
    d.check_index(k)?;
    let table = GradientTable::compute(m, d, GradientOptions::default())?;
    Ok(le_from(&table, k, j, bins))
}

/// Quantile bins for every column.
pub fn column_bins(d: &Dataset, k: usize) -> Result<Vec<BinScheme>> {
    (0..d.p()).map(|j| quantile_bins(d, j, k)).collect()
}

/// One dependence model per anchor column.
pub fn column_dependence(d: &Dataset, method: DependenceMethod, bins: usize) -> Result<Vec<DependenceModel>> {
    (0..d.p()).map(|j| fit_dependence(d, j, method, bins)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatrixKind {
    /// ALE on the diagonal, ACE off it.
    ATDEV,
    /// Conditional mean derivatives.
    LE,
}

impl MatrixKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MatrixKind::ATDEV => "ATDEV",
            MatrixKind::LE => "LE",
        }
    }
}

/// `cells[k][j]` is the curve of row variable `k` over column variable `j`.
/// Every stored curve is centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectMatrix {
    pub kind: MatrixKind,
    pub names: Vec<String>,
    pub cells: Vec<Vec<Option<EffectCurve>>>,
    /// Centered ATDEV curve per column (ATDEV kind only).
    pub column_sums: Option<Vec<EffectCurve>>,
}

impl EffectMatrix {
    pub fn p(&self) -> usize {
        self.names.len()
    }

    pub fn cell(&self, k: usize, j: usize) -> Option<&EffectCurve> {
        self.cells.get(k)?.get(j)?.as_ref()
    }

    pub fn column_sum(&self, j: usize) -> Option<&EffectCurve> {
        self.column_sums.as_ref()?.get(j)
    }

    /// Builds the matrix from a gradient table. `deps` is required for the
    /// ATDEV kind and ignored for LE.
    pub fn from_table(
        table: &GradientTable,
        d: &Dataset,
        kind: MatrixKind,
        deps: &[DependenceModel],
        bins: &[BinScheme],
    ) -> Result<Self> {
        let p = d.p();
        if bins.len() != p || table.p() != p {
            return Err(Error::InvalidArgument(format!(
                "need {p} bin schemes and gradients, got {} and {}",
                bins.len(),
                table.p()
            )));
        }
        if kind == MatrixKind::ATDEV && deps.len() != p {
            return Err(Error::InvalidArgument(format!(
                "ATDEV matrix needs {p} dependence models, got {}",
                deps.len()
            )));
        }
        for (j, b) in bins.iter().enumerate() {
            check_bins(d, j, b)?;
        }
        let flat = (0..p * p)
            .into_par_iter()
            .map(|idx| {
                let (k, j) = (idx / p, idx % p);
                let c = match kind {
                    MatrixKind::ATDEV if k == j => ale_from(table, j, &bins[j]),
                    MatrixKind::ATDEV => ace_from(table, d, k, j, &deps[j], &bins[j])?,
                    MatrixKind::LE => le_from(table, k, j, &bins[j]),
                };
                Ok(center(&c))
            })
            .collect::<Result<Vec<EffectCurve>>>()?;
        let mut cells: Vec<Vec<Option<EffectCurve>>> = vec![Vec::with_capacity(p); p];
        for (idx, c) in flat.into_iter().enumerate() {
            cells[idx / p].push(Some(c));
        }
        let column_sums = (kind == MatrixKind::ATDEV).then(|| {
            (0..p)
                .map(|j| {
                    let mut total = cells[j][j].clone().expect("diagonal present");
                    for k in (0..p).filter(|&k| k != j) {
                        let c = cells[k][j].as_ref().expect("cell present");
                        for (t, v) in total.values.iter_mut().zip(&c.values) {
                            *t += v;
                        }
                    }
                    total.kind = CurveKind::ATDEV;
                    total
                })
                .collect()
        });
        Ok(EffectMatrix {
            kind,
            names: d.names().to_vec(),
            cells,
            column_sums,
        })
    }
}

/// Computes gradients once and builds the full matrix.
pub fn effect_matrix(
    m: &dyn Predictor,
    d: &Dataset,
    kind: MatrixKind,
    deps: &[DependenceModel],
    bins: &[BinScheme],
) -> Result<EffectMatrix> {
    let table = GradientTable::compute(m, d, GradientOptions::default())?;
    EffectMatrix::from_table(&table, d, kind, deps, bins)
}
