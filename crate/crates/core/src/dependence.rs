//! Dependence models `x_k = m_k(x_j) + e_k` and Pearson correlations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{quantile_bins, Dataset};
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependenceMethod {
    Linear,
    LocalLinear,
}

impl DependenceMethod {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(DependenceMethod::Linear),
            "local_linear" | "local-linear" => Ok(DependenceMethod::LocalLinear),
            other => Err(Error::InvalidArgument(format!(
                "unknown dependence method '{other}' (expected linear or local_linear)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DependenceMethod::Linear => "linear",
            DependenceMethod::LocalLinear => "local_linear",
        }
    }
}

/// Fit of one `x_k` against the anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DependenceFit {
    /// The anchor itself.
    Anchor,
    Linear {
        slope: f64,
        intercept: f64,
    },
    /// Separate OLS line inside each anchor bin. `edges` are the bin edges
    /// on the anchor; outside them the outer bins are used.
    LocalLinear {
        edges: Vec<f64>,
        slopes: Vec<f64>,
        intercepts: Vec<f64>,
    },
}

impl DependenceFit {
    fn segment(edges: &[f64], x: f64) -> usize {
        let k = edges.len() - 1;
        edges[1..k].partition_point(|&e| e <= x).min(k - 1)
    }

    pub fn slope_at(&self, x: f64) -> f64 {
        match self {
            DependenceFit::Anchor => 1.0,
            DependenceFit::Linear { slope, .. } => *slope,
            DependenceFit::LocalLinear { edges, slopes, .. } => slopes[Self::segment(edges, x)],
        }
    }

    pub fn value_at(&self, x: f64) -> f64 {
        match self {
            DependenceFit::Anchor => x,
            DependenceFit::Linear { slope, intercept } => intercept + slope * x,
            DependenceFit::LocalLinear {
                edges,
                slopes,
                intercepts,
            } => {
                let b = Self::segment(edges, x);
                intercepts[b] + slopes[b] * x
            }
        }
    }
}

/// All fits `m_k(x_j)` for one anchor `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceModel {
    anchor: usize,
    method: DependenceMethod,
    fits: Vec<DependenceFit>,
    residual_variance: Vec<f64>,
    slope_se: Vec<f64>,
}

impl DependenceModel {
    /// Zero-slope model: every other column treated as independent of `anchor`.
    pub fn independent(anchor: usize, p: usize) -> Self {
        let fits = (0..p)
            .map(|k| {
                if k == anchor {
                    DependenceFit::Anchor
                } else {
                    DependenceFit::Linear {
                        slope: 0.0,
                        intercept: 0.0,
                    }
                }
            })
            .collect();
        DependenceModel {
            anchor,
            method: DependenceMethod::Linear,
            fits,
            residual_variance: vec![0.0; p],
            slope_se: vec![0.0; p],
        }
    }

    pub fn anchor(&self) -> usize {
        self.anchor
    }

    pub fn method(&self) -> DependenceMethod {
        self.method
    }

    pub fn p(&self) -> usize {
        self.fits.len()
    }

    pub fn fit(&self, k: usize) -> &DependenceFit {
        &self.fits[k]
    }

    /// `m_k'(x)`; 1 for the anchor itself.
    pub fn slope_at(&self, k: usize, x: f64) -> f64 {
        self.fits[k].slope_at(x)
    }

    pub fn value_at(&self, k: usize, x: f64) -> f64 {
        self.fits[k].value_at(x)
    }

    /// Global OLS slope and intercept, for linear fits.
    pub fn linear(&self, k: usize) -> Option<(f64, f64)> {
        match self.fits[k] {
            DependenceFit::Linear { slope, intercept } => Some((slope, intercept)),
            _ => None,
        }
    }

    pub fn residual_variance(&self, k: usize) -> f64 {
        self.residual_variance[k]
    }

    /// Standard error of the global OLS slope (linear fits only).
    pub fn slope_se(&self, k: usize) -> f64 {
        self.slope_se[k]
    }
}

struct Ols {
    slope: f64,
    intercept: f64,
}

fn ols(x: &[f64], y: &[f64]) -> Option<Ols> {
    let vx = stats::variance(x);
    if !(vx > 0.0) {
        return None;
    }
    let slope = stats::covariance(x, y) / vx;
    let intercept = stats::mean(y) - slope * stats::mean(x);
    Some(Ols { slope, intercept })
}

/// Fits `m_k` for every `k != j`.
///
/// `bins` is only used by [`DependenceMethod::LocalLinear`]: the anchor is
/// cut into that many quantile bins and an OLS line is fitted inside each.
/// A bin whose anchor values are all tied falls back to the global line.
pub fn fit_dependence(
    d: &Dataset,
    j: usize,
    method: DependenceMethod,
    bins: usize,
) -> Result<DependenceModel> {
    d.check_index(j)?;
    let xj = d.column(j);
    if !(stats::variance(xj) > 0.0) {
        return Err(Error::DegenerateVariable(d.names()[j].clone()));
    }
    let scheme = match method {
        DependenceMethod::LocalLinear => Some(quantile_bins(d, j, bins)?),
        DependenceMethod::Linear => None,
    };
    let n = d.n() as f64;
    let per_k: Vec<(DependenceFit, f64, f64)> = (0..d.p())
        .into_par_iter()
        .map(|k| {
            if k == j {
                return (DependenceFit::Anchor, 0.0, 0.0);
            }
            let xk = d.column(k);
            let global = ols(xj, xk).expect("anchor variance checked above");
            let resid: Vec<f64> = xj
                .iter()
                .zip(xk)
                .map(|(a, b)| b - global.intercept - global.slope * a)
                .collect();
            let rv = stats::variance(&resid);
            let se = if d.n() > 2 {
                (rv * n / (n - 2.0) / (n * stats::variance(xj))).sqrt()
            } else {
                0.0
            };
            let fit = match &scheme {
                None => DependenceFit::Linear {
                    slope: global.slope,
                    intercept: global.intercept,
                },
                Some(s) => {
                    let mut slopes = Vec::with_capacity(s.k());
                    let mut intercepts = Vec::with_capacity(s.k());
                    for rows in &s.members {
                        let bx: Vec<f64> = rows.iter().map(|&i| xj[i]).collect();
                        let by: Vec<f64> = rows.iter().map(|&i| xk[i]).collect();
                        let local = ols(&bx, &by).unwrap_or(Ols {
                            slope: global.slope,
                            intercept: global.intercept,
                        });
                        slopes.push(local.slope);
                        intercepts.push(local.intercept);
                    }
                    DependenceFit::LocalLinear {
                        edges: s.edges.clone(),
                        slopes,
                        intercepts,
                    }
                }
            };
            let rv = match &fit {
                DependenceFit::LocalLinear { .. } => {
                    let r: Vec<f64> = xj
                        .iter()
                        .zip(xk)
                        .map(|(a, b)| b - fit.value_at(*a))
                        .collect();
                    stats::variance(&r)
                }
                _ => rv,
            };
            (fit, rv, se)
        })
        .collect();
    let mut fits = Vec::with_capacity(d.p());
    let mut residual_variance = Vec::with_capacity(d.p());
    let mut slope_se = Vec::with_capacity(d.p());
    for (f, rv, se) in per_k {
        fits.push(f);
        residual_variance.push(rv);
        slope_se.push(se);
    }
    Ok(DependenceModel {
        anchor: j,
        method,
        fits,
        residual_variance,
        slope_se,
    })
}

/// Symmetric matrix of Pearson correlations with unit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    /// Row-major `p x p`.
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn p(&self) -> usize {
        self.names.len()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a][b]
    }
}

pub fn corr_matrix(d: &Dataset) -> Result<CorrelationMatrix> {
    let p = d.p();
    let sds: Vec<f64> = (0..p).map(|j| stats::std_dev(d.column(j))).collect();
    if let Some(j) = sds.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::DegenerateVariable(d.names()[j].clone()));
    }
    let mut values = vec![vec![0.0; p]; p];
    for a in 0..p {
        values[a][a] = 1.0;
        for b in (a + 1)..p {
            let r = stats::pearson(d.column(a), d.column(b));
            values[a][b] = r;
            values[b][a] = r;
        }
    }
    Ok(CorrelationMatrix {
        names: d.names().to_vec(),
        values,
    })
}
