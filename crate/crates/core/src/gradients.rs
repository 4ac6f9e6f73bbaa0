//! Per-sample partial derivatives and total derivatives.
//!
//! Derivatives are only ever evaluated at observed rows. Models with exact
//! gradients use them; everything else goes through central differences with
//! a step proportional to the column's standard deviation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::dependence::DependenceModel;
use crate::error::{Error, Result};
use crate::model::{predict_checked, Predictor};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMethod {
    Analytic,
    CentralFd,
}

/// `df/dx_j` at each observed row.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeField {
    pub j: usize,
    pub values: Vec<f64>,
    pub method: DerivativeMethod,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GradientOptions {
    /// Use central differences even when an analytic gradient exists.
    pub force_fd: bool,
    /// Replaces the default step `max(1e-4 * sd(x_j), 1e-8)`.
    pub step: Option<f64>,
}

/// Default central-difference step for a column.
pub fn fd_step(x: &[f64]) -> f64 {
    (1e-4 * stats::std_dev(x)).max(1e-8)
}

fn check_finite(values: &[f64], j: usize) -> Result<()> {
    if let Some(row) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row,
            what: format!("derivative with respect to variable {j}"),
        });
    }
    Ok(())
}

fn central_difference(
    m: &dyn Predictor,
    d: &Dataset,
    j: usize,
    step: Option<f64>,
) -> Result<DerivativeField> {
    let h = step.unwrap_or_else(|| fd_step(d.column(j)));
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("finite-difference step {h}")));
    }
    let mut x = d.to_matrix();
    x.column_mut(j).mapv_inplace(|v| v + h);
    let up = predict_checked(m, x.view())?;
    x.column_mut(j)
        .iter_mut()
        .zip(d.column(j))
        .for_each(|(dst, &v)| *dst = v - h);
    let down = predict_checked(m, x.view())?;
    let values: Vec<f64> = up
        .iter()
        .zip(&down)
        .map(|(a, b)| (a - b) / (2.0 * h))
        .collect();
    check_finite(&values, j)?;
    Ok(DerivativeField {
        j,
        values,
        method: DerivativeMethod::CentralFd,
    })
}

/// `df/dx_j` at every row of `d`, analytic when the model supports it.
pub fn partial_derivatives(m: &dyn Predictor, d: &Dataset, j: usize) -> Result<DerivativeField> {
    partial_derivatives_with(m, d, j, GradientOptions::default())
}

pub fn partial_derivatives_with(
    m: &dyn Predictor,
    d: &Dataset,
    j: usize,
    opts: GradientOptions,
) -> Result<DerivativeField> {
    d.check_index(j)?;
    if m.arity() != d.p() {
        return Err(Error::WidthMismatch {
            expected: m.arity(),
            found: d.p(),
        });
    }
    if m.has_analytic_gradient() && !opts.force_fd {
        let g = m.gradient(d.to_matrix().view())?;
        let values = g.column(j).to_vec();
        check_finite(&values, j)?;
        return Ok(DerivativeField {
            j,
            values,
            method: DerivativeMethod::Analytic,
        });
    }
    central_difference(m, d, j, opts.step)
}

/// Partial derivatives for every column, computed once and shared by the
/// ALE, ACE, LE and DGSM estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTable {
    fields: Vec<DerivativeField>,
}

impl GradientTable {
    pub fn compute(m: &dyn Predictor, d: &Dataset, opts: GradientOptions) -> Result<Self> {
        if m.arity() != d.p() {
            return Err(Error::WidthMismatch {
                expected: m.arity(),
                found: d.p(),
            });
        }
        let fields = if m.has_analytic_gradient() && !opts.force_fd {
            let g = m.gradient(d.to_matrix().view())?;
            (0..d.p())
                .map(|j| {
                    let values = g.column(j).to_vec();
                    check_finite(&values, j)?;
                    Ok(DerivativeField {
                        j,
                        values,
                        method: DerivativeMethod::Analytic,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            (0..d.p())
                .into_par_iter()
                .map(|j| central_difference(m, d, j, opts.step))
                .collect::<Result<Vec<_>>>()?
        };
        Ok(GradientTable { fields })
    }

    pub fn from_fields(fields: Vec<DerivativeField>) -> Self {
        GradientTable { fields }
    }

    pub fn p(&self) -> usize {
        self.fields.len()
    }

    pub fn field(&self, j: usize) -> &DerivativeField {
        &self.fields[j]
    }

    pub fn values(&self, j: usize) -> &[f64] {
        &self.fields[j].values
    }

    pub fn method(&self) -> DerivativeMethod {
        self.fields
            .first()
            .map(|f| f.method)
            .unwrap_or(DerivativeMethod::Analytic)
    }
}

/// `df/dx_j + sum_{k != j} df/dx_k * m_k'(x_j)` at each row.
pub fn total_derivatives(
    m: &dyn Predictor,
    d: &Dataset,
    j: usize,
    dep: &DependenceModel,
) -> Result<Vec<f64>> {
    let table = GradientTable::compute(m, d, GradientOptions::default())?;
    total_from_table(&table, d, j, dep)
}

pub fn total_from_table(
    table: &GradientTable,
    d: &Dataset,
    j: usize,
    dep: &DependenceModel,
) -> Result<Vec<f64>> {
    d.check_index(j)?;
    if dep.anchor() != j {
        return Err(Error::InvalidArgument(format!(
            "dependence model anchored at {} used for variable {j}",
            dep.anchor()
        )));
    }
    let xj = d.column(j);
    let mut total = table.values(j).to_vec();
    for k in (0..d.p()).filter(|&k| k != j) {
        let dk = table.values(k);
        for (i, t) in total.iter_mut().enumerate() {
            *t += dk[i] * dep.slope_at(k, xj[i]);
        }
    }
    Ok(total)
}

/// Gradient-check error `|a - b| / max(|a|, |b|, 1)`: relative for large
/// derivatives, absolute below unit scale where finite differences carry an
/// absolute `O(h^2)` error.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dependence::{fit_dependence, DependenceMethod};
    use crate::model::{AnalyticModel, ModelId};
    use crate::simgen::{generate, CaseId, SimSpec};

    fn sim(case: CaseId, n: usize, seed: u64) -> Dataset {
        generate(&SimSpec {
            case,
            n,
            noise_sd: 0.1,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn constant_gradient_of_linear_model() {
        let d = sim(CaseId::Indep61, 200, 1);
        let d = Dataset::new(d.names()[..2].to_vec(), d.columns()[..2].to_vec(), None).unwrap();
        let m = AnalyticModel::additive_linear(&[2.0, 5.0]).unwrap();
        let f = partial_derivatives(&m, &d, 0).unwrap();
        assert_eq!(f.method, DerivativeMethod::Analytic);
        assert!(f.values.iter().all(|&v| v == 2.0));
        let fd = partial_derivatives_with(&m, &d, 0, GradientOptions { force_fd: true, step: None }).unwrap();
        assert_eq!(fd.method, DerivativeMethod::CentralFd);
        assert!(fd.values.iter().all(|&v| (v - 2.0).abs() < 1e-8));
    }

    #[test]
    fn case_623_third_partial() {
        let d = sim(CaseId::Complex623, 500, 2);
        let m = AnalyticModel::catalog(ModelId::Case623).unwrap();
        let a = partial_derivatives(&m, &d, 2).unwrap();
        let fd = partial_derivatives_with(&m, &d, 2, GradientOptions { force_fd: true, step: None }).unwrap();
        for (i, x3) in d.column(2).iter().enumerate() {
            let expect = 6.0 * x3 * x3 - 1.5;
            assert!((a.values[i] - expect).abs() < 1e-10);
            assert!((fd.values[i] - expect).abs() < 1e-6);
        }
    }

    #[test]
    fn fd_agrees_with_analytic_for_every_catalog_model() {
        for id in ModelId::CATALOG {
            let m = AnalyticModel::catalog(id).unwrap();
            let case = if m.arity() == 5 { CaseId::Indep61 } else { CaseId::Complex623 };
            let full = sim(case, 300, 3);
            let p = m.arity();
            let d = Dataset::new(full.names()[..p].to_vec(), full.columns()[..p].to_vec(), None).unwrap();
            let a = GradientTable::compute(&m, &d, GradientOptions::default()).unwrap();
            let f = GradientTable::compute(&m, &d, GradientOptions { force_fd: true, step: None }).unwrap();
            for j in 0..p {
                for (x, y) in a.values(j).iter().zip(f.values(j)) {
                    assert!(relative_error(*x, *y) < 1e-4, "{id:?} j={j}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn independent_slopes_collapse_total_to_partial() {
        let d = sim(CaseId::Indep61, 300, 4);
        let m = AnalyticModel::catalog(ModelId::Case61).unwrap();
        let table = GradientTable::compute(&m, &d, GradientOptions::default()).unwrap();
        let dep = DependenceModel::independent(0, d.p());
        let total = total_from_table(&table, &d, 0, &dep).unwrap();
        assert_eq!(total, table.values(0));
    }

    #[test]
    fn total_derivative_of_additive_model_under_exact_dependence() {
        let x1: Vec<f64> = (0..50).map(|i| -1.0 + i as f64 * 0.04).collect();
        let beta = 0.6;
        let x2: Vec<f64> = x1.iter().map(|v| beta * v + 0.3).collect();
        let d = Dataset::new(vec!["x1".into(), "x2".into()], vec![x1, x2], None).unwrap();
        let m = AnalyticModel::additive_linear(&[1.0, 1.0]).unwrap();
        let dep = fit_dependence(&d, 0, DependenceMethod::Linear, 10).unwrap();
        let total = total_derivatives(&m, &d, 0, &dep).unwrap();
        assert!(total.iter().all(|t| (t - (1.0 + beta)).abs() < 1e-10));
    }

    #[test]
    fn wrong_anchor_is_rejected() {
        let d = sim(CaseId::Indep61, 50, 5);
        let m = AnalyticModel::catalog(ModelId::Case61).unwrap();
        let table = GradientTable::compute(&m, &d, GradientOptions::default()).unwrap();
        let dep = DependenceModel::independent(1, d.p());
        assert!(total_from_table(&table, &d, 0, &dep).is_err());
    }

    #[test]
    fn derivatives_are_linear_in_the_model() {
        let d = sim(CaseId::Indep61, 200, 6);
        let f = AnalyticModel::catalog(ModelId::Case61).unwrap();
        let g = AnalyticModel::catalog(ModelId::Case623).unwrap();
        let (a, b) = (1.7, -0.4);
        let comb = f.linear_combination(a, &g, b).unwrap();
        let tf = GradientTable::compute(&f, &d, GradientOptions::default()).unwrap();
        let tg = GradientTable::compute(&g, &d, GradientOptions::default()).unwrap();
        let tc = GradientTable::compute(&comb, &d, GradientOptions::default()).unwrap();
        for j in 0..d.p() {
            for i in 0..d.n() {
                let expect = a * tf.values(j)[i] + b * tg.values(j)[i];
                assert!((tc.values(j)[i] - expect).abs() < 1e-12);
            }
        }
    }
}
