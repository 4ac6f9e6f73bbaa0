//! Variance-based importance from the ATDEV matrix and the derivative-based
//! global sensitivity measure.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::effects::{EffectMatrix, MatrixKind};
use crate::error::{Error, Result};
use crate::gradients::{GradientOptions, GradientTable};
use crate::model::Predictor;

/// `v[k][j]` is the variance of ATDEV-matrix cell `(k, j)` over the
/// empirical distribution of `x_j`; `v_plus[j]` sums column `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub names: Vec<String>,
    pub v: Vec<Vec<f64>>,
    pub v_plus: Vec<f64>,
    pub dgsm: Vec<f64>,
    /// Monte-Carlo standard error of each DGSM estimate.
    pub dgsm_se: Vec<f64>,
}

impl ImportanceReport {
    pub fn new(em: &EffectMatrix, table: &GradientTable) -> Result<Self> {
        let (v, v_plus) = atdev_importance(em)?;
        let (dgsm, dgsm_se) = dgsm_from(table);
        Ok(ImportanceReport {
            names: em.names.clone(),
            v,
            v_plus,
            dgsm,
            dgsm_se,
        })
    }

    pub fn p(&self) -> usize {
        self.names.len()
    }

    /// Column indices sorted by decreasing DGSM (ties keep column order).
    pub fn dgsm_ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.p()).collect();
        idx.sort_by(|&a, &b| self.dgsm[b].total_cmp(&self.dgsm[a]));
        idx
    }
}

/// Cell variances and their column sums.
pub fn atdev_importance(em: &EffectMatrix) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if em.kind != MatrixKind::ATDEV {
        return Err(Error::InvalidArgument(
            "importance needs an ATDEV matrix".into(),
        ));
    }
    let p = em.p();
    let mut v = vec![vec![0.0; p]; p];
    for (k, row) in v.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = em.cell(k, j).map_or(0.0, |c| c.weighted_variance().max(0.0));
        }
    }
    let v_plus = (0..p).map(|j| (0..p).map(|k| v[k][j]).sum()).collect();
    Ok((v, v_plus))
}

/// `E[(df/dx_j)^2]` per column, with the standard error of the mean.
pub fn dgsm_from(table: &GradientTable) -> (Vec<f64>, Vec<f64>) {
    (0..table.p())
        .map(|j| {
            let g = table.values(j);
            let n = g.len() as f64;
            let sq: Vec<f64> = g.iter().map(|v| v * v).collect();
            let mean = sq.iter().sum::<f64>() / n;
            let se = if g.len() > 1 {
                let ss = sq.iter().map(|s| (s - mean).powi(2)).sum::<f64>();
                (ss / (n - 1.0) / n).sqrt()
            } else {
                0.0
            };
            (mean, se)
        })
        .unzip()
}

pub fn dgsm(m: &dyn Predictor, d: &Dataset) -> Result<Vec<f64>> {
    let table = GradientTable::compute(m, d, GradientOptions::default())?;
    Ok(dgsm_from(&table).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dependence::DependenceMethod;
    use crate::effects::{column_bins, column_dependence, effect_matrix};
    use crate::model::{AnalyticModel, ModelId, Term};
    use crate::simgen::{generate, CaseId, SimSpec};

    fn report(m: &AnalyticModel, d: &Dataset) -> ImportanceReport {
        let bins = column_bins(d, 20).unwrap();
        let deps = column_dependence(d, DependenceMethod::Linear, 10).unwrap();
        let table = GradientTable::compute(m, d, GradientOptions::default()).unwrap();
        let em = EffectMatrix::from_table(&table, d, MatrixKind::ATDEV, &deps, &bins).unwrap();
        ImportanceReport::new(&em, &table).unwrap()
    }

    #[test]
    fn constant_model_has_zero_importance() {
        let d = generate(&SimSpec::new(CaseId::Complex623, 1000, 1)).unwrap();
        let m = AnalyticModel::custom(5, vec![Term::new(3.0, &[])]).unwrap();
        let r = report(&m, &d);
        assert!(r.v.iter().flatten().all(|&v| v == 0.0));
        assert!(r.dgsm.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn column_sums_are_consistent() {
        let d = generate(&SimSpec::new(CaseId::Complex623, 3000, 2)).unwrap();
        let r = report(&AnalyticModel::catalog(ModelId::Case623).unwrap(), &d);
        for j in 0..r.p() {
            let s: f64 = (0..r.p()).map(|k| r.v[k][j]).sum();
            assert!((s - r.v_plus[j]).abs() < 1e-12);
        }
        assert!(r.v.iter().flatten().all(|&v| v >= 0.0));
    }

    #[test]
    fn independence_reduces_to_ale_variance() {
        let d = generate(&SimSpec::new(CaseId::Indep61, 3000, 3)).unwrap();
        let m = AnalyticModel::catalog(ModelId::Case61).unwrap();
        let bins = column_bins(&d, 20).unwrap();
        let deps: Vec<_> = (0..5).map(|j| crate::DependenceModel::independent(j, 5)).collect();
        let em = effect_matrix(&m, &d, MatrixKind::ATDEV, &deps, &bins).unwrap();
        let (v, v_plus) = atdev_importance(&em).unwrap();
        for j in 0..5 {
            assert_eq!(v_plus[j], v[j][j]);
            assert_eq!(v[j][j], em.cell(j, j).unwrap().weighted_variance());
        }
    }

    #[test]
    fn scaling_the_model_scales_importance_quadratically() {
        let d = generate(&SimSpec::new(CaseId::Complex623, 2000, 4)).unwrap();
        let m = AnalyticModel::catalog(ModelId::Case623).unwrap();
        let c = -2.5;
        let a = report(&m, &d);
        let b = report(&m.scaled(c), &d);
        for k in 0..5 {
            for j in 0..5 {
                assert!((b.v[k][j] - c * c * a.v[k][j]).abs() <= 1e-9 * (1.0 + a.v[k][j]));
            }
            assert!((b.dgsm[k] - c * c * a.dgsm[k]).abs() <= 1e-9 * (1.0 + a.dgsm[k]));
        }
        assert_eq!(a.dgsm_ranking(), b.dgsm_ranking());
    }

    #[test]
    fn le_matrix_rejected() {
        let d = generate(&SimSpec::new(CaseId::Indep61, 300, 5)).unwrap();
        let m = AnalyticModel::catalog(ModelId::Case61).unwrap();
        let em = effect_matrix(&m, &d, MatrixKind::LE, &[], &column_bins(&d, 5).unwrap()).unwrap();
        assert!(atdev_importance(&em).is_err());
    }

    #[test]
    fn dgsm_matches_closed_form_moments() {
        let d = generate(&SimSpec::new(CaseId::Le71Indep, 200_000, 6)).unwrap();
        let m = AnalyticModel::catalog(ModelId::Case623).unwrap();
        let table = GradientTable::compute(&m, &d, GradientOptions::default()).unwrap();
        let (v, se) = dgsm_from(&table);
        let expect = [1.0, 3.0 + 0.64 / 3.0, 7.2 - 6.0 + 2.25, 0.64 / 3.0, 0.0];
        for j in 0..5 {
            assert!((v[j] - expect[j]).abs() <= 4.0 * se[j] + 1e-12, "j={j}: {} vs {}", v[j], expect[j]);
        }
    }
}
