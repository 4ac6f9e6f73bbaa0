use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{check_width, Predictor};
use crate::error::{Error, Result};

/// Catalog of closed-form models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    /// `sum_j beta_j x_j`
    AdditiveLinear,
    /// `x1 x2`
    Multiplicative,
    /// `x1^2 + x1 x2`
    QuadPlusInteraction,
    /// `x1 + x2^2 + x3^3 + 0.8 x2 x4` on five inputs.
    #[serde(rename = "case_61")]
    Case61,
    /// `x1^2 + x2` on three inputs.
    #[serde(rename = "case_621")]
    Case621,
    /// `x1 + x2 + x1 x2` on three inputs.
    #[serde(rename = "case_622")]
    Case622,
    /// `x1 + (3 x2^2 - 1)/2 + (4 x3^3 - 3 x3)/2 + 0.8 x2 x4` on five inputs.
    #[serde(rename = "case_623")]
    Case623,
    Custom,
}

impl ModelId {
    pub const CATALOG: [ModelId; 7] = [
        ModelId::AdditiveLinear,
        ModelId::Multiplicative,
        ModelId::QuadPlusInteraction,
        ModelId::Case61,
        ModelId::Case621,
        ModelId::Case622,
        ModelId::Case623,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::AdditiveLinear => "additive_linear",
            ModelId::Multiplicative => "multiplicative",
            ModelId::QuadPlusInteraction => "quad_plus_interaction",
            ModelId::Case61 => "case_61",
            ModelId::Case621 => "case_621",
            ModelId::Case622 => "case_622",
            ModelId::Case623 => "case_623",
            ModelId::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::UnknownCase(s.to_string()))
    }
}

/// `coef * prod_v x_v^e` over the listed `(v, e)` pairs; an empty list is a
/// constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: f64,
    #[serde(default)]
    pub powers: Vec<(usize, u32)>,
}

impl Term {
    pub fn new(coef: f64, powers: &[(usize, u32)]) -> Self {
        Term {
            coef,
            powers: powers.to_vec(),
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let mut t = self.coef;
        for &(v, e) in &self.powers {
            t *= x[v].powi(e as i32);
        }
        t
    }

    fn partial(&self, x: &[f64], var: usize) -> f64 {
        let Some(&(_, e_var)) = self.powers.iter().find(|(v, _)| *v == var) else {
            return 0.0;
        };
        let mut t = self.coef * e_var as f64;
        for &(v, e) in &self.powers {
            if v == var {
                t *= x[v].powi(e as i32 - 1);
            } else {
                t *= x[v].powi(e as i32);
            }
        }
        t
    }
}

/// Serializable description used by run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticSpec {
    pub id: ModelId,
    /// Replacement term coefficients (or `beta` for `additive_linear`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    /// Arity, required for `custom`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    /// Term list, required for `custom`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<Term>>,
}

/// A polynomial model with exact gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticModel {
    id: ModelId,
    p: usize,
    terms: Vec<Term>,
}

impl AnalyticModel {
    pub fn custom(p: usize, terms: Vec<Term>) -> Result<Self> {
        Self::build(ModelId::Custom, p, terms)
    }

    fn build(id: ModelId, p: usize, terms: Vec<Term>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidArgument("empty term list".into()));
        }
        if p == 0 {
            return Err(Error::InvalidArgument("model arity must be positive".into()));
        }
        for t in &terms {
            if let Some(&(v, _)) = t.powers.iter().find(|(v, _)| *v >= p) {
                return Err(Error::VariableIndex { index: v, p });
            }
            if !t.coef.is_finite() {
                return Err(Error::InvalidArgument("non-finite coefficient".into()));
            }
        }
        Ok(AnalyticModel { id, p, terms })
    }

    pub fn additive_linear(beta: &[f64]) -> Result<Self> {
        let terms = beta
            .iter()
            .enumerate()
            .map(|(j, &b)| Term::new(b, &[(j, 1)]))
            .collect();
        Self::build(ModelId::AdditiveLinear, beta.len(), terms)
    }

    /// Catalog model with its default coefficients.
    pub fn catalog(id: ModelId) -> Result<Self> {
        let (p, terms) = match id {
            ModelId::AdditiveLinear => return Self::additive_linear(&[1.0, 1.0]),
            ModelId::Multiplicative => (2, vec![Term::new(1.0, &[(0, 1), (1, 1)])]),
            ModelId::QuadPlusInteraction => (
                2,
                vec![
                    Term::new(1.0, &[(0, 2)]),
                    Term::new(1.0, &[(0, 1), (1, 1)]),
                ],
            ),
            ModelId::Case61 => (
                5,
                vec![
                    Term::new(1.0, &[(0, 1)]),
                    Term::new(1.0, &[(1, 2)]),
                    Term::new(1.0, &[(2, 3)]),
                    Term::new(0.8, &[(1, 1), (3, 1)]),
                ],
            ),
            ModelId::Case621 => (
                3,
                vec![Term::new(1.0, &[(0, 2)]), Term::new(1.0, &[(1, 1)])],
            ),
            ModelId::Case622 => (
                3,
                vec![
                    Term::new(1.0, &[(0, 1)]),
                    Term::new(1.0, &[(1, 1)]),
                    Term::new(1.0, &[(0, 1), (1, 1)]),
                ],
            ),
            ModelId::Case623 => (
                5,
                vec![
                    Term::new(1.0, &[(0, 1)]),
                    Term::new(1.5, &[(1, 2)]),
                    Term::new(-0.5, &[]),
                    Term::new(2.0, &[(2, 3)]),
                    Term::new(-1.5, &[(2, 1)]),
                    Term::new(0.8, &[(1, 1), (3, 1)]),
                ],
            ),
            ModelId::Custom => {
                return Err(Error::InvalidArgument(
                    "custom models need an explicit term list".into(),
                ))
            }
        };
        Self::build(id, p, terms)
    }

    pub fn from_spec(spec: &AnalyticSpec) -> Result<Self> {
        match spec.id {
            ModelId::Custom => {
                let terms = spec.terms.clone().ok_or_else(|| {
                    Error::InvalidArgument("custom model without terms".into())
                })?;
                let p = spec.p.unwrap_or_else(|| {
                    terms
                        .iter()
                        .flat_map(|t| t.powers.iter().map(|(v, _)| v + 1))
                        .max()
                        .unwrap_or(1)
                });
                Self::custom(p, terms)
            }
            ModelId::AdditiveLinear => {
                let beta = spec.coefficients.clone().unwrap_or_else(|| {
                    vec![1.0; spec.p.unwrap_or(2)]
                });
                Self::additive_linear(&beta)
            }
            id => {
                let mut m = Self::catalog(id)?;
                if let Some(c) = &spec.coefficients {
                    if c.len() != m.terms.len() {
                        return Err(Error::InvalidArgument(format!(
                            "{} expects {} coefficients, got {}",
                            id.as_str(),
                            m.terms.len(),
                            c.len()
                        )));
                    }
                    for (t, &v) in m.terms.iter_mut().zip(c) {
                        t.coef = v;
                    }
                }
                Ok(m)
            }
        }
    }

    pub fn id(&self) -> ModelId {
        self.id
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// `c * f`.
    pub fn scaled(&self, c: f64) -> Self {
        AnalyticModel {
            id: ModelId::Custom,
            p: self.p,
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coef: t.coef * c,
                    powers: t.powers.clone(),
                })
                .collect(),
        }
    }

    /// `a * self + b * other`, as a custom term list.
    pub fn linear_combination(&self, a: f64, other: &AnalyticModel, b: f64) -> Result<Self> {
        if self.p != other.p {
            return Err(Error::WidthMismatch {
                expected: self.p,
                found: other.p,
            });
        }
        let mut terms = self.scaled(a).terms;
        terms.extend(other.scaled(b).terms);
        Self::custom(self.p, terms)
    }

    pub fn eval_row(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for t in &self.terms {
            acc += t.eval(x);
        }
        acc
    }

    pub fn partial_row(&self, x: &[f64], var: usize) -> f64 {
        self.terms.iter().map(|t| t.partial(x, var)).sum()
    }
}

impl Predictor for AnalyticModel {
    fn arity(&self) -> usize {
        self.p
    }

    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        check_width(self.p, &x)?;
        let mut row = vec![0.0; self.p];
        Ok(x.rows()
            .into_iter()
            .map(|r| {
                row.iter_mut().zip(r.iter()).for_each(|(d, s)| *d = *s);
                self.eval_row(&row)
            })
            .collect())
    }

    fn has_analytic_gradient(&self) -> bool {
        true
    }

    fn gradient(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_width(self.p, &x)?;
        let mut out = Array2::zeros((x.nrows(), self.p));
        let mut row = vec![0.0; self.p];
        for (i, r) in x.rows().into_iter().enumerate() {
            row.iter_mut().zip(r.iter()).for_each(|(d, s)| *d = *s);
            for j in 0..self.p {
                out[[i, j]] = self.partial_row(&row, j);
            }
        }
        Ok(out)
    }
}
