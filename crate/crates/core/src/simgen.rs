//! Simulation recipes and closed-form reference curves.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64(seed)`. Draws are
//! taken row by row, left to right, with the response noise last, so a
//! given spec always yields the same bits on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::{CurveKind, Dataset};
use crate::error::{Error, Result};
use crate::model::{AnalyticModel, ModelId, Predictor};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case")]
pub enum CaseId {
    /// Five independent uniforms, `y = x1 + x2^2 + x3^3 + 0.8 x2 x4`.
    #[serde(rename = "indep_61")]
    Indep61,
    /// `x2 = 0.8 x1 + e`, `x3 = -x1 + e`, `y = x1^2 + x2`.
    #[serde(rename = "additive_621")]
    Additive621,
    /// `x2 = -x1 + e`, `y = x1 + x2 + x1 x2`.
    #[serde(rename = "interaction_622")]
    Interaction622,
    /// `x4 = x2 + e`, `x5 = -x3 + e` with the five-input Legendre-style model.
    #[serde(rename = "complex_623")]
    Complex623,
    /// Same model as `complex_623` on five independent uniforms.
    #[serde(rename = "le_71_indep")]
    Le71Indep,
    /// Same recipe as `complex_623`.
    #[serde(rename = "le_71_corr")]
    Le71Corr,
    #[serde(rename = "bivariate_normal")]
    BivariateNormal {
        mu1: f64,
        mu2: f64,
        sigma1: f64,
        sigma2: f64,
        rho: f64,
        model: ModelId,
    },
}

impl CaseId {
    pub const NAMED: [CaseId; 6] = [
        CaseId::Indep61,
        CaseId::Additive621,
        CaseId::Interaction622,
        CaseId::Complex623,
        CaseId::Le71Indep,
        CaseId::Le71Corr,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CaseId::Indep61 => "indep_61",
            CaseId::Additive621 => "additive_621",
            CaseId::Interaction622 => "interaction_622",
            CaseId::Complex623 => "complex_623",
            CaseId::Le71Indep => "le_71_indep",
            CaseId::Le71Corr => "le_71_corr",
            CaseId::BivariateNormal { .. } => "bivariate_normal",
        }
    }

    /// Parses one of the parameter-free case names.
    pub fn parse(s: &str) -> Result<Self> {
        CaseId::NAMED
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::UnknownCase(s.to_string()))
    }

    pub fn model_id(&self) -> ModelId {
        match self {
            CaseId::Indep61 => ModelId::Case61,
            CaseId::Additive621 => ModelId::Case621,
            CaseId::Interaction622 => ModelId::Case622,
            CaseId::Complex623 | CaseId::Le71Indep | CaseId::Le71Corr => ModelId::Case623,
            CaseId::BivariateNormal { model, .. } => *model,
        }
    }

    /// The noiseless regression function of the recipe.
    pub fn model(&self) -> Result<AnalyticModel> {
        AnalyticModel::catalog(self.model_id())
    }

    pub fn p(&self) -> usize {
        match self {
            CaseId::Additive621 | CaseId::Interaction622 => 3,
            CaseId::BivariateNormal { .. } => 2,
            _ => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    #[serde(flatten)]
    pub case: CaseId,
    pub n: usize,
    pub noise_sd: f64,
    pub seed: u64,
}

impl SimSpec {
    /// Spec with the default noise standard deviation of 0.1.
    pub fn new(case: CaseId, n: usize, seed: u64) -> Self {
        SimSpec {
            case,
            n,
            noise_sd: 0.1,
            seed,
        }
    }

    fn validate(&self) -> Result<AnalyticModel> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("sample size must be at least 1".into()));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise sd {} must be finite and nonnegative",
                self.noise_sd
            )));
        }
        let model = self.case.model()?;
        if let CaseId::BivariateNormal {
            mu1,
            mu2,
            sigma1,
            sigma2,
            rho,
            ..
        } = self.case
        {
            if !(sigma1 > 0.0 && sigma2 > 0.0 && sigma1.is_finite() && sigma2.is_finite()) {
                return Err(Error::InvalidArgument("sigmas must be positive".into()));
            }
            if !(rho.abs() <= 1.0) || !mu1.is_finite() || !mu2.is_finite() {
                return Err(Error::InvalidArgument(format!("invalid rho {rho} or means")));
            }
            if model.arity() != 2 {
                return Err(Error::InvalidArgument(format!(
                    "bivariate normal inputs need a two-input model, '{}' takes {}",
                    model.id().as_str(),
                    model.arity()
                )));
            }
        }
        Ok(model)
    }
}

struct Noise {
    dist: Option<Normal<f64>>,
}

impl Noise {
    fn new(sd: f64) -> Self {
        Noise {
            dist: (sd > 0.0).then(|| Normal::new(0.0, sd).expect("validated sd")),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        self.dist.as_ref().map_or(0.0, |d| d.sample(rng))
    }
}

/// Draws a dataset (predictors `x1..xp` plus response `y`).
pub fn generate(spec: &SimSpec) -> Result<Dataset> {
    let model = spec.validate()?;
    let p = spec.case.p();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let unif = Uniform::new_inclusive(-1.0, 1.0).expect("valid bounds");
    let eps = Noise::new(spec.noise_sd);
    let mut cols = vec![Vec::with_capacity(spec.n); p];
    let mut y = Vec::with_capacity(spec.n);
    let mut row = vec![0.0; p];
    for _ in 0..spec.n {
        match spec.case {
            CaseId::Indep61 | CaseId::Le71Indep => {
                for v in row.iter_mut() {
                    *v = unif.sample(&mut rng);
                }
            }
            CaseId::Additive621 => {
                row[0] = unif.sample(&mut rng);
                row[1] = 0.8 * row[0] + eps.draw(&mut rng);
                row[2] = -row[0] + eps.draw(&mut rng);
            }
            CaseId::Interaction622 => {
                row[0] = unif.sample(&mut rng);
                row[1] = -row[0] + eps.draw(&mut rng);
                row[2] = unif.sample(&mut rng);
            }
            CaseId::Complex623 | CaseId::Le71Corr => {
                row[0] = unif.sample(&mut rng);
                row[1] = unif.sample(&mut rng);
                row[2] = unif.sample(&mut rng);
                row[3] = row[1] + eps.draw(&mut rng);
                row[4] = -row[2] + eps.draw(&mut rng);
            }
            CaseId::BivariateNormal {
                mu1,
                mu2,
                sigma1,
                sigma2,
                rho,
                ..
            } => {
                let z1: f64 = rng.sample(rand_distr::StandardNormal);
                let z2: f64 = rng.sample(rand_distr::StandardNormal);
                row[0] = mu1 + sigma1 * z1;
                row[1] = mu2 + sigma2 * (rho * z1 + (1.0 - rho * rho).max(0.0).sqrt() * z2);
            }
        }
        for (c, &v) in cols.iter_mut().zip(&row) {
            c.push(v);
        }
        y.push(model.eval_row(&row) + eps.draw(&mut rng));
    }
    let names = (1..=p).map(|i| format!("x{i}")).collect();
    Dataset::new(names, cols, None)?.with_response("y", y)
}

/// Population `Var(f) / (Var(f) + sd^2)` for the recipe's noiseless signal.
pub fn theoretical_r2(spec: &SimSpec) -> Result<f64> {
    spec.validate()?;
    let s2 = spec.noise_sd * spec.noise_sd;
    // Moments of Unif(-1, 1): E x^2 = 1/3, E x^4 = 1/5, E x^6 = 1/7.
    let var_sq = 1.0 / 5.0 - 1.0 / 9.0;
    let var_legendre3 = 4.0 / 7.0 - 6.0 / 5.0 + 0.75;
    let signal = match spec.case {
        CaseId::Indep61 => 1.0 / 3.0 + var_sq + 1.0 / 7.0 + 0.64 / 9.0,
        CaseId::Additive621 => var_sq + 0.64 / 3.0 + s2,
        // f = e - x1^2 + x1 e after substituting x2 = -x1 + e.
        CaseId::Interaction622 => s2 + var_sq + s2 / 3.0,
        // 0.8 x2 x4 = 0.8 x2^2 + 0.8 x2 e.
        CaseId::Complex623 | CaseId::Le71Corr => {
            1.0 / 3.0 + 2.3 * 2.3 * var_sq + var_legendre3 + 0.64 * s2 / 3.0
        }
        CaseId::Le71Indep => 1.0 / 3.0 + 2.25 * var_sq + var_legendre3 + 0.64 / 9.0,
        CaseId::BivariateNormal {
            mu1,
            mu2,
            sigma1,
            sigma2,
            rho,
            model,
        } => {
            let (v1, v2) = (sigma1 * sigma1, sigma2 * sigma2);
            let c = rho * sigma1 * sigma2;
            match model {
                ModelId::AdditiveLinear => v1 + v2 + 2.0 * c,
                ModelId::Multiplicative => {
                    mu1 * mu1 * v2 + mu2 * mu2 * v1 + 2.0 * mu1 * mu2 * c + v1 * v2 + c * c
                }
                ModelId::QuadPlusInteraction => {
                    let a = 2.0 * mu1 + mu2;
                    let linear = a * a * v1 + mu1 * mu1 * v2 + 2.0 * a * mu1 * c;
                    let quad = 2.0 * v1 * v1 + 4.0 * v1 * c + v1 * v2 + c * c;
                    linear + quad
                }
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "no closed-form variance for '{}' under normal inputs",
                        other.as_str()
                    )))
                }
            }
        }
    };
    Ok(if signal + s2 > 0.0 {
        signal / (signal + s2)
    } else {
        1.0
    })
}

/// Plug-in moments used to instantiate the reference curves.
///
/// `beta[k][j]` and `intercept[k][j]` are the OLS slope and intercept of
/// `x_k` regressed on `x_j`; `second[a][b]` is the sample `E[x_a x_b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleParams {
    pub mu: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
    pub intercept: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
}

impl OracleParams {
    pub fn estimate(d: &Dataset) -> Result<Self> {
        let p = d.p();
        let mu: Vec<f64> = (0..p).map(|j| stats::mean(d.column(j))).collect();
        let mut beta = vec![vec![0.0; p]; p];
        let mut intercept = vec![vec![0.0; p]; p];
        let mut second = vec![vec![0.0; p]; p];
        for j in 0..p {
            let vj = stats::variance(d.column(j));
            if !(vj > 0.0) {
                return Err(Error::DegenerateVariable(d.names()[j].clone()));
            }
            for k in 0..p {
                let cov = stats::covariance(d.column(j), d.column(k));
                second[k][j] = cov + mu[j] * mu[k];
                beta[k][j] = if k == j { 1.0 } else { cov / vj };
                intercept[k][j] = if k == j {
                    0.0
                } else {
                    mu[k] - beta[k][j] * mu[j]
                };
            }
        }
        Ok(OracleParams {
            mu,
            beta,
            intercept,
            second,
        })
    }

    /// Population values for bivariate normal inputs.
    pub fn bivariate(mu1: f64, mu2: f64, sigma1: f64, sigma2: f64, rho: f64) -> Self {
        let mu = vec![mu1, mu2];
        let b21 = rho * sigma2 / sigma1;
        let b12 = rho * sigma1 / sigma2;
        let c = rho * sigma1 * sigma2;
        OracleParams {
            beta: vec![vec![1.0, b12], vec![b21, 1.0]],
            intercept: vec![vec![0.0, mu1 - b12 * mu2], vec![mu2 - b21 * mu1, 0.0]],
            second: vec![
                vec![sigma1 * sigma1 + mu1 * mu1, c + mu1 * mu2],
                vec![c + mu1 * mu2, sigma2 * sigma2 + mu2 * mu2],
            ],
            mu,
        }
    }

    pub fn p(&self) -> usize {
        self.mu.len()
    }
}

/// A reference curve as a polynomial in `x_j`, coefficients ascending.
///
/// The constant term carries no information: every comparison is made
/// after centering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCurve {
    pub model: ModelId,
    pub kind: CurveKind,
    pub j: usize,
    pub k: Option<usize>,
    pub coefficients: Vec<f64>,
}

impl OracleCurve {
    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// Coefficient of `x^d` (zero beyond the stored degree).
    pub fn coefficient(&self, d: usize) -> f64 {
        self.coefficients.get(d).copied().unwrap_or(0.0)
    }
}

type Poly = Vec<f64>;

fn poly_mul(a: &[f64], b: &[f64]) -> Poly {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (k, y) in b.iter().enumerate() {
            out[i + k] += x * y;
        }
    }
    out
}

fn poly_add(acc: &mut Poly, b: &[f64], scale: f64) {
    if acc.len() < b.len() {
        acc.resize(b.len(), 0.0);
    }
    for (a, v) in acc.iter_mut().zip(b) {
        *a += scale * v;
    }
}

fn poly_integrate(a: &[f64]) -> Poly {
    let mut out = vec![0.0; a.len() + 1];
    for (i, v) in a.iter().enumerate() {
        out[i + 1] = v / (i + 1) as f64;
    }
    out
}

fn no_oracle(model: &AnalyticModel, kind: CurveKind, j: usize, k: Option<usize>, why: &str) -> Error {
    Error::NoOracle(format!(
        "{} {} j={j} k={k:?}: {why}",
        model.id().as_str(),
        kind.as_str()
    ))
}

/// Powers of one monomial after differentiating in `var` (None if it vanishes).
fn differentiate(coef: f64, powers: &[(usize, u32)], var: usize) -> Option<(f64, Vec<(usize, u32)>)> {
    let &(_, e) = powers.iter().find(|(v, _)| *v == var)?;
    let rest = powers
        .iter()
        .filter_map(|&(v, p)| match (v == var, p) {
            (true, 1) => None,
            (true, p) => Some((v, p - 1)),
            (false, p) => Some((v, p)),
        })
        .collect();
    Some((coef * e as f64, rest))
}

enum Average {
    /// Over the marginal distribution of the other inputs (PD).
    Marginal,
    /// Conditional on `x_j = t`, with linear conditional means.
    Conditional,
}

/// `E[coef * prod x^p | x_j = t]` as a polynomial in `t`.
///
/// Only monomials whose other-variable part has degree at most one (or two
/// when no power of `x_j` multiplies it) have exact closed forms under the
/// linear-homoscedastic dependence assumed by the reference derivations.
fn expect_monomial(
    coef: f64,
    powers: &[(usize, u32)],
    j: usize,
    params: &OracleParams,
    avg: &Average,
) -> Option<Poly> {
    let own = powers.iter().find(|(v, _)| *v == j).map_or(0, |&(_, p)| p);
    let others: Vec<(usize, u32)> = powers.iter().copied().filter(|(v, _)| *v != j).collect();
    let other_degree: u32 = others.iter().map(|(_, p)| p).sum();
    let mut t_part = vec![0.0; own as usize + 1];
    t_part[own as usize] = coef;
    let other_poly: Poly = match (other_degree, avg) {
        (0, _) => vec![1.0],
        (1, Average::Marginal) => vec![params.mu[others[0].0]],
        (1, Average::Conditional) => {
            let k = others[0].0;
            vec![params.intercept[k][j], params.beta[k][j]]
        }
        (2, Average::Marginal) => {
            let (a, b) = if others.len() == 1 {
                (others[0].0, others[0].0)
            } else {
                (others[0].0, others[1].0)
            };
            vec![params.second[a][b]]
        }
        (2, Average::Conditional) if own == 0 => {
            // Residual (co)variance only shifts the constant.
            let (a, b) = if others.len() == 1 {
                (others[0].0, others[0].0)
            } else {
                (others[0].0, others[1].0)
            };
            poly_mul(
                &[params.intercept[a][j], params.beta[a][j]],
                &[params.intercept[b][j], params.beta[b][j]],
            )
        }
        _ => return None,
    };
    Some(poly_mul(&t_part, &other_poly))
}

fn expect_sum(
    monomials: &[(f64, Vec<(usize, u32)>)],
    j: usize,
    params: &OracleParams,
    avg: Average,
) -> Option<Poly> {
    let mut acc = vec![0.0];
    for (coef, powers) in monomials {
        let poly = expect_monomial(*coef, powers, j, params, &avg)?;
        poly_add(&mut acc, &poly, 1.0);
    }
    Some(acc)
}

fn partial_monomials(model: &AnalyticModel, var: usize) -> Vec<(f64, Vec<(usize, u32)>)> {
    model
        .terms()
        .iter()
        .filter_map(|t| differentiate(t.coef, &t.powers, var))
        .collect()
}

/// Closed-form reference curve for `model` under linear dependence.
///
/// Kinds: PD, Marginal, ALE, ACE (needs `k`), ATDEV, LE and LEcross (needs
/// `k`). Combinations outside the closed forms return [`Error::NoOracle`].
pub fn oracle_for_model(
    model: &AnalyticModel,
    kind: CurveKind,
    j: usize,
    k: Option<usize>,
    params: &OracleParams,
) -> Result<OracleCurve> {
    let p = model.arity();
    if params.p() != p || j >= p || k.is_some_and(|k| k >= p || k == j) {
        return Err(no_oracle(model, kind, j, k, "index or parameter mismatch"));
    }
    let need_k = || k.ok_or_else(|| no_oracle(model, kind, j, k, "cross curve needs k"));
    let fail = || no_oracle(model, kind, j, k, "no closed form for this term structure");
    let ace = |k: usize| -> Option<Poly> {
        let inner = expect_sum(&partial_monomials(model, k), j, params, Average::Conditional)?;
        let mut weighted = vec![0.0];
        poly_add(&mut weighted, &inner, params.beta[k][j]);
        Some(poly_integrate(&weighted))
    };
    let ale = || -> Option<Poly> {
        expect_sum(&partial_monomials(model, j), j, params, Average::Conditional)
            .map(|p| poly_integrate(&p))
    };
    let monomials = || -> Vec<(f64, Vec<(usize, u32)>)> {
        model
            .terms()
            .iter()
            .map(|t| (t.coef, t.powers.clone()))
            .collect()
    };
    let coefficients = match kind {
        CurveKind::PD => {
            // Terms free of x_j are constants.
            let with_j: Vec<_> = monomials()
                .into_iter()
                .filter(|(_, pw)| pw.iter().any(|(v, _)| *v == j))
                .collect();
            expect_sum(&with_j, j, params, Average::Marginal).ok_or_else(fail)?
        }
        CurveKind::Marginal => {
            expect_sum(&monomials(), j, params, Average::Conditional).ok_or_else(fail)?
        }
        CurveKind::ALE => ale().ok_or_else(fail)?,
        CurveKind::ACE => ace(need_k()?).ok_or_else(fail)?,
        CurveKind::ATDEV => {
            let mut acc = ale().ok_or_else(fail)?;
            for other in (0..p).filter(|&o| o != j) {
                poly_add(&mut acc, &ace(other).ok_or_else(fail)?, 1.0);
            }
            acc
        }
        CurveKind::LE => {
            expect_sum(&partial_monomials(model, j), j, params, Average::Conditional)
                .ok_or_else(fail)?
        }
        CurveKind::LEcross => {
            expect_sum(&partial_monomials(model, need_k()?), j, params, Average::Conditional)
                .ok_or_else(fail)?
        }
    };
    let mut coefficients = coefficients;
    while coefficients.len() > 1 && coefficients.last() == Some(&0.0) {
        coefficients.pop();
    }
    Ok(OracleCurve {
        model: model.id(),
        kind,
        j,
        k: if matches!(kind, CurveKind::ACE | CurveKind::LEcross) { k } else { None },
        coefficients,
    })
}

/// Reference curve for the regression function of a simulation case.
pub fn oracle(
    case: &CaseId,
    kind: CurveKind,
    j: usize,
    k: Option<usize>,
    params: &OracleParams,
) -> Result<OracleCurve> {
    oracle_for_model(&case.model()?, kind, j, k, params)
}
