//! Derivative-based interpretation of black-box regression models.
//!
//! The crate estimates one-dimensional effect curves for a fitted model
//! `f(x)` on tabular data and ties them together through per-sample partial
//! derivatives:
//!
//! * partial dependence (PD) and marginal (M) curves,
//! * accumulated local effects (ALE) and accumulated cross effects (ACE),
//! * accumulated total derivative effects (ATDEV = ALE + sum of ACE), which
//!   match the marginal curve up to a constant when the dependence between
//!   predictors is captured by `x_k = m_k(x_j) + e_k`,
//! * local effect (LE) curves of conditional mean derivatives,
//!
//! plus two importance summaries: variances of the ATDEV matrix cells and the
//! derivative-based global sensitivity measure `E[(df/dx_j)^2]`.
//!
//! Typical flow: build or load a [`Dataset`], pick a [`Predictor`], compute a
//! [`GradientTable`], fit a [`DependenceModel`] per column and call the
//! estimators in [`effects`].

pub mod data;
pub mod dependence;
pub mod effects;
pub mod error;
pub mod export;
pub mod gradients;
pub mod importance;
pub mod model;
pub mod simgen;
pub mod stats;

pub use data::{center, quantile_bins, BinScheme, CurveKind, Dataset, EffectCurve, ResponseColumn};
pub use dependence::{corr_matrix, fit_dependence, CorrelationMatrix, DependenceMethod, DependenceModel};
pub use effects::{EffectMatrix, MatrixKind};
pub use error::{Error, ErrorClass, Result};
pub use gradients::{DerivativeField, DerivativeMethod, GradientTable};
pub use importance::ImportanceReport;
pub use model::{AnalyticModel, ExternalModel, MlpModel, ModelId, Predictor};
