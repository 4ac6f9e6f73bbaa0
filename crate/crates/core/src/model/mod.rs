//! Model backends behind a single [`Predictor`] interface.
//!
//! Three backends are provided: closed-form polynomial models
//! ([`AnalyticModel`]), a one-hidden-layer tanh network trained in-process
//! ([`MlpModel`]) and an external scoring process ([`ExternalModel`]). The
//! first two expose exact gradients; the external backend is differentiated
//! numerically by [`crate::gradients`].

mod analytic;
mod external;
mod mlp;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

pub use analytic::{AnalyticModel, AnalyticSpec, ModelId, Term};
pub use external::ExternalModel;
pub use mlp::{fit_mlp, EpochRecord, FitReport, MlpConfig, MlpModel};

/// A fitted regression function `f: R^p -> R`.
///
/// Implementations must be deterministic and callable from several threads.
pub trait Predictor: Send + Sync {
    fn arity(&self) -> usize;

    /// One prediction per row of the `N x p` input.
    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>>;

    fn has_analytic_gradient(&self) -> bool {
        false
    }

    /// `N x p` matrix of partial derivatives at each row.
    fn gradient(&self, _x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Err(Error::InvalidArgument(
            "model has no analytic gradient".into(),
        ))
    }
}

impl<T: Predictor + ?Sized> Predictor for Box<T> {
    fn arity(&self) -> usize {
        (**self).arity()
    }
    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        (**self).predict(x)
    }
    fn has_analytic_gradient(&self) -> bool {
        (**self).has_analytic_gradient()
    }
    fn gradient(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        (**self).gradient(x)
    }
}

pub(crate) fn check_width(expected: usize, x: &ArrayView2<'_, f64>) -> Result<()> {
    if x.ncols() != expected {
        return Err(Error::WidthMismatch {
            expected,
            found: x.ncols(),
        });
    }
    Ok(())
}

/// Runs `predict` and enforces the output contract (count and finiteness).
pub fn predict_checked(model: &dyn Predictor, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    check_width(model.arity(), &x)?;
    let out = model.predict(x)?;
    if out.len() != x.nrows() {
        return Err(Error::Protocol(format!(
            "{} predictions for {} rows",
            out.len(),
            x.nrows()
        )));
    }
    if let Some(row) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row,
            what: "prediction".into(),
        });
    }
    Ok(out)
}

/// Coefficient of determination `1 - MSE / var(y)`.
pub fn r_squared(y: &[f64], pred: &[f64]) -> f64 {
    let mse = y
        .iter()
        .zip(pred)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / y.len() as f64;
    1.0 - mse / crate::stats::variance(y)
}
