use serde::{Deserialize, Serialize};

use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CurveKind {
    PD,
    Marginal,
    ALE,
    ACE,
    ATDEV,
    LE,
    LEcross,
}

impl CurveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CurveKind::PD => "PD",
            CurveKind::Marginal => "Marginal",
            CurveKind::ALE => "ALE",
            CurveKind::ACE => "ACE",
            CurveKind::ATDEV => "ATDEV",
            CurveKind::LE => "LE",
            CurveKind::LEcross => "LEcross",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "PD" => CurveKind::PD,
            "Marginal" => CurveKind::Marginal,
            "ALE" => CurveKind::ALE,
            "ACE" => CurveKind::ACE,
            "ATDEV" => CurveKind::ATDEV,
            "LE" => CurveKind::LE,
            "LEcross" => CurveKind::LEcross,
            _ => return None,
        })
    }
}

/// A one-dimensional effect sampled on the grid of the column variable `j`.
///
/// `k` is the row variable for cross curves (ACE and off-diagonal LE).
/// `counts` holds the number of observations behind each grid point and is
/// the weighting used for centering and for importance variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectCurve {
    pub kind: CurveKind,
    pub j: usize,
    pub k: Option<usize>,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub counts: Vec<usize>,
    pub centered: bool,
}

impl EffectCurve {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn weighted_mean(&self) -> f64 {
        stats::weighted_mean(&self.values, &self.counts)
    }

    /// Variance of the curve over the empirical distribution of `x_j`.
    pub fn weighted_variance(&self) -> f64 {
        stats::weighted_variance(&self.values, &self.counts)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn range(&self) -> f64 {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }

    /// Largest pointwise gap to `other` over grid points where `mask` holds.
    pub fn max_gap(&self, other: &EffectCurve, mask: Option<&[bool]>) -> f64 {
        assert_eq!(self.len(), other.len(), "curves on different grids");
        self.values
            .iter()
            .zip(&other.values)
            .enumerate()
            .filter(|(i, _)| mask.is_none_or(|m| m[*i]))
            .fold(0.0_f64, |acc, (_, (a, b))| acc.max((a - b).abs()))
    }
}

/// Subtracts the count-weighted mean so that level constants drop out.
pub fn center(curve: &EffectCurve) -> EffectCurve {
    let m = curve.weighted_mean();
    EffectCurve {
        values: curve.values.iter().map(|v| v - m).collect(),
        centered: true,
        ..curve.clone()
    }
}
