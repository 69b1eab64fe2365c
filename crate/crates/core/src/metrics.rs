use crate::error::{DmeError, Result};
use crate::vector::{dot, norm, MeanTarget};
use serde::{Deserialize, Serialize};

/// Estimation error of `ĝ` against a target `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    /// `‖ĝ − g‖₂²`
    pub l2_sq: f64,
    /// `‖ĝ − g‖∞`
    pub linf: f64,
    /// Angle between `ĝ` and `g`; `None` when either is zero.
    pub cosine_dist: Option<f64>,
}

pub fn error_metrics(estimate: &[f64], target: &MeanTarget) -> Result<ErrorMetrics> {
    let g = &target.values;
    if estimate.len() != g.len() {
        return Err(DmeError::Dimension { expected: g.len(), got: estimate.len() });
    }
    let mut l2_sq = 0.0;
    let mut linf = 0.0f64;
    for (a, b) in estimate.iter().zip(g) {
        let e = a - b;
        l2_sq += e * e;
        linf = linf.max(e.abs());
    }
    Ok(ErrorMetrics { l2_sq, linf, cosine_dist: cosine_distance(estimate, g).ok() })
}

/// `arccos(⟨a,b⟩ / (‖a‖‖b‖))` with the ratio clamped to `[-1, 1]`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(DmeError::Metric("cosine distance of a zero vector".into()));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0).acos())
}
