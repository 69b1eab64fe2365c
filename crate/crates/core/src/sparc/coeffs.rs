use crate::error::{DmeError, Result};
use serde::{Deserialize, Serialize};

/// `c_k = B·sqrt((2 ln L / d²)·(1 − 2 ln L / d)^{k−1})` for `k = 1..=m`.
///
/// Logs are natural; the contraction factor `1 − 2 ln L/d` is the fraction
/// of residual energy left after each greedy section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffSchedule {
    pub bound: f64,
    pub section: usize,
    pub d: usize,
    /// `c[k]` is the coefficient of 0-based section `k`.
    pub c: Vec<f64>,
}

impl CoeffSchedule {
    pub fn new(bound: f64, section: usize, d: usize, levels: usize) -> Result<Self> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(DmeError::param(format!("coefficient bound must be positive, got {bound}")));
        }
        if section == 0 {
            return Err(DmeError::param("section size L must be >= 1"));
        }
        let rate = Self::rate(section, d);
        if rate >= 1.0 {
            return Err(DmeError::param(format!(
                "rate exceeds capacity of one section: need d > 2 ln L (d={d}, L={section})"
            )));
        }
        let base = 2.0 * (section as f64).ln() / (d as f64 * d as f64);
        let c = (0..levels).map(|k| bound * (base * (1.0 - rate).powi(k as i32)).sqrt()).collect();
        Ok(CoeffSchedule { bound, section, d, c })
    }

    /// `2 ln L / d`
    pub fn rate(section: usize, d: usize) -> f64 {
        2.0 * (section as f64).ln() / d as f64
    }

    /// `c_{k+1} / c_k`
    pub fn ratio(&self) -> f64 {
        (1.0 - Self::rate(self.section, self.d)).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_coefficient_and_ratio() {
        let s = CoeffSchedule::new(1.0, 2, 512, 4).unwrap();
        assert!((s.c[0] - (2.0 * 2f64.ln()).sqrt() / 512.0).abs() < 1e-18);
        assert!((s.c[0] - 2.2996e-3).abs() < 1e-7);
        for w in s.c.windows(2) {
            assert!((w[1] / w[0] - 0.998_645).abs() < 1e-6);
            assert!((w[1] / w[0] - s.ratio()).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_in_bound_and_validated() {
        let a = CoeffSchedule::new(1.0, 16, 64, 5).unwrap();
        let b = CoeffSchedule::new(2.0, 16, 64, 5).unwrap();
        for (x, y) in a.c.iter().zip(&b.c) {
            assert!((2.0 * x - y).abs() < 1e-16);
        }
        assert!(CoeffSchedule::new(0.0, 16, 64, 5).is_err());
        assert!(CoeffSchedule::new(1.0, 16, 5, 5).is_err());
        assert!(CoeffSchedule::new(1.0, 4, 2, 5).is_err());
    }

    #[test]
    fn energy_below_bound() {
        for (l, d, m) in [(4usize, 32usize, 64usize), (16, 64, 10), (1024, 512, 200), (2, 8, 3)] {
            let s = CoeffSchedule::new(1.0, l, d, m).unwrap();
            let energy: f64 = s.c.iter().map(|c| c * c * d as f64).sum();
            let closed = 1.0 - (1.0 - CoeffSchedule::rate(l, d)).powi(m as i32);
            assert!(energy <= closed * (1.0 + 1e-12) && closed <= 1.0, "{energy} {closed}");
        }
    }
}
