//! Client vectors, reference means and the small amount of dense vector
//! arithmetic the schemes need.

use crate::error::{DmeError, Result};
use serde::{Deserialize, Serialize};

/// A vector `g_i` held by one client. Client ids are zero-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientVector {
    pub client_id: usize,
    pub values: Vec<f64>,
}

impl ClientVector {
    pub fn new(client_id: usize, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(DmeError::param("client vector must have d >= 1"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(DmeError::Encode { client: client_id, reason: format!("non-finite entry {v}") });
        }
        Ok(ClientVector { client_id, values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Wrap raw rows as clients `0..m`, checking a common dimension.
pub fn clients_from_rows(rows: Vec<Vec<f64>>) -> Result<Vec<ClientVector>> {
    let d = rows.first().map(Vec::len).ok_or_else(|| DmeError::param("need m >= 1 clients"))?;
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| {
            if r.len() != d {
                return Err(DmeError::Dimension { expected: d, got: r.len() });
            }
            ClientVector::new(i, r)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanKind {
    ArithmeticMean,
    UnitDirectionOfMean,
}

/// The quantity a DME round tries to recover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanTarget {
    pub kind: MeanKind,
    pub values: Vec<f64>,
}

impl MeanTarget {
    pub fn arithmetic(vectors: &[ClientVector]) -> Result<Self> {
        let rows: Vec<&[f64]> = vectors.iter().map(|v| v.values.as_slice()).collect();
        Ok(MeanTarget { kind: MeanKind::ArithmeticMean, values: compensated_mean(&rows)? })
    }

    pub fn unit_direction(vectors: &[ClientVector]) -> Result<Self> {
        let mean = Self::arithmetic(vectors)?.values;
        let n = norm(&mean);
        if n == 0.0 {
            return Err(DmeError::Metric("mean vector is zero; direction undefined".into()));
        }
        Ok(MeanTarget { kind: MeanKind::UnitDirectionOfMean, values: scaled(&mean, 1.0 / n) })
    }
}

/// Coordinate-wise mean with Neumaier compensated summation. A coordinate
/// on which all rows agree averages to that value exactly.
pub fn compensated_mean(rows: &[&[f64]]) -> Result<Vec<f64>> {
    let m = rows.len();
    let d = rows.first().map(|r| r.len()).ok_or_else(|| DmeError::param("need m >= 1 rows"))?;
    let mut out = vec![0.0; d];
    for (j, o) in out.iter_mut().enumerate() {
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        let base = rows[0][j];
        for r in rows {
            if r.len() != d {
                return Err(DmeError::Dimension { expected: d, got: r.len() });
            }
            let x = r[j];
            let t = sum + x;
            if sum.abs() >= x.abs() {
                comp += (sum - t) + x;
            } else {
                comp += (x - t) + sum;
            }
            sum = t;
        }
        *o = if rows.iter().all(|r| r[j] == base) { base } else { (sum + comp) / m as f64 };
    }
    Ok(out)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Unit vector with the direction of `a`, or `None` for the zero vector.
pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    (n > 0.0).then(|| scaled(a, 1.0 / n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_mean_beats_naive_on_cancellation() {
        let rows: Vec<Vec<f64>> = vec![vec![1e16], vec![1.0], vec![-1e16], vec![1.0]];
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        assert_eq!(compensated_mean(&refs).unwrap(), vec![0.5]);
    }

    #[test]
    fn unit_direction_has_unit_norm() {
        let cv = clients_from_rows(vec![vec![3.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let t = MeanTarget::unit_direction(&cv).unwrap();
        assert!((norm(&t.values) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_client_vectors() {
        assert!(ClientVector::new(0, vec![]).is_err());
        assert!(ClientVector::new(0, vec![f64::NAN]).is_err());
        assert!(clients_from_rows(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
