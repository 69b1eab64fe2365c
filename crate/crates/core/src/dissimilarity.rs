//! Spread of the client vectors around their mean.
//!
//! The collaborative schemes' error floors are governed by how far apart
//! the clients are, not how large the vectors are; each scheme has its own
//! notion of distance; the scheme-independent ones live here.

use crate::error::{DmeError, Result};
use crate::vector::{compensated_mean, dist_sq, dot, norm, norm_sq, ClientVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissimilarityReport {
    /// `(1/m) Σ ‖g_i − g‖₂²`
    pub delta2: f64,
    /// `max_i ‖g_i − g‖₂²`
    pub delta2_max: f64,
    /// `max_j (1/m) Σ_i |g_i^j − g^j|`
    pub delta_inf: f64,
    /// `max_{i,j} |g_i^j − g^j|`
    pub delta_inf_max: f64,
    /// `(1/(mπ)) Σ arccos⟨g_i/‖g_i‖, g/‖g‖⟩`; `None` if any vector or the
    /// mean is zero.
    pub delta_corr: Option<f64>,
    /// `(1/m) Σ ‖g_i‖₂²`
    pub b_tilde_sq: f64,
}

pub fn dissimilarity(vectors: &[ClientVector]) -> Result<DissimilarityReport> {
    let rows: Vec<&[f64]> = vectors.iter().map(|v| v.values.as_slice()).collect();
    dissimilarity_rows(&rows)
}

/// Same as [`dissimilarity`] on bare rows.
pub fn dissimilarity_rows(rows: &[&[f64]]) -> Result<DissimilarityReport> {
    let m = rows.len();
    if m == 0 {
        return Err(DmeError::param("dissimilarity needs m >= 1"));
    }
    let g = compensated_mean(rows)?;
    let d = g.len();
    let mf = m as f64;

    let mut delta2 = 0.0;
    let mut delta2_max = 0.0f64;
    let mut delta_inf_max = 0.0f64;
    let mut col_abs = vec![0.0; d];
    let mut b_tilde_sq = 0.0;
    for r in rows {
        let e = dist_sq(r, &g);
        delta2 += e;
        delta2_max = delta2_max.max(e);
        b_tilde_sq += norm_sq(r);
        for ((acc, x), c) in col_abs.iter_mut().zip(r.iter()).zip(&g) {
            let a = (x - c).abs();
            *acc += a;
            delta_inf_max = delta_inf_max.max(a);
        }
    }
    let delta_inf = col_abs.iter().fold(0.0f64, |a, s| a.max(s / mf));

    Ok(DissimilarityReport {
        delta2: delta2 / mf,
        delta2_max,
        delta_inf,
        delta_inf_max,
        delta_corr: delta_corr(rows, &g),
        b_tilde_sq: b_tilde_sq / mf,
    })
}

fn delta_corr(rows: &[&[f64]], mean: &[f64]) -> Option<f64> {
    let nm = norm(mean);
    if nm == 0.0 {
        return None;
    }
    let mut total = 0.0;
    for r in rows {
        let nr = norm(r);
        if nr == 0.0 {
            return None;
        }
        total += angle(dot(r, mean) / (nr * nm));
    }
    Some(total / (rows.len() as f64 * PI))
}

/// arccos with the argument clamped, and exact zero for parallel inputs
/// (so identical clients report `Δ_corr = 0` despite rounding in the norms).
fn angle(cos: f64) -> f64 {
    if cos >= 1.0 - 4.0 * f64::EPSILON {
        0.0
    } else {
        cos.clamp(-1.0, 1.0).acos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::clients_from_rows;
    use proptest::prelude::*;

    fn report(rows: Vec<Vec<f64>>) -> DissimilarityReport {
        dissimilarity(&clients_from_rows(rows).unwrap()).unwrap()
    }

    /// Straight transcription of the definitions, no shared helpers.
    fn brute(rows: &[Vec<f64>]) -> (f64, f64, f64, f64, f64) {
        let m = rows.len();
        let d = rows[0].len();
        let mut g = vec![0.0; d];
        for r in rows {
            for j in 0..d {
                g[j] += r[j] / m as f64;
            }
        }
        let (mut d2, mut d2max, mut dinfmax, mut b) = (0.0, 0.0f64, 0.0f64, 0.0);
        let mut dinf = 0.0f64;
        for j in 0..d {
            let mut s = 0.0;
            for r in rows {
                s += (r[j] - g[j]).abs();
            }
            dinf = dinf.max(s / m as f64);
        }
        for r in rows {
            let mut e = 0.0;
            for j in 0..d {
                e += (r[j] - g[j]).powi(2);
                dinfmax = dinfmax.max((r[j] - g[j]).abs());
                b += r[j] * r[j] / m as f64;
            }
            d2 += e / m as f64;
            d2max = d2max.max(e);
        }
        (d2, d2max, dinf, dinfmax, b)
    }

    #[test]
    fn identical_unit_clients_are_all_zero() {
        let r = report(vec![vec![0.6, 0.8]; 5]);
        assert_eq!(r.delta2, 0.0);
        assert_eq!(r.delta2_max, 0.0);
        assert_eq!(r.delta_inf, 0.0);
        assert_eq!(r.delta_inf_max, 0.0);
        assert_eq!(r.delta_corr, Some(0.0));
    }

    #[test]
    fn two_orthogonal_units() {
        let r = report(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!((r.delta2 - 0.5).abs() < 1e-15);
        assert!((r.delta2_max - 0.5).abs() < 1e-15);
        assert!((r.delta_inf - 0.5).abs() < 1e-15);
        assert!((r.delta_corr.unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(r.b_tilde_sq, 1.0);
    }

    #[test]
    fn zero_client_makes_corr_missing() {
        let r = report(vec![vec![2.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(r.delta2, 1.0);
        assert_eq!(r.delta_inf_max, 1.0);
        assert_eq!(r.b_tilde_sq, 2.0);
        assert_eq!(r.delta_corr, None);
    }

    #[test]
    fn zero_mean_makes_corr_missing() {
        assert_eq!(report(vec![vec![1.0], vec![-1.0]]).delta_corr, None);
    }

    fn instance() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..=20, 1usize..=16).prop_flat_map(|(m, d)| {
            prop::collection::vec(prop::collection::vec(-10.0f64..10.0, d), m)
        })
    }

    fn unit_instance() -> impl Strategy<Value = Vec<Vec<f64>>> {
        // Unit vectors scattered around a common axis so that each has a
        // nonnegative inner product with the mean direction.
        (1usize..=12, 2usize..=8, 0.0f64..1.5).prop_flat_map(|(m, d, spread)| {
            prop::collection::vec(prop::collection::vec(-1.0f64..1.0, d), m).prop_map(move |noise| {
                noise
                    .into_iter()
                    .map(|n| {
                        let mut v: Vec<f64> = n.iter().map(|x| x * spread).collect();
                        v[0] += 1.0;
                        let s = norm(&v);
                        v.iter().map(|x| x / s).collect()
                    })
                    .collect()
            })
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force(rows in instance()) {
            let r = report(rows.clone());
            let (d2, d2max, dinf, dinfmax, b) = brute(&rows);
            let rel = |a: f64, b: f64| (a - b).abs() <= 1e-10 * b.abs().max(1e-300) + 1e-13;
            prop_assert!(rel(r.delta2, d2), "{} vs {}", r.delta2, d2);
            prop_assert!(rel(r.delta2_max, d2max));
            prop_assert!(rel(r.delta_inf, dinf));
            prop_assert!(rel(r.delta_inf_max, dinfmax));
            prop_assert!(rel(r.b_tilde_sq, b));
            prop_assert!(r.delta2 <= r.delta2_max * (1.0 + 1e-12));
            prop_assert!(r.delta_inf <= r.delta_inf_max * (1.0 + 1e-12));
        }

        #[test]
        fn corr_bound_by_mean_norm(rows in unit_instance()) {
            let m = rows.len() as f64;
            let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            let mean = compensated_mean(&refs).unwrap();
            let mn = norm(&mean);
            prop_assume!(mn > 1e-9);
            prop_assume!(rows.iter().all(|r| dot(r, &mean) >= 0.0));
            let mut pair = 0.0;
            for i in 0..rows.len() {
                for j in i + 1..rows.len() {
                    pair += dot(&rows[i], &rows[j]);
                }
            }
            let rhs = (1.0 / m + 2.0 / (m * m) * pair).max(0.0).sqrt();
            let corr = report(rows).delta_corr.unwrap();
            prop_assert!((PI * corr).cos() >= rhs - 1e-12, "{} < {}", (PI * corr).cos(), rhs);
        }
    }
}
