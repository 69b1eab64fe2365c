//! Distributed power iteration on the clients' local second-moment
//! matrices.

use super::dataset::{ShardedDataset, Shard};
use super::driver::DmeDriver;
use crate::compressors::onebit::random_unit;
use crate::error::{DmeError, Result};
use crate::rng::StreamRng;
use crate::vector::{dot, normalized};

/// `(1/n)·XᵀX·v` for one shard.
pub fn local_cov_times(shard: &Shard, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for x in &shard.features {
        let p = dot(x, v);
        out.iter_mut().zip(x).for_each(|(o, xi)| *o += p * xi);
    }
    let n = shard.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// `(1/m)·Σ_i (1/n_i)·X_iᵀX_i`, the matrix the protocol targets. Used for
/// evaluation only.
pub fn pooled_second_moment(data: &ShardedDataset) -> Vec<Vec<f64>> {
    let d = data.feature_dim;
    let m = data.clients() as f64;
    let mut c = vec![vec![0.0; d]; d];
    for s in &data.shards {
        let w = 1.0 / (m * s.len() as f64);
        for x in &s.features {
            for a in 0..d {
                for b in 0..d {
                    c[a][b] += w * x[a] * x[b];
                }
            }
        }
    }
    c
}

pub fn rayleigh(c: &[Vec<f64>], v: &[f64]) -> f64 {
    let cv: Vec<f64> = c.iter().map(|row| dot(row, v)).collect();
    dot(v, &cv) / dot(v, v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerTrace {
    /// `vectors[0]` is the random start, then one unit vector per round.
    pub vectors: Vec<Vec<f64>>,
    /// Rayleigh quotient of each vector against the pooled matrix.
    pub rayleigh: Vec<f64>,
    /// Rounds whose DME output was zero, followed by a fresh random start.
    pub restarts: usize,
}

impl PowerTrace {
    pub fn top_eigenvalue(&self) -> f64 {
        *self.rayleigh.last().expect("nonempty")
    }
}

pub fn power_iteration(
    data: &ShardedDataset,
    iterations: usize,
    dme: &mut DmeDriver,
    rng: &mut StreamRng,
) -> Result<PowerTrace> {
    if iterations == 0 {
        return Err(DmeError::param("power iteration needs iterations >= 1"));
    }
    let pooled = pooled_second_moment(data);
    let v0 = random_unit(data.feature_dim, rng);
    let mut trace = PowerTrace { rayleigh: vec![rayleigh(&pooled, &v0)], vectors: vec![v0], restarts: 0 };
    for _ in 0..iterations {
        let v = trace.vectors.last().expect("nonempty");
        let local: Vec<Vec<f64>> = data.shards.iter().map(|s| local_cov_times(s, v)).collect();
        let rows: Vec<&[f64]> = local.iter().map(Vec::as_slice).collect();
        let est = dme.aggregate(&rows)?.estimate.values;
        let next = match normalized(&est) {
            Some(u) => u,
            None => {
                trace.restarts += 1;
                random_unit(data.feature_dim, rng)
            }
        };
        trace.rayleigh.push(rayleigh(&pooled, &next));
        trace.vectors.push(next);
    }
    Ok(trace)
}
