//! Distributed gradient descent and SparseReg projected gradient descent.

use super::dataset::{Shard, ShardedDataset};
use super::driver::DmeDriver;
use crate::compressors::Compressor;
use crate::error::{DmeError, Result};
use crate::rng::RngStream;
use crate::sparc::{SparseReg, SparseRegState};
use crate::compressors::SharedState;
use crate::vector::{dist_sq, dot, norm, scaled};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    /// `(1/2n)·Σ (⟨w,x⟩ − y)²`
    Squared,
    /// `(1/n)·Σ log(1 + exp(−y⟨w,x⟩))`, labels ±1.
    Logistic,
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Loss {
    pub fn value(self, w: &[f64], shard: &Shard) -> f64 {
        let n = shard.len() as f64;
        let total: f64 = shard
            .features
            .iter()
            .zip(&shard.labels)
            .map(|(x, &y)| match self {
                Loss::Squared => 0.5 * (dot(w, x) - y).powi(2),
                Loss::Logistic => softplus(-y * dot(w, x)),
            })
            .sum();
        total / n
    }

    pub fn gradient(self, w: &[f64], shard: &Shard) -> Vec<f64> {
        let n = shard.len() as f64;
        let mut g = vec![0.0; w.len()];
        for (x, &y) in shard.features.iter().zip(&shard.labels) {
            let coef = match self {
                Loss::Squared => dot(w, x) - y,
                Loss::Logistic => -y * sigmoid(-y * dot(w, x)),
            };
            g.iter_mut().zip(x).for_each(|(gi, xi)| *gi += coef * xi);
        }
        g.iter_mut().for_each(|gi| *gi /= n);
        g
    }

    /// Test MSE (squared) or accuracy (logistic, sign of `⟨w,x⟩`).
    pub fn test_metric(self, w: &[f64], shard: &Shard) -> f64 {
        let n = shard.len() as f64;
        match self {
            Loss::Squared => 2.0 * self.value(w, shard),
            Loss::Logistic => {
                let hits = shard.features.iter().zip(&shard.labels).filter(|(x, &y)| (dot(w, x) >= 0.0) == (y > 0.0)).count();
                hits as f64 / n
            }
        }
    }
}

/// A federated objective `f(w) = (1/m)·Σ f_i(w)`.
pub trait Objective: Sync {
    fn clients(&self) -> usize;
    fn dim(&self) -> usize;
    fn local_value(&self, client: usize, w: &[f64]) -> f64;
    fn local_gradient(&self, client: usize, w: &[f64]) -> Vec<f64>;

    fn value(&self, w: &[f64]) -> f64 {
        (0..self.clients()).map(|i| self.local_value(i, w)).sum::<f64>() / self.clients() as f64
    }
}

/// Empirical risk of a loss on each client's shard.
pub struct DatasetObjective<'a> {
    pub data: &'a ShardedDataset,
    pub loss: Loss,
}

impl Objective for DatasetObjective<'_> {
    fn clients(&self) -> usize {
        self.data.clients()
    }

    fn dim(&self) -> usize {
        self.data.feature_dim
    }

    fn local_value(&self, client: usize, w: &[f64]) -> f64 {
        self.loss.value(w, &self.data.shards[client])
    }

    fn local_gradient(&self, client: usize, w: &[f64]) -> Vec<f64> {
        self.loss.gradient(w, &self.data.shards[client])
    }
}

/// `f_i(w) = ‖w − c_i‖²/2`; the minimizer of `f` is the mean of the `c_i`.
pub struct QuadraticObjective {
    pub centers: Vec<Vec<f64>>,
}

impl Objective for QuadraticObjective {
    fn clients(&self) -> usize {
        self.centers.len()
    }

    fn dim(&self) -> usize {
        self.centers[0].len()
    }

    fn local_value(&self, client: usize, w: &[f64]) -> f64 {
        0.5 * dist_sq(w, &self.centers[client])
    }

    fn local_gradient(&self, client: usize, w: &[f64]) -> Vec<f64> {
        w.iter().zip(&self.centers[client]).map(|(a, b)| a - b).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GdConfig {
    pub loss: Loss,
    pub iterations: usize,
    pub step_size: f64,
}

/// Training loss above which a run is declared divergent.
pub const DIVERGENCE_LOSS: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct GdTrace {
    /// `weights[0]` is the start, then one entry per completed round.
    pub weights: Vec<Vec<f64>>,
    /// Training loss of each entry of `weights`.
    pub losses: Vec<f64>,
    pub test_metric: Option<f64>,
    pub diverged: bool,
}

fn local_gradients(obj: &dyn Objective, w: &[f64]) -> Vec<Vec<f64>> {
    use rayon::prelude::*;
    (0..obj.clients()).into_par_iter().map(|i| obj.local_gradient(i, w)).collect()
}

/// `w ← w − η·ĝ` where `ĝ` is the DME estimate of the clients' full local
/// gradients.
pub fn distributed_gd(
    data: &ShardedDataset,
    cfg: &GdConfig,
    w0: Vec<f64>,
    dme: &mut DmeDriver,
    test: Option<&Shard>,
) -> Result<GdTrace> {
    if cfg.iterations == 0 || !(cfg.step_size > 0.0) {
        return Err(DmeError::param("GD needs iterations >= 1 and step_size > 0"));
    }
    if w0.len() != data.feature_dim {
        return Err(DmeError::Dimension { expected: data.feature_dim, got: w0.len() });
    }
    let obj = DatasetObjective { data, loss: cfg.loss };
    let mut trace = GdTrace { losses: vec![obj.value(&w0)], weights: vec![w0], test_metric: None, diverged: false };
    for _ in 0..cfg.iterations {
        let w = trace.weights.last().expect("nonempty");
        let grads = local_gradients(&obj, w);
        let rows: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
        let g = dme.aggregate(&rows)?.estimate.values;
        let next: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| wi - cfg.step_size * gi).collect();
        let loss = obj.value(&next);
        trace.weights.push(next);
        trace.losses.push(loss);
        if !(loss.is_finite() && loss <= DIVERGENCE_LOSS) {
            trace.diverged = true;
            break;
        }
    }
    if let Some(t) = test {
        trace.test_metric = Some(cfg.loss.test_metric(trace.weights.last().expect("nonempty"), t));
    }
    Ok(trace)
}

/// Euclidean projection onto the ball of radius `radius`.
pub fn project_ball(w: &[f64], radius: f64) -> Vec<f64> {
    let n = norm(w);
    if n <= radius {
        w.to_vec()
    } else {
        scaled(w, radius / n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectedGdConfig {
    /// Radius `R` of the feasible ball.
    pub radius: f64,
    /// Gradient norm bound `B`; larger local gradients are clipped.
    pub grad_bound: f64,
    pub iterations: usize,
    /// SparseReg section size `L`.
    pub section: usize,
    /// Defaults to `R/(B√T)`.
    #[serde(default)]
    pub step_size: Option<f64>,
}

impl ProjectedGdConfig {
    pub fn step(&self) -> f64 {
        self.step_size.unwrap_or(self.radius / (self.grad_bound * (self.iterations as f64).sqrt()))
    }
}

#[derive(Debug, Clone)]
pub struct ProjectedTrace {
    /// `w⁰ … w^T`.
    pub iterates: Vec<Vec<f64>>,
    /// `(1/T)·Σ_{t<T} w^t`.
    pub averaged: Vec<f64>,
    /// Local gradients rescaled to norm `B`.
    pub clipped_gradients: usize,
    /// The protocol state of the last round (its codebook is the one used
    /// throughout); `None` if every round was skipped.
    pub state: Option<SparseRegState>,
    pub total_bits: u64,
}

/// Projected GD with SparseReg aggregation. The codebook is drawn once;
/// the level permutation is redrawn every round.
pub fn projected_gd_sparsereg(
    obj: &dyn Objective,
    cfg: &ProjectedGdConfig,
    w0: Vec<f64>,
    root: RngStream,
    trial: u64,
) -> Result<ProjectedTrace> {
    if cfg.iterations == 0 || !(cfg.radius > 0.0) || !(cfg.grad_bound > 0.0) {
        return Err(DmeError::param("projected GD needs T >= 1, R > 0, B > 0"));
    }
    let compressor: Arc<dyn Compressor> = Arc::new(SparseReg::new(cfg.section).with_bound(cfg.grad_bound));
    let mut dme = DmeDriver::new(compressor, root, trial);
    let eta = cfg.step();
    let mut w = project_ball(&w0, cfg.radius);
    let mut iterates = vec![w.clone()];
    let mut clipped = 0usize;
    for _ in 0..cfg.iterations {
        let grads: Vec<Vec<f64>> = local_gradients(obj, &w)
            .into_iter()
            .map(|g| {
                let n = norm(&g);
                if n > cfg.grad_bound {
                    clipped += 1;
                    scaled(&g, cfg.grad_bound / n)
                } else {
                    g
                }
            })
            .collect();
        // A SPARC codeword is never zero, so an exactly stationary point
        // would otherwise be left. Clients at a stationary point skip the
        // round.
        if grads.iter().all(|g| g.iter().all(|&v| v == 0.0)) {
            iterates.push(w.clone());
            continue;
        }
        let rows: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
        let g = dme.aggregate(&rows)?.estimate.values;
        let step: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| wi - eta * gi).collect();
        w = project_ball(&step, cfg.radius);
        iterates.push(w.clone());
    }
    let t = cfg.iterations as f64;
    let d = w.len();
    let averaged = (0..d).map(|j| iterates[..cfg.iterations].iter().map(|v| v[j]).sum::<f64>() / t).collect();
    let state = match dme.state() {
        Some(SharedState::SparseReg(s)) => Some(s.clone()),
        _ => None,
    };
    Ok(ProjectedTrace { iterates, averaged, clipped_gradients: clipped, state, total_bits: dme.total_bits() })
}

/// The bias constant `Γ₁ = B²·(1 + (10 ln L/d)·e^{m ln L/d}·(δ₁+δ₂))²·(1 − 2 ln L/d)^m`
/// of the projected-GD guarantee, with natural logs.
pub fn gamma1(bound: f64, section: usize, d: usize, m: usize, delta1: f64, delta2: f64) -> f64 {
    let r = (section as f64).ln() / d as f64;
    let infl = 1.0 + 10.0 * r * (m as f64 * r).exp() * (delta1 + delta2);
    bound * bound * infl * infl * (1.0 - 2.0 * r).powi(m as i32)
}

/// Right-hand side `R(2B² + Γ₁)/(2B√T) + √Γ₁·R` of the guarantee.
pub fn projected_gd_bound(radius: f64, bound: f64, iterations: usize, gamma1: f64) -> f64 {
    radius * (2.0 * bound * bound + gamma1) / (2.0 * bound * (iterations as f64).sqrt()) + gamma1.sqrt() * radius
}
