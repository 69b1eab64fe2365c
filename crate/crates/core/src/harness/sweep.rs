//! Seeded, parallel DME sweeps producing one [`ResultRecord`] per
//! (experiment, trial).

use super::budget::match_budget;
use super::config::SchemeConfig;
use super::generators::{GeneratorKind, GeneratorSpec};
use crate::compressors::{init_stream, run_round, Compressor, RoundKey};
use crate::dissimilarity::dissimilarity;
use crate::error::{DmeError, Result};
use crate::metrics::error_metrics;
use crate::rng::{Purpose, RngStream};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::sync::Arc;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    L2,
    Linf,
    Cosine,
}

fn all_metrics() -> Vec<Metric> {
    vec![Metric::L2, Metric::Linf, Metric::Cosine]
}

/// One generator setting × one compressor, repeated over trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub generator: GeneratorSpec,
    pub compressor: SchemeConfig,
    /// When set, the compressor's parameters are re-tuned to this many
    /// bits per client before running.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bit_budget: Option<u64>,
    #[serde(default)]
    pub budget_tol: u64,
    pub trials: usize,
    #[serde(default = "all_metrics")]
    pub metrics: Vec<Metric>,
    /// Also compute the scheme's own dissimilarity (can be costly).
    #[serde(default)]
    pub diagnostics: bool,
}

impl ExperimentSpec {
    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("spec serializes");
        hex::encode(Sha256::digest(json))[..16].to_owned()
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(DmeError::param("trials must be >= 1"));
        }
        self.generator.validate()?;
        if self.bit_budget.is_none() {
            self.compressor.validate()?;
        }
        Ok(())
    }

    /// The compressor configuration actually run, after budget matching.
    pub fn resolved(&self) -> Result<(SchemeConfig, bool)> {
        match self.bit_budget {
            None => Ok((self.compressor.clone(), false)),
            Some(budget) => {
                let g = &self.generator;
                let b = match_budget(&self.compressor, g.d, g.m, budget, self.budget_tol)?;
                Ok((b.config, !b.within_tolerance))
            }
        }
    }
}

/// A grid of dissimilarities × compressors sharing one generator shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub kind: GeneratorKind,
    pub d: usize,
    pub m: usize,
    #[serde(default = "default_scale")]
    pub center_scale: f64,
    pub dissims: Vec<f64>,
    pub compressors: Vec<SchemeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bit_budget: Option<u64>,
    #[serde(default)]
    pub budget_tol: u64,
    pub trials: usize,
    #[serde(default = "all_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub diagnostics: bool,
}

fn default_scale() -> f64 {
    100.0
}

impl SweepSpec {
    /// Experiments in (dissimilarity, compressor) order.
    pub fn expand(&self) -> Vec<ExperimentSpec> {
        self.dissims
            .iter()
            .flat_map(|&dissim| {
                self.compressors.iter().map(move |c| ExperimentSpec {
                    generator: GeneratorSpec { kind: self.kind, d: self.d, m: self.m, center_scale: self.center_scale, dissim },
                    compressor: c.clone(),
                    bit_budget: self.bit_budget,
                    budget_tol: self.budget_tol,
                    trials: self.trials,
                    metrics: self.metrics.clone(),
                    diagnostics: self.diagnostics,
                })
            })
            .collect()
    }
}

/// One trial's outcome. Flat so it maps directly onto a CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub spec_hash: String,
    pub label: String,
    pub scheme: String,
    pub generator: GeneratorKind,
    pub dissim: f64,
    pub trial: u64,
    pub l2_sq: Option<f64>,
    pub linf: Option<f64>,
    pub cosine: Option<f64>,
    pub delta2: Option<f64>,
    pub delta_inf: Option<f64>,
    pub delta_corr: Option<f64>,
    pub scheme_dissim: Option<f64>,
    /// Σ payload bit costs / m.
    pub bits_per_client: Option<f64>,
    pub budget_miss: bool,
    pub degenerate: bool,
    pub clipped: usize,
    pub error: Option<String>,
    /// Milliseconds; only filled when timing is requested, since it breaks
    /// byte-for-byte reproducibility.
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SweepOptions {
    pub record_wall_time: bool,
}

struct Prepared {
    hash: String,
    label: String,
    scheme: String,
    compressor: std::result::Result<Arc<dyn Compressor>, String>,
    budget_miss: bool,
}

fn prepare(spec: &ExperimentSpec) -> Prepared {
    let label = spec.compressor.display_label();
    let resolved = spec.validate().and_then(|()| spec.resolved());
    let (compressor, budget_miss, scheme) = match resolved {
        Ok((cfg, miss)) => {
            let scheme = if cfg.reps > 1 { format!("{}x{}", cfg.scheme, cfg.reps) } else { cfg.scheme.to_string() };
            (cfg.build(None).map_err(|e| e.to_string()), miss, scheme)
        }
        Err(e) => (Err(e.to_string()), false, spec.compressor.scheme.to_string()),
    };
    Prepared { hash: spec.hash(), label, scheme, compressor, budget_miss }
}

fn run_trial(spec: &ExperimentSpec, prep: &Prepared, root: &RngStream, trial: u64, opts: SweepOptions) -> ResultRecord {
    let mut rec = ResultRecord {
        spec_hash: prep.hash.clone(),
        label: prep.label.clone(),
        scheme: prep.scheme.clone(),
        generator: spec.generator.kind,
        dissim: spec.generator.dissim,
        trial,
        l2_sq: None,
        linf: None,
        cosine: None,
        delta2: None,
        delta_inf: None,
        delta_corr: None,
        scheme_dissim: None,
        bits_per_client: None,
        budget_miss: prep.budget_miss,
        degenerate: false,
        clipped: 0,
        error: None,
        wall_ms: None,
    };
    let started = Instant::now();
    if let Err(e) = fill_trial(spec, prep, root, trial, &mut rec) {
        rec.error = Some(e.to_string());
    }
    if opts.record_wall_time {
        rec.wall_ms = Some(started.elapsed().as_secs_f64() * 1e3);
    }
    rec
}

fn fill_trial(spec: &ExperimentSpec, prep: &Prepared, root: &RngStream, trial: u64, rec: &mut ResultRecord) -> Result<()> {
    let compressor = prep.compressor.as_ref().map_err(|e| DmeError::Param(e.clone()))?;
    // Same generator stream for every dissimilarity and compressor of a
    // trial: the comparison uses common random numbers.
    let inst = spec.generator.generate(&mut root.stream(trial, 0, Purpose::Generator))?;
    let report = dissimilarity(&inst.clients)?;
    rec.delta2 = Some(report.delta2);
    rec.delta_inf = Some(report.delta_inf);
    rec.delta_corr = report.delta_corr;

    let key = RoundKey { trial, round: 0 };
    let problem = inst.problem()?;
    let state = compressor.init(&problem, &mut init_stream(root, key))?;
    let rows = inst.rows();
    let out = run_round(compressor.as_ref(), &state, &rows, root, key)?;
    rec.bits_per_client = Some(out.total_bits as f64 / problem.m as f64);
    rec.degenerate = out.estimate.degenerate;
    rec.clipped = out.clipped_clients;
    if let Some(budget) = spec.bit_budget {
        let bits = out.total_bits as f64 / problem.m as f64;
        rec.budget_miss |= (bits - budget as f64).abs() > spec.budget_tol as f64;
    }

    let err = error_metrics(&out.estimate.values, &inst.target)?;
    for metric in &spec.metrics {
        match metric {
            Metric::L2 => rec.l2_sq = Some(err.l2_sq),
            Metric::Linf => rec.linf = Some(err.linf),
            Metric::Cosine => rec.cosine = err.cosine_dist,
        }
    }
    if spec.diagnostics {
        rec.scheme_dissim = compressor.scheme_dissimilarity(&state, &rows)?;
    }
    Ok(())
}

/// Run every trial of every spec. Trials execute in parallel; the output
/// is ordered by (spec, trial) regardless of scheduling, and a failing
/// trial produces a record with `error` set instead of aborting.
pub fn run_sweep(specs: &[ExperimentSpec], root: &RngStream, opts: SweepOptions) -> Vec<ResultRecord> {
    let prepared: Vec<Prepared> = specs.iter().map(prepare).collect();
    let work: Vec<(usize, u64)> =
        specs.iter().enumerate().flat_map(|(s, spec)| (0..spec.trials.max(1) as u64).map(move |t| (s, t))).collect();
    work.par_iter().map(|&(s, t)| run_trial(&specs[s], &prepared[s], root, t, opts)).collect()
}
