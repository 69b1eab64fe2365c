//! Running task blocks.

use crate::config::{DataSpec, TaskConfig, TaskKind};
use crate::error::CliError;
use dme_core::harness::{GeneratorKind, GeneratorSpec, SchemeConfig};
use dme_core::tasks::{
    distributed_gd, gen_gaussian_clusters, gen_mixture_regression, gen_spiked, ingest_csv, kmeans, power_iteration,
    project_ball, projected_gd_sparsereg, DmeDriver, GdConfig, Loss, Objective, ProjectedGdConfig, QuadraticObjective,
    Shard, ShardedDataset,
};
use dme_core::{DmeError, Purpose, RngStream, Scheme};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One row of a task records file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub label: String,
    pub scheme: String,
    pub task: TaskKind,
    pub trial: u64,
    pub iteration: usize,
    pub metric: String,
    pub value: Option<f64>,
    /// Bits each client sent over the whole run.
    pub bits_per_client: Option<f64>,
    pub error: Option<String>,
}

impl TaskConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: &str| Err(CliError::Config(msg.to_string()));
        if self.iterations == 0 || self.trials == 0 {
            return bad("task needs iterations >= 1 and trials >= 1");
        }
        if self.step_size.is_some_and(|s| !(s > 0.0)) {
            return bad("step_size must be > 0");
        }
        match self.task {
            TaskKind::ProjectedGd => {
                if !self.compressors.is_empty() {
                    return bad("projected_gd always uses SparseReg; set `section` instead of `compressors`");
                }
                if self.radius.is_none() || self.grad_bound.is_none() || self.section.is_none() {
                    return bad("projected_gd needs radius, grad_bound and section");
                }
                if !matches!(self.data, DataSpec::Synthetic { .. }) {
                    return bad("projected_gd runs on synthetic quadratics only");
                }
            }
            task => {
                if self.compressors.is_empty() {
                    return bad("task needs at least one compressor");
                }
                for c in &self.compressors {
                    c.validate()?;
                }
                if task == TaskKind::Kmeans && !self.n_clusters.is_some_and(|k| k >= 1) {
                    return bad("kmeans needs n_clusters >= 1");
                }
                if matches!(task, TaskKind::Linreg | TaskKind::Logreg) && self.step_size.is_none() {
                    return bad("linreg/logreg need step_size");
                }
            }
        }
        Ok(())
    }
}

struct TrialData {
    train: ShardedDataset,
    test: Option<Shard>,
}

fn load(cfg: &TaskConfig, base: &Path, root: &RngStream, trial: u64) -> Result<TrialData, CliError> {
    let mut rng = root.stream(trial, 0, Purpose::Dataset);
    match &cfg.data {
        DataSpec::Csv { path, label_column, m, pca_dim } => {
            let path = base.join(path);
            let file = std::fs::File::open(&path).map_err(CliError::io(&path))?;
            let train = ingest_csv(std::io::BufReader::new(file), label_column.as_deref(), *m, &mut rng, *pca_dim)?;
            Ok(TrialData { train, test: None })
        }
        &DataSpec::Synthetic { m, d, n, separation, ratio, dissim, noise_var, .. } => match cfg.task {
            TaskKind::Kmeans => {
                let k = cfg.n_clusters.expect("validated");
                Ok(TrialData { train: gen_gaussian_clusters(m, d, n, k, separation, &mut rng)?, test: None })
            }
            TaskKind::PowerIter => Ok(TrialData { train: gen_spiked(m, d, n, ratio, &mut rng)?.0, test: None }),
            TaskKind::Linreg => {
                let mix = gen_mixture_regression(m, d, n, dissim, noise_var, &mut rng)?;
                let test = mix.sample(n, &mut rng).pooled();
                Ok(TrialData { train: mix.dataset, test: Some(test) })
            }
            TaskKind::Logreg => {
                // Two classes labelled ±1; the second half of each client's
                // points is held out.
                let all = gen_gaussian_clusters(m, d, 2 * n, 2, separation, &mut rng)?;
                let mut train = Vec::with_capacity(m);
                let mut test = Shard { features: Vec::new(), labels: Vec::new() };
                for s in all.shards {
                    let labels: Vec<f64> = s.labels.iter().map(|&l| if l == 0.0 { -1.0 } else { 1.0 }).collect();
                    test.features.extend_from_slice(&s.features[n..]);
                    test.labels.extend_from_slice(&labels[n..]);
                    train.push(Shard { features: s.features[..n].to_vec(), labels: labels[..n].to_vec() });
                }
                Ok(TrialData { train: ShardedDataset::new(train)?, test: Some(test) })
            }
            TaskKind::ProjectedGd => unreachable!("projected_gd has no dataset"),
        },
    }
}

fn series(base: &TaskRecord, metric: &str, values: &[f64]) -> Vec<TaskRecord> {
    values
        .iter()
        .enumerate()
        .map(|(it, &v)| TaskRecord { iteration: it, metric: metric.into(), value: Some(v), ..base.clone() })
        .collect()
}

fn run_one(
    cfg: &TaskConfig,
    comp: &SchemeConfig,
    data: &TrialData,
    root: &RngStream,
    trial: u64,
) -> Result<Vec<TaskRecord>, DmeError> {
    let mut dme = DmeDriver::new(comp.build(None)?, *root, trial);
    let mut rng = root.stream(trial, 0, Purpose::Task);
    let base = TaskRecord {
        label: comp.display_label(),
        scheme: scheme_name(comp),
        task: cfg.task,
        trial,
        iteration: 0,
        metric: String::new(),
        value: None,
        bits_per_client: None,
        error: None,
    };
    let m = data.train.clients() as f64;
    let mut out = match cfg.task {
        TaskKind::Kmeans => {
            let k = cfg.n_clusters.expect("validated");
            let trace = kmeans(&data.train, k, cfg.iterations, 0, &mut dme, &mut rng)?;
            series(&base, "cost", &trace.costs)
        }
        TaskKind::PowerIter => {
            let trace = power_iteration(&data.train, cfg.iterations, &mut dme, &mut rng)?;
            series(&base, "rayleigh", &trace.rayleigh)
        }
        TaskKind::Linreg | TaskKind::Logreg => {
            let (loss, test_name) =
                if cfg.task == TaskKind::Linreg { (Loss::Squared, "test_mse") } else { (Loss::Logistic, "test_accuracy") };
            let gd = GdConfig { loss, iterations: cfg.iterations, step_size: cfg.step_size.expect("validated") };
            let w0 = vec![0.0; data.train.feature_dim];
            let trace = distributed_gd(&data.train, &gd, w0, &mut dme, data.test.as_ref())?;
            let mut rows = series(&base, "loss", &trace.losses);
            if let Some(v) = trace.test_metric {
                rows.push(TaskRecord { iteration: trace.losses.len() - 1, metric: test_name.into(), value: Some(v), ..base.clone() });
            }
            if trace.diverged {
                rows.push(TaskRecord { metric: "diverged".into(), value: Some(1.0), ..base.clone() });
            }
            rows
        }
        TaskKind::ProjectedGd => unreachable!("handled separately"),
    };
    let bits = dme.total_bits() as f64 / m;
    out.iter_mut().for_each(|r| r.bits_per_client = Some(bits));
    Ok(out)
}

fn scheme_name(c: &SchemeConfig) -> String {
    if c.reps > 1 {
        format!("{}x{}", c.scheme.name(), c.reps)
    } else {
        c.scheme.name().to_string()
    }
}

fn run_projected(cfg: &TaskConfig, root: &RngStream, trial: u64) -> Result<Vec<TaskRecord>, DmeError> {
    let DataSpec::Synthetic { m, d, center_scale, dissim, .. } = cfg.data else { unreachable!("validated") };
    let spec = GeneratorSpec { kind: GeneratorKind::Gaussian, d, m, center_scale, dissim };
    let inst = spec.generate(&mut root.stream(trial, 0, Purpose::Dataset))?;
    let obj = QuadraticObjective { centers: inst.clients.into_iter().map(|c| c.values).collect() };
    let pcfg = ProjectedGdConfig {
        radius: cfg.radius.expect("validated"),
        grad_bound: cfg.grad_bound.expect("validated"),
        iterations: cfg.iterations,
        section: cfg.section.expect("validated"),
        step_size: cfg.step_size,
    };
    let trace = projected_gd_sparsereg(&obj, &pcfg, vec![0.0; d], *root, trial)?;
    // The quadratics' constrained minimizer is the projected mean.
    let mean: Vec<f64> = (0..d).map(|j| obj.centers.iter().map(|c| c[j]).sum::<f64>() / m as f64).collect();
    let best = obj.value(&project_ball(&mean, pcfg.radius));
    let label = format!("sparsereg-L{}", pcfg.section);
    let base = TaskRecord {
        label,
        scheme: Scheme::SparseReg.name().into(),
        task: TaskKind::ProjectedGd,
        trial,
        iteration: 0,
        metric: String::new(),
        value: None,
        bits_per_client: Some(trace.total_bits as f64 / m as f64),
        error: None,
    };
    let values: Vec<f64> = trace.iterates.iter().map(|w| obj.value(w)).collect();
    let mut rows = series(&base, "objective", &values);
    rows.push(TaskRecord {
        iteration: cfg.iterations,
        metric: "averaged_gap".into(),
        value: Some(obj.value(&trace.averaged) - best),
        ..base
    });
    Ok(rows)
}

fn failed(label: String, scheme: String, task: TaskKind, trial: u64, e: impl ToString) -> Vec<TaskRecord> {
    vec![TaskRecord {
        label,
        scheme,
        task,
        trial,
        iteration: 0,
        metric: String::new(),
        value: None,
        bits_per_client: None,
        error: Some(e.to_string()),
    }]
}

/// All records of a task block, ordered by compressor, trial, iteration.
pub fn run_task(cfg: &TaskConfig, base_dir: &Path, root: &RngStream) -> Vec<TaskRecord> {
    let trials: Vec<u64> = (0..cfg.trials as u64).collect();
    if cfg.task == TaskKind::ProjectedGd {
        let label = format!("sparsereg-L{}", cfg.section.unwrap_or(0));
        return trials
            .par_iter()
            .map(|&t| {
                run_projected(cfg, root, t)
                    .unwrap_or_else(|e| failed(label.clone(), Scheme::SparseReg.name().into(), cfg.task, t, e))
            })
            .flatten()
            .collect();
    }
    let data: Vec<Result<TrialData, String>> =
        trials.par_iter().map(|&t| load(cfg, base_dir, root, t).map_err(|e| e.to_string())).collect();
    let jobs: Vec<(&SchemeConfig, u64)> =
        cfg.compressors.iter().flat_map(|c| trials.iter().map(move |&t| (c, t))).collect();
    jobs.par_iter()
        .map(|&(comp, t)| {
            let result = match &data[t as usize] {
                Ok(d) => run_one(cfg, comp, d, root, t).map_err(|e| e.to_string()),
                Err(e) => Err(e.clone()),
            };
            result.unwrap_or_else(|e| failed(comp.display_label(), scheme_name(comp), cfg.task, t, e))
        })
        .flatten()
        .collect()
}
