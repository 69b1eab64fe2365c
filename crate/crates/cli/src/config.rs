//! The run configuration file (TOML).
//!
//! ```toml
//! seed = 7
//! formats = ["summary", "svg"]
//!
//! [[block]]
//! name = "gaussian"
//! [block.sweep]
//! kind = "gaussian"
//! d = 64
//! m = 50
//! dissims = [0.01, 1.0]
//! trials = 5
//! compressors = [{ scheme = "sparsereg" }, { scheme = "randk" }]
//! bit_budget = 600
//! ```
//!
//! Every table rejects unknown keys.

use crate::error::CliError;
use dme_core::harness::{SchemeConfig, SweepSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    /// Per-block records; always written.
    Csv,
    /// Grouped mean/std table next to each records file.
    Summary,
    /// Line plot of the summary.
    Svg,
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv, OutputFormat::Summary]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Worker threads; omitted = all cores.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
    #[serde(default, rename = "block")]
    pub blocks: Vec<Block>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskConfig>,
}

/// What a block runs, once validated.
#[derive(Debug, Clone, Copy)]
pub enum BlockKind<'a> {
    Sweep(&'a SweepSpec),
    Task(&'a TaskConfig),
}

impl Block {
    pub fn kind(&self) -> Result<BlockKind<'_>, CliError> {
        match (&self.sweep, &self.task) {
            (Some(s), None) => Ok(BlockKind::Sweep(s)),
            (None, Some(t)) => Ok(BlockKind::Task(t)),
            _ => Err(CliError::Config(format!("block `{}` needs exactly one of `sweep` or `task`", self.name))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Kmeans,
    PowerIter,
    Linreg,
    Logreg,
    ProjectedGd,
}

fn one() -> usize {
    1
}

/// A downstream learning task run once per (compressor, trial).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub task: TaskKind,
    pub iterations: usize,
    /// GD learning rate; for `projected_gd`, omitted = `R/(B√T)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_size: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_clusters: Option<usize>,
    /// Ball radius `R` (projected_gd).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Gradient clip `B` (projected_gd).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_bound: Option<f64>,
    /// SparseReg section size `L` (projected_gd).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section: Option<usize>,
    #[serde(default = "one")]
    pub trials: usize,
    /// Compressors to compare; unused by `projected_gd`.
    #[serde(default)]
    pub compressors: Vec<SchemeConfig>,
    pub data: DataSpec,
}

fn default_n() -> usize {
    100
}
fn default_separation() -> f64 {
    5.0
}
fn default_ratio() -> f64 {
    4.0
}
fn default_dissim() -> f64 {
    1.0
}
fn default_noise() -> f64 {
    1e-2
}
fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSpec {
    /// Generated per trial. Which knobs matter depends on the task:
    /// `separation` (kmeans clusters, also logreg classes), `ratio`
    /// (power_iter spike), `dissim` and `noise_var` (linreg mixture),
    /// `dissim` and `center_scale` (projected_gd quadratic centers).
    Synthetic {
        m: usize,
        d: usize,
        /// Points per client.
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_separation")]
        separation: f64,
        #[serde(default = "default_ratio")]
        ratio: f64,
        #[serde(default = "default_dissim")]
        dissim: f64,
        #[serde(default = "default_noise")]
        noise_var: f64,
        #[serde(default = "default_scale")]
        center_scale: f64,
    },
    /// A numeric CSV with a header, shuffled per trial and split into `m`
    /// shards. Relative paths resolve against the config file.
    Csv {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label_column: Option<String>,
        m: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pca_dim: Option<usize>,
    },
}

impl RunConfig {
    /// Parse, reporting syntax and schema errors with a 1-based line and
    /// column.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map(|s| line_col(text, s.start)).unwrap_or((1, 1));
            CliError::Parse { line, column, message: e.message().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let mut seen = std::collections::BTreeSet::new();
        for b in &self.blocks {
            if b.name.is_empty() || !b.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
                return Err(CliError::Config(format!("block name `{}` must be [A-Za-z0-9._-]+", b.name)));
            }
            if !seen.insert(b.name.as_str()) {
                return Err(CliError::Config(format!("duplicate block name `{}`", b.name)));
            }
            let checked = match b.kind()? {
                BlockKind::Sweep(spec) => spec.expand().iter().try_for_each(|e| e.validate().map_err(CliError::from)),
                BlockKind::Task(task) => task.validate(),
            };
            checked.map_err(|e| CliError::Config(format!("block `{}`: {}", b.name, e.to_string().trim_start_matches("invalid config: "))))?;
        }
        if self.jobs == Some(0) {
            return Err(CliError::Config("jobs must be >= 1".into()));
        }
        Ok(())
    }

    /// Hash of everything that affects results: the seed and the blocks.
    /// Output location, thread count and formats are excluded.
    pub fn hash(&self, seed: u64) -> String {
        #[derive(Serialize)]
        struct Meaningful<'a> {
            seed: u64,
            blocks: &'a [Block],
        }
        let json = serde_json::to_vec(&Meaningful { seed, blocks: &self.blocks }).expect("config serializes");
        hex::encode(&Sha256::digest(&json)[..8])
    }

    pub fn wants(&self, f: OutputFormat) -> bool {
        self.formats.contains(&f)
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}
