//! Executing a run configuration and writing its outputs.

use crate::config::{Block, BlockKind, OutputFormat, RunConfig};
use crate::error::CliError;
use crate::summary::{summarize, GroupRow};
use crate::svg::{render, PlotOptions};
use crate::tasks::run_task;
use dme_core::harness::{run_sweep, SweepOptions};
use dme_core::RngStream;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Bumped whenever a records column is added, removed or renamed.
pub const CSV_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Command-line overrides of the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub block: Option<String>,
    /// Directory that relative data paths resolve against.
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockFiles {
    pub records: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub svg: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockReport {
    pub name: String,
    pub kind: &'static str,
    pub status: BlockStatus,
    pub records: usize,
    pub failed_records: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_error: Option<String>,
    pub files: BlockFiles,
    pub summary: Vec<GroupRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub dme: &'static str,
    pub csv_schema: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub versions: Versions,
    pub blocks: Vec<BlockReport>,
}

impl Manifest {
    pub fn all_ok(&self) -> bool {
        self.blocks.iter().all(|b| b.status == BlockStatus::Ok)
    }
}

/// Default output directory when neither `--out` nor the config sets one.
pub const OUT_DIR_ENV: &str = "DME_OUT_DIR";

fn resolve_out_dir(cfg: &RunConfig, opts: &RunOptions) -> PathBuf {
    opts.out_dir
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(|p| opts.base_dir.join(p)))
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("dme-out"))
}

/// Independent root stream per block, keyed by name so running one block
/// alone reproduces its part of a full run.
pub fn block_root(seed: u64, name: &str) -> RngStream {
    let h = Sha256::digest(name.as_bytes());
    RngStream::new(seed).child(u64::from_le_bytes(h[..8].try_into().expect("8 bytes")))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(CliError::io(path))
}

fn records_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Csv(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Csv(e.to_string()))
}

/// Execute one block and write its files into `out`.
fn run_block(block: &Block, cfg: &RunConfig, seed: u64, opts: &RunOptions, out: &Path) -> Result<BlockReport, CliError> {
    let root = block_root(seed, &block.name);
    let (kind, bytes, errors) = match block.kind()? {
        BlockKind::Sweep(spec) => {
            let recs = run_sweep(&spec.expand(), &root, SweepOptions::default());
            let errors: Vec<String> = recs.iter().filter_map(|r| r.error.clone()).collect();
            ("sweep", records_csv(&recs)?, errors)
        }
        BlockKind::Task(task) => {
            let recs = run_task(task, &opts.base_dir, &root);
            let errors: Vec<String> = recs.iter().filter_map(|r| r.error.clone()).collect();
            ("task", records_csv(&recs)?, errors)
        }
    };
    let records_name = format!("{}.csv", block.name);
    write(&out.join(&records_name), &bytes)?;
    let table = summarize(bytes.as_slice(), None)?;
    let mut files = BlockFiles { records: records_name, summary: None, svg: None };
    if cfg.wants(OutputFormat::Summary) {
        let name = format!("{}.summary.csv", block.name);
        write(&out.join(&name), &table.to_csv())?;
        files.summary = Some(name);
    }
    if cfg.wants(OutputFormat::Svg) {
        if let Some(metric) = table.metrics().first().copied() {
            let name = format!("{}.svg", block.name);
            let log = kind == "sweep";
            write(&out.join(&name), render(&table, metric, PlotOptions { log_x: log, log_y: log }).as_bytes())?;
            files.svg = Some(name);
        }
    }
    Ok(BlockReport {
        name: block.name.clone(),
        kind,
        status: if errors.is_empty() { BlockStatus::Ok } else { BlockStatus::Failed },
        records: table.total_records,
        failed_records: errors.len(),
        first_error: errors.into_iter().next(),
        files,
        summary: table.rows,
    })
}

/// Run every selected block, then write the manifest. Returns the manifest
/// even when blocks failed; the caller maps that to the exit status.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<(Manifest, PathBuf), CliError> {
    let seed = opts.seed.unwrap_or(cfg.seed);
    let out = resolve_out_dir(cfg, opts);
    let selected: Vec<&Block> = match &opts.block {
        Some(name) => vec![cfg
            .blocks
            .iter()
            .find(|b| &b.name == name)
            .ok_or_else(|| CliError::Config(format!("no block named `{name}`")))?],
        None => cfg.blocks.iter().collect(),
    };
    std::fs::create_dir_all(&out).map_err(CliError::io(&out))?;
    let jobs = opts.jobs.or(cfg.jobs).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let mut blocks = Vec::with_capacity(selected.len());
    for block in selected {
        let report = pool.install(|| run_block(block, cfg, seed, opts, &out))?;
        blocks.push(report);
    }
    let manifest = Manifest {
        config_hash: cfg.hash(seed),
        seed,
        versions: Versions { dme: env!("CARGO_PKG_VERSION"), csv_schema: CSV_SCHEMA_VERSION },
        blocks,
    };
    let mut json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    json.push(b'\n');
    write(&out.join(MANIFEST_FILE), &json)?;
    Ok((manifest, out))
}
