use clap::{Parser, Subcommand};
use dme_cli::bundled;
use dme_cli::run::{run, RunOptions};
use dme_cli::summary::summarize;
use dme_cli::svg::{render, PlotOptions};
use dme_cli::{CliError, RunConfig};
use dme_core::sparc::{gen_codebook, Codebook, DEFAULT_MEMORY_CAP};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dme", version, about = "Distributed mean estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every block of a config file (or a bundled config by name).
    Run {
        config: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory [default: config `out_dir`, then $DME_OUT_DIR, then ./dme-out]
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
        /// Run only the named block.
        #[arg(long)]
        block: Option<String>,
    },
    /// Group a records CSV by (label, metric, x) and print mean/std.
    Summarize {
        csv: PathBuf,
        /// Also plot one metric as SVG.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Metric to plot [default: the first one present].
        #[arg(long)]
        metric: Option<String>,
        /// Band half-width in standard deviations [default: 2 for sweeps, 1 for tasks].
        #[arg(long)]
        band: Option<f64>,
        #[arg(long)]
        log_x: bool,
        #[arg(long)]
        log_y: bool,
    },
    /// Move SparseReg codebooks in and out of the binary file format.
    Codebook {
        #[command(subcommand)]
        action: CodebookAction,
    },
    /// Print a bundled config.
    Show { name: String },
}

#[derive(Subcommand)]
enum CodebookAction {
    /// Generate a codebook and write it to FILE.
    Export {
        file: PathBuf,
        #[arg(long)]
        dim: usize,
        /// Section size L.
        #[arg(long)]
        section: usize,
        /// Number of sections (one per client level).
        #[arg(long)]
        levels: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Read and validate FILE, printing its shape.
    Import { file: PathBuf },
}

fn load_config(arg: &str) -> Result<(RunConfig, PathBuf), CliError> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(text) = bundled::lookup(arg) {
            return Ok((RunConfig::parse(text)?, PathBuf::from(".")));
        }
    }
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let cfg = RunConfig::parse(&text).map_err(|e| match e {
        CliError::Parse { line, column, message } => {
            CliError::Parse { line, column, message: format!("{}: {message}", path.display()) }
        }
        other => other,
    })?;
    let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")).to_path_buf();
    Ok((cfg, base))
}

fn execute(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Run { config, seed, out, jobs, block } => {
            let (cfg, base_dir) = load_config(&config)?;
            let (manifest, dir) = run(&cfg, &RunOptions { seed, out_dir: out, jobs, block, base_dir })?;
            for b in &manifest.blocks {
                match &b.first_error {
                    None => eprintln!("{}: ok, {} records", b.name, b.records),
                    Some(e) => eprintln!("{}: FAILED, {}/{} records errored; first: {e}", b.name, b.failed_records, b.records),
                }
            }
            eprintln!("wrote {}", dir.display());
            Ok(if manifest.all_ok() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Summarize { csv, svg, metric, band, log_x, log_y } => {
            let file = std::fs::File::open(&csv).map_err(CliError::io(&csv))?;
            let table = summarize(std::io::BufReader::new(file), band)?;
            print!("{}", String::from_utf8(table.to_csv()).expect("utf-8"));
            if let Some(path) = svg {
                let metric = match metric {
                    Some(m) => m,
                    None => table.metrics().first().map(|m| m.to_string()).unwrap_or_default(),
                };
                std::fs::write(&path, render(&table, &metric, PlotOptions { log_x, log_y })).map_err(CliError::io(&path))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Codebook { action: CodebookAction::Export { file, dim, section, levels, seed } } => {
            let cb = gen_codebook(levels, section, dim, seed, DEFAULT_MEMORY_CAP)?;
            let f = std::fs::File::create(&file).map_err(CliError::io(&file))?;
            cb.write_to(std::io::BufWriter::new(f))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Codebook { action: CodebookAction::Import { file } } => {
            let f = std::fs::File::open(&file).map_err(CliError::io(&file))?;
            let cb = Codebook::read_from(std::io::BufReader::new(f), DEFAULT_MEMORY_CAP)?;
            let diam = cb.section_diameters();
            let max_diam = diam.iter().copied().fold(0.0, f64::max);
            println!(
                "levels={} section={} dim={} seed={} max_section_diameter={max_diam}",
                cb.levels(),
                cb.section_size(),
                cb.dim(),
                cb.gen_seed()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Show { name } => match bundled::lookup(&name) {
            Some(text) => {
                print!("{text}");
                Ok(ExitCode::SUCCESS)
            }
            None => Err(CliError::Config(format!(
                "no bundled config `{name}`; available: {}",
                bundled::BUNDLED.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
            ))),
        },
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
