//! Configuration-driven experiment runner behind the `dme` binary.

pub mod bundled;
pub mod config;
pub mod error;
pub mod run;
pub mod summary;
pub mod svg;
pub mod tasks;

pub use config::{Block, DataSpec, OutputFormat, RunConfig, TaskConfig, TaskKind};
pub use error::CliError;
pub use run::{run, Manifest, RunOptions};
pub use summary::{summarize, RecordKind, SummaryTable};
