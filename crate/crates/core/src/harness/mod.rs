//! DME experiment engine: synthetic generators, budget matching, seeded
//! sweeps and trial statistics.

pub mod budget;
pub mod config;
pub mod generators;
pub mod stats;
pub mod sweep;

pub use budget::{match_budget, BudgetMatch};
pub use config::SchemeConfig;
pub use generators::{gen_gaussian, gen_hypercube, gen_sphere, GeneratorKind, GeneratorSpec, Instance};
pub use stats::{median, Summary};
pub use sweep::{run_sweep, ExperimentSpec, Metric, ResultRecord, SweepOptions, SweepSpec};
