//! Downstream tasks that call DME once (or once per cluster) per round:
//! KMeans, power iteration, distributed GD and SparseReg projected GD.

pub mod dataset;
pub mod driver;
pub mod gd;
pub mod kmeans;
pub mod power;

pub use dataset::{gen_gaussian_clusters, gen_mixture_regression, gen_spiked, ingest_csv, pca_project, MixtureRegression, Shard, ShardedDataset};
pub use driver::DmeDriver;
pub use gd::{
    distributed_gd, gamma1, project_ball, projected_gd_bound, projected_gd_sparsereg, DatasetObjective, GdConfig, GdTrace, Loss,
    Objective, ProjectedGdConfig, ProjectedTrace, QuadraticObjective,
};
pub use kmeans::{kmeans, kmeans_cost, kmeans_pp_seed, kmeans_round, KMeansStep, KMeansTrace};
pub use power::{pooled_second_moment, power_iteration, rayleigh, PowerTrace};
