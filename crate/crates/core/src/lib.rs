//! Collaborative compression for distributed mean estimation (DME).
//!
//! `m` clients each hold a vector `g_i ∈ R^d`; a server wants their mean
//! under a per-client bit budget. This crate provides:
//!
//! * [`compressors`]: the `Init/Encode/Decode` contract plus NoisySign,
//!   HadamardMultiDim, OneBit and a repetition-averaging wrapper;
//! * [`sparc`]: sparse-regression-code machinery and the SparseReg scheme;
//! * [`baselines`]: RandK, PermK, SRQ and Drive;
//! * [`harness`]: synthetic generators, bit accounting, budget matching and
//!   seeded sweeps;
//! * [`tasks`]: KMeans, power iteration and (projected) gradient descent
//!   driven by any compressor.

pub mod baselines;
pub mod compressors;
pub mod dissimilarity;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod rng;
pub mod sparc;
pub mod special;
pub mod tasks;
pub mod vector;

pub use compressors::{Compressor, Estimate, NormPolicy, Payload, PayloadBody, Scheme, SharedState};
pub use dissimilarity::{dissimilarity, dissimilarity_rows, DissimilarityReport};
pub use error::{DmeError, Result};
pub use metrics::{error_metrics, ErrorMetrics};
pub use rng::{Purpose, RngStream, StreamId, StreamRng};
pub use special::{inv_phi_sigma, phi_sigma};
pub use vector::{ClientVector, MeanKind, MeanTarget};
