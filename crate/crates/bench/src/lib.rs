//! Shared fixtures for the benchmarks in `benches/`.

use dme_core::harness::{match_budget, GeneratorKind, GeneratorSpec, SchemeConfig};
use dme_core::{Purpose, RngStream, Scheme};

/// The bit budget every scheme is tuned to.
pub const BUDGET: u64 = 2375;

/// Gaussian clients around a center of norm 100.
pub fn clients(d: usize, m: usize, dissim: f64, seed: u64) -> Vec<Vec<f64>> {
    let spec = GeneratorSpec { kind: GeneratorKind::Gaussian, d, m, center_scale: 100.0, dissim };
    let inst = spec.generate(&mut RngStream::new(seed).stream(0, 0, Purpose::Generator)).expect("valid generator");
    inst.clients.into_iter().map(|c| c.values).collect()
}

/// Every scheme, tuned to [`BUDGET`] bits per client where it has a knob.
pub fn matched_schemes(d: usize, m: usize) -> Vec<SchemeConfig> {
    [
        Scheme::NoisySign,
        Scheme::HadamardMultiDim,
        Scheme::SparseReg,
        Scheme::OneBit,
        Scheme::RandK,
        Scheme::PermK,
        Scheme::Srq,
        Scheme::Drive,
    ]
    .into_iter()
    .map(|s| match_budget(&SchemeConfig::new(s), d, m, BUDGET, 25).expect("budget reachable").config)
    .collect()
}
