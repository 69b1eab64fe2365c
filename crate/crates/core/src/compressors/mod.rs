//! The `Init / Encode / Decode` contract shared by every scheme.
//!
//! A scheme is a [`Compressor`]. `init` draws the shared randomness once per
//! experiment (or per round, see [`Compressor::refresh`]); `encode` sees a
//! single client's vector, the immutable [`SharedState`] and that client's
//! private RNG stream; `decode` combines one [`Payload`] per client.

use crate::baselines::{PermKState, RandKState, RotationState};
use crate::error::{DmeError, Result};
use crate::rng::{Purpose, RngStream, StreamId, StreamRng};
use crate::sparc::SparseRegState;
use crate::vector::{norm, norm_inf};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

pub mod hadamard;
pub mod identity;
pub mod noisysign;
pub mod onebit;
pub mod repetition;
pub mod wire;

pub use hadamard::{hadamard1d_encode, hmd_delta_hadamard, hmd_delta_hadamard_naive, HadamardMultiDim, HadamardState};
pub use identity::Identity;
pub use noisysign::{noisysign_delta_phi, NoisySign};
pub use onebit::{Directions, OneBit, OneBitDecoder, OneBitState};
pub use repetition::Repetition;

/// Stable one-byte identifiers, used in the wire format and result files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum Scheme {
    Identity = 0,
    NoisySign = 1,
    #[serde(rename = "hadamard")]
    HadamardMultiDim = 2,
    SparseReg = 3,
    OneBit = 4,
    RandK = 5,
    PermK = 6,
    Srq = 7,
    Drive = 8,
    Repetition = 9,
}

impl Scheme {
    pub fn from_byte(b: u8) -> Result<Scheme> {
        use Scheme::*;
        const ALL: [Scheme; 10] =
            [Identity, NoisySign, HadamardMultiDim, SparseReg, OneBit, RandK, PermK, Srq, Drive, Repetition];
        ALL.get(b as usize).copied().ok_or_else(|| DmeError::Decode(format!("unknown scheme id {b}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Identity => "identity",
            Scheme::NoisySign => "noisysign",
            Scheme::HadamardMultiDim => "hadamard",
            Scheme::SparseReg => "sparsereg",
            Scheme::OneBit => "onebit",
            Scheme::RandK => "randk",
            Scheme::PermK => "permk",
            Scheme::Srq => "srq",
            Scheme::Drive => "drive",
            Scheme::Repetition => "repetition",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = DmeError;

    fn from_str(s: &str) -> Result<Scheme> {
        (0..10u8)
            .map(|b| Scheme::from_byte(b).expect("in range"))
            .find(|sc| sc.name() == s)
            .ok_or_else(|| DmeError::param(format!("unknown scheme `{s}`")))
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What to do with inputs outside a scheme's stated domain
/// (`‖g‖∞ ≤ B`, `‖g‖₂ ≤ B`, unit norm).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormPolicy {
    /// Reject with an encode error naming the client.
    Strict,
    /// Clamp / rescale into the domain and flag the payload.
    #[default]
    Permissive,
}

/// A norm bound either fixed up front or taken from the round's data.
///
/// `Auto` uses the true maximum over clients, i.e. assumes the server knows
/// a valid bound; this is what the experiments need for a fair comparison.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    #[default]
    Auto,
    Fixed(f64),
}

impl Bound {
    pub fn resolve(self, auto: f64) -> Result<f64> {
        let b = match self {
            Bound::Fixed(b) => b,
            // An all-zero instance still needs a positive scale.
            Bound::Auto if auto > 0.0 => auto,
            Bound::Auto => 1.0,
        };
        if !(b > 0.0 && b.is_finite()) {
            return Err(DmeError::param(format!("bound must be positive and finite, got {b}")));
        }
        Ok(b)
    }
}

/// Size information available to `init`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Problem {
    pub m: usize,
    pub d: usize,
    /// `max_i ‖g_i‖∞`
    pub linf_bound: f64,
    /// `max_i ‖g_i‖₂`
    pub l2_bound: f64,
}

impl Problem {
    pub fn new(m: usize, d: usize) -> Self {
        Problem { m, d, linf_bound: 0.0, l2_bound: 0.0 }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let d = rows.first().map(|r| r.len()).ok_or_else(|| DmeError::param("need m >= 1 clients"))?;
        let mut p = Problem::new(rows.len(), d);
        for r in rows {
            if r.len() != d {
                return Err(DmeError::Dimension { expected: d, got: r.len() });
            }
            p.linf_bound = p.linf_bound.max(norm_inf(r));
            p.l2_bound = p.l2_bound.max(norm(r));
        }
        Ok(p)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.m == 0 || self.d == 0 {
            return Err(DmeError::param(format!("need m, d >= 1 (m={}, d={})", self.m, self.d)));
        }
        Ok(())
    }
}

/// Immutable pre-shared structure for one protocol run.
#[derive(Debug, Clone)]
pub enum SharedState {
    Identity { d: usize },
    NoisySign { sigma: f64, d: usize },
    Hadamard(HadamardState),
    SparseReg(SparseRegState),
    OneBit(OneBitState),
    RandK(RandKState),
    PermK(PermKState),
    Rotation(RotationState),
    Repeated(Vec<SharedState>),
}

impl SharedState {
    fn kind(&self) -> &'static str {
        match self {
            SharedState::Identity { .. } => "identity",
            SharedState::NoisySign { .. } => "noisysign",
            SharedState::Hadamard(_) => "hadamard",
            SharedState::SparseReg(_) => "sparsereg",
            SharedState::OneBit(_) => "onebit",
            SharedState::RandK(_) => "randk",
            SharedState::PermK(_) => "permk",
            SharedState::Rotation(_) => "rotation",
            SharedState::Repeated(_) => "repeated",
        }
    }

    pub(crate) fn mismatch(&self, wanted: &str) -> DmeError {
        DmeError::param(format!("expected {wanted} shared state, got {}", self.kind()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PayloadBody {
    /// One ±1 per coordinate or slot.
    Signs(Vec<i8>),
    /// A single codebook section index (0-based).
    Index(u32),
    /// Coordinate indices with their values.
    Sparse { indices: Vec<u32>, values: Vec<f64> },
    /// Stochastically quantized levels over `[lo, hi]`.
    Quantized { lo: f64, hi: f64, levels: Vec<u32> },
    /// Signs with one shared magnitude.
    ScaledSigns { scale: f64, signs: Vec<i8> },
    /// Uncompressed values.
    Dense(Vec<f64>),
    /// One inner payload per repetition.
    Repeated(Vec<Payload>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Payload {
    pub scheme: Scheme,
    pub client: usize,
    pub bit_cost: u64,
    pub body: PayloadBody,
    /// The input was clamped or rescaled under [`NormPolicy::Permissive`].
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub values: Vec<f64>,
    /// The decoder fell back to an arbitrary answer (e.g. OneBit with a
    /// zero vote sum).
    pub degenerate: bool,
}

impl Estimate {
    pub fn new(values: Vec<f64>) -> Self {
        Estimate { values, degenerate: false }
    }
}

pub trait Compressor: Send + Sync {
    fn scheme(&self) -> Scheme;

    /// Draw all shared structure.
    fn init(&self, problem: &Problem, rng: &mut StreamRng) -> Result<SharedState>;

    /// Redraw only the per-round part of `state` (permutations, rotations),
    /// keeping long-lived structure such as a codebook. Defaults to a full
    /// `init`.
    fn refresh(&self, state: &SharedState, problem: &Problem, rng: &mut StreamRng) -> Result<SharedState> {
        let _ = state;
        self.init(problem, rng)
    }

    fn encode(&self, state: &SharedState, client: usize, g: &[f64], rng: &mut StreamRng) -> Result<Payload>;

    fn decode(&self, state: &SharedState, payloads: &[Payload]) -> Result<Estimate>;

    /// Encode the same vector under several independent states (used by
    /// [`Repetition`]). Schemes whose encoding work can be shared across
    /// states override this.
    fn encode_repeated(
        &self,
        states: &[SharedState],
        client: usize,
        g: &[f64],
        rng: &mut StreamRng,
    ) -> Result<Vec<Payload>> {
        states.iter().map(|s| self.encode(s, client, g, rng)).collect()
    }

    /// Exact bits each client sends per round.
    fn bits_per_client(&self, d: usize, m: usize) -> Result<u64>;

    /// The scheme's own dissimilarity (Δ_Φ, Δ_Hadamard, Δ_reg), if it has one.
    fn scheme_dissimilarity(&self, state: &SharedState, rows: &[&[f64]]) -> Result<Option<f64>> {
        let _ = (state, rows);
        Ok(None)
    }
}

/// Payloads sorted by client, checking that clients `0..m` each appear once.
pub(crate) fn by_client(payloads: &[Payload], m: usize) -> Result<Vec<&Payload>> {
    let mut slots: Vec<Option<&Payload>> = vec![None; m];
    for p in payloads {
        let slot = slots
            .get_mut(p.client)
            .ok_or_else(|| DmeError::Decode(format!("client {} out of range (m={m})", p.client)))?;
        if slot.replace(p).is_some() {
            return Err(DmeError::Decode(format!("duplicate payload for client {}", p.client)));
        }
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(i, p)| p.ok_or_else(|| DmeError::Decode(format!("missing payload for client {i}"))))
        .collect()
}

pub(crate) fn check_dim(expected: usize, g: &[f64]) -> Result<()> {
    if g.len() != expected {
        return Err(DmeError::Dimension { expected, got: g.len() });
    }
    Ok(())
}

pub(crate) fn wrong_body(scheme: Scheme, client: usize) -> DmeError {
    DmeError::Decode(format!("client {client}: payload body does not belong to {scheme}"))
}

/// Which round of which trial an encode belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundKey {
    pub trial: u64,
    pub round: u64,
}

/// The outcome of one full encode/decode round.
#[derive(Debug, Clone)]
pub struct RoundOutput {
    pub estimate: Estimate,
    /// Σ over clients of payload bit costs.
    pub total_bits: u64,
    pub clipped_clients: usize,
}

/// Encode every client (in parallel, each on its own stream) and decode.
pub fn run_round(
    compressor: &dyn Compressor,
    state: &SharedState,
    rows: &[&[f64]],
    root: &RngStream,
    key: RoundKey,
) -> Result<RoundOutput> {
    let payloads: Vec<Payload> = rows
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            let id = StreamId::new(key.trial, i as u64, Purpose::Encode).with_round(key.round);
            compressor.encode(state, i, g, &mut root.derive(id))
        })
        .collect::<Result<_>>()?;
    let total_bits = payloads.iter().map(|p| p.bit_cost).sum();
    let clipped_clients = payloads.iter().filter(|p| p.clipped).count();
    let estimate = compressor.decode(state, &payloads)?;
    Ok(RoundOutput { estimate, total_bits, clipped_clients })
}

/// Stream used by `init`/`refresh` for a given round.
pub fn init_stream(root: &RngStream, key: RoundKey) -> StreamRng {
    root.derive(StreamId::new(key.trial, 0, Purpose::Init).with_round(key.round))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(client: usize) -> Payload {
        Payload { scheme: Scheme::Identity, client, bit_cost: 1, body: PayloadBody::Dense(vec![]), clipped: false }
    }

    #[test]
    fn by_client_orders_and_validates() {
        let ps = vec![p(2), p(0), p(1)];
        let sorted = by_client(&ps, 3).unwrap();
        assert_eq!(sorted.iter().map(|p| p.client).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(by_client(&ps[..2], 3).is_err());
        assert!(by_client(&[p(0), p(0)], 2).is_err());
        assert!(by_client(&[p(5)], 2).is_err());
    }

    #[test]
    fn scheme_ids_round_trip() {
        for b in 0..10u8 {
            assert_eq!(Scheme::from_byte(b).unwrap() as u8, b);
        }
        assert!(Scheme::from_byte(10).is_err());
    }

    #[test]
    fn bound_resolution() {
        assert_eq!(Bound::Auto.resolve(3.0).unwrap(), 3.0);
        assert_eq!(Bound::Auto.resolve(0.0).unwrap(), 1.0);
        assert_eq!(Bound::Fixed(2.0).resolve(3.0).unwrap(), 2.0);
        assert!(Bound::Fixed(0.0).resolve(3.0).is_err());
    }
}
