//! Coordinate-wise collaborative binary search.
//!
//! Level `K` of the scalar code answers "is `s` in the lower half of its
//! level-`K` dyadic cell?". Giving each client a distinct level (via a
//! shared random permutation ρ) lets `m` identical clients jointly transmit
//! an `m`-bit binary expansion of every coordinate while each sends one bit
//! per coordinate.

use super::{by_client, check_dim, wrong_body, Bound, Compressor, Estimate, NormPolicy, Payload, PayloadBody, Problem, Scheme, SharedState};
use crate::error::{DmeError, Result};
use crate::rng::StreamRng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

/// Deepest level whose cell index fits an f64 mantissa.
pub const MAX_LEVEL: u32 = 52;

/// One bit of the level-`level` scalar code of `s ∈ [−B, B]`.
///
/// Returns −1 iff `s` lies in `S_K^- = ∪_k [−B + 2kB/2^{K−1}, −B + (2k+1)B/2^{K−1}]`
/// (closed intervals, so shared endpoints go to −1). Values outside
/// `[−B, B]` behave as if clamped to the nearest end.
pub fn hadamard1d_encode(s: f64, level: u32, bound: f64) -> Result<i8> {
    if !(1..=MAX_LEVEL).contains(&level) {
        return Err(DmeError::param(format!("level {level} outside 1..={MAX_LEVEL}")));
    }
    if !(bound > 0.0) {
        return Err(DmeError::param(format!("bound must be positive, got {bound}")));
    }
    if s.is_nan() {
        return Err(DmeError::Domain { op: "hadamard1d_encode", value: s });
    }
    let cells = (1u64 << (level - 1)) as f64;
    // Position in units of half-cells: cell k of S_K^- is u ∈ [2k, 2k+1].
    let u = (s + bound) / bound * cells;
    let bit = if u <= 0.0 {
        -1
    } else if u >= 2.0 * cells {
        1
    } else if u.fract() == 0.0 || (u.floor() as u64) % 2 == 0 {
        -1
    } else {
        1
    };
    Ok(bit)
}

/// Weight of a level-`level` bit in the reconstruction: the half-width of a
/// level-`level` cell.
#[inline]
pub fn level_weight(bound: f64, level: u32) -> f64 {
    bound / (1u64 << level) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HadamardMultiDim {
    /// ℓ∞ bound B; `Auto` takes `max_i ‖g_i‖∞`.
    pub bound: Bound,
    pub policy: NormPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HadamardState {
    pub bound: f64,
    pub d: usize,
    /// `levels[i] = ρ(i) ∈ 1..=m`, a permutation.
    pub levels: Vec<u32>,
}

impl HadamardMultiDim {
    pub fn new(bound: f64) -> Self {
        HadamardMultiDim { bound: Bound::Fixed(bound), policy: NormPolicy::Permissive }
    }

    fn state(state: &SharedState) -> Result<&HadamardState> {
        match state {
            SharedState::Hadamard(s) => Ok(s),
            other => Err(other.mismatch("hadamard")),
        }
    }

    /// Encode `g` at a given level, applying the norm policy.
    pub fn encode_level(&self, client: usize, g: &[f64], level: u32, bound: f64) -> Result<(Vec<i8>, bool)> {
        let clipped = g.iter().any(|x| x.abs() > bound);
        if clipped && self.policy == NormPolicy::Strict {
            return Err(DmeError::Encode { client, reason: format!("‖g‖∞ exceeds bound {bound}") });
        }
        let bits = g.iter().map(|&x| hadamard1d_encode(x, level, bound)).collect::<Result<_>>()?;
        Ok((bits, clipped))
    }

    /// Every client's bits at every level: `out[i][k-1][j]`. Diagnostic only.
    pub fn all_level_bits(&self, bound: f64, rows: &[&[f64]]) -> Result<Vec<Vec<Vec<i8>>>> {
        let m = rows.len() as u32;
        rows.iter()
            .enumerate()
            .map(|(i, g)| (1..=m).map(|k| self.encode_level(i, g, k, bound).map(|(b, _)| b)).collect())
            .collect()
    }
}

impl Compressor for HadamardMultiDim {
    fn scheme(&self) -> Scheme {
        Scheme::HadamardMultiDim
    }

    fn init(&self, problem: &Problem, rng: &mut StreamRng) -> Result<SharedState> {
        problem.validate()?;
        if problem.m > MAX_LEVEL as usize {
            return Err(DmeError::param(format!(
                "hadamard needs m <= {MAX_LEVEL} distinct levels, got m={}",
                problem.m
            )));
        }
        let mut levels: Vec<u32> = (1..=problem.m as u32).collect();
        levels.shuffle(rng);
        Ok(SharedState::Hadamard(HadamardState { bound: self.bound.resolve(problem.linf_bound)?, d: problem.d, levels }))
    }

    fn encode(&self, state: &SharedState, client: usize, g: &[f64], _rng: &mut StreamRng) -> Result<Payload> {
        let st = Self::state(state)?;
        check_dim(st.d, g)?;
        let level = *st
            .levels
            .get(client)
            .ok_or_else(|| DmeError::Encode { client, reason: format!("no level for client (m={})", st.levels.len()) })?;
        let (bits, clipped) = self.encode_level(client, g, level, st.bound)?;
        Ok(Payload { scheme: Scheme::HadamardMultiDim, client, bit_cost: st.d as u64, body: PayloadBody::Signs(bits), clipped })
    }

    fn decode(&self, state: &SharedState, payloads: &[Payload]) -> Result<Estimate> {
        let st = Self::state(state)?;
        let mut out = vec![0.0; st.d];
        for p in by_client(payloads, st.levels.len())? {
            let PayloadBody::Signs(bits) = &p.body else { return Err(wrong_body(Scheme::HadamardMultiDim, p.client)) };
            if bits.len() != st.d {
                return Err(DmeError::Decode(format!("client {}: {} bits, expected {}", p.client, bits.len(), st.d)));
            }
            let w = level_weight(st.bound, st.levels[p.client]);
            for (o, &b) in out.iter_mut().zip(bits) {
                *o += f64::from(b) * w;
            }
        }
        Ok(Estimate::new(out))
    }

    fn bits_per_client(&self, d: usize, _m: usize) -> Result<u64> {
        Ok(d as u64)
    }

    fn scheme_dissimilarity(&self, state: &SharedState, rows: &[&[f64]]) -> Result<Option<f64>> {
        let st = Self::state(state)?;
        let bits = self.all_level_bits(st.bound, rows)?;
        hmd_delta_hadamard(st.bound, &bits).map(Some)
    }
}

fn check_level_bits(bits: &[Vec<Vec<i8>>]) -> Result<(usize, usize)> {
    let m = bits.len();
    let levels = bits.first().map(Vec::len).unwrap_or(0);
    let d = bits.first().and_then(|b| b.first()).map(Vec::len).unwrap_or(0);
    if bits.iter().any(|c| c.len() != levels || c.iter().any(|l| l.len() != d)) {
        return Err(DmeError::param("ragged level-bit array"));
    }
    if levels > MAX_LEVEL as usize {
        return Err(DmeError::param(format!("more than {MAX_LEVEL} levels")));
    }
    Ok((m, d))
}

/// `Δ_Hadamard = max_r sqrt((1/m²) Σ_{i≠j} Σ_k (B(b_{i,k}^r − b_{j,k}^r)/2^{k−1})²)`,
/// evaluated from per-level bit counts in `O(m·levels·d)`.
///
/// `bits[i][k-1][r]` is client i's level-k bit at coordinate r.
pub fn hmd_delta_hadamard(bound: f64, bits: &[Vec<Vec<i8>>]) -> Result<f64> {
    let (m, d) = check_level_bits(bits)?;
    if m == 0 {
        return Ok(0.0);
    }
    let levels = bits[0].len();
    let mut worst = 0.0f64;
    for r in 0..d {
        let mut total = 0.0;
        for k in 0..levels {
            let plus = bits.iter().filter(|c| c[k][r] > 0).count() as f64;
            let minus = m as f64 - plus;
            let w = 2.0 * level_weight(bound, k as u32 + 1);
            // Σ_{i≠j} (b_i − b_j)² = 2 · n₊ · n₋ · 2².
            total += 8.0 * plus * minus * w * w;
        }
        worst = worst.max(total);
    }
    Ok((worst / (m * m) as f64).sqrt())
}

/// Literal triple loop over ordered client pairs; reference for
/// [`hmd_delta_hadamard`].
pub fn hmd_delta_hadamard_naive(bound: f64, bits: &[Vec<Vec<i8>>]) -> Result<f64> {
    let (m, d) = check_level_bits(bits)?;
    let mut worst = 0.0f64;
    for r in 0..d {
        let mut total = 0.0;
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                for k in 0..bits[i].len() {
                    let diff = bound * f64::from(bits[i][k][r] - bits[j][k][r]) / (1u64 << k) as f64;
                    total += diff * diff;
                }
            }
        }
        worst = worst.max(total);
    }
    Ok(if m == 0 { 0.0 } else { (worst / (m * m) as f64).sqrt() })
}
