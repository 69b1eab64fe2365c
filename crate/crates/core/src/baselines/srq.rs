use super::RotationState;
use crate::compressors::{by_client, check_dim, wrong_body, Compressor, Estimate, Payload, PayloadBody, Problem, Scheme, SharedState};
use crate::error::{DmeError, Result};
use crate::rng::StreamRng;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Stochastic rotated quantization: rotate, quantize each coordinate to one
/// of `K` evenly spaced levels over the client's own `[min, max]` with
/// unbiased stochastic rounding, send the range and the levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Srq {
    pub levels: usize,
}

impl Srq {
    /// `64 + ⌈p·log₂ K⌉`: two 32-bit reals for the range, then the `p`
    /// level indices packed as one base-`K` number.
    pub fn bits(levels: usize, d: usize) -> u64 {
        let p = d.next_power_of_two();
        64 + (p as f64 * (levels as f64).log2() - 1e-9).ceil() as u64
    }

    /// Stochastic rounding of `y` onto the grid `lo + step·{0..K−1}`.
    pub fn quantize(y: &[f64], levels: usize, rng: &mut impl Rng) -> (f64, f64, Vec<u32>) {
        let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            return (lo, hi, vec![0; y.len()]);
        }
        let top = (levels - 1) as u32;
        let step = (hi - lo) / f64::from(top);
        let q = y
            .iter()
            .map(|&v| {
                let pos = ((v - lo) / step).clamp(0.0, f64::from(top));
                let floor = (pos.floor() as u32).min(top);
                let frac = pos - f64::from(floor);
                if floor < top && rng.random::<f64>() < frac {
                    floor + 1
                } else {
                    floor
                }
            })
            .collect();
        (lo, hi, q)
    }

    pub fn dequantize(lo: f64, hi: f64, levels: usize, q: &[u32]) -> Vec<f64> {
        if !(hi > lo) {
            return vec![lo; q.len()];
        }
        let step = (hi - lo) / (levels - 1) as f64;
        q.iter().map(|&l| lo + step * f64::from(l)).collect()
    }
}

impl Compressor for Srq {
    fn scheme(&self) -> Scheme {
        Scheme::Srq
    }

    fn init(&self, problem: &Problem, rng: &mut StreamRng) -> Result<SharedState> {
        problem.validate()?;
        if self.levels < 2 {
            return Err(DmeError::param(format!("srq needs K >= 2 levels, got {}", self.levels)));
        }
        Ok(SharedState::Rotation(RotationState::draw(problem.d, rng)?))
    }

    fn encode(&self, state: &SharedState, client: usize, g: &[f64], rng: &mut StreamRng) -> Result<Payload> {
        let SharedState::Rotation(rot) = state else { return Err(state.mismatch("rotation")) };
        check_dim(rot.d, g)?;
        let (lo, hi, levels) = Self::quantize(&rot.rotate(g), self.levels, rng);
        Ok(Payload {
            scheme: Scheme::Srq,
            client,
            bit_cost: Self::bits(self.levels, rot.d),
            body: PayloadBody::Quantized { lo, hi, levels },
            clipped: false,
        })
    }

    fn decode(&self, state: &SharedState, payloads: &[Payload]) -> Result<Estimate> {
        let SharedState::Rotation(rot) = state else { return Err(state.mismatch("rotation")) };
        let m = payloads.len();
        let mut acc = vec![0.0; rot.padded()];
        for p in by_client(payloads, m)? {
            let PayloadBody::Quantized { lo, hi, levels } = &p.body else { return Err(wrong_body(Scheme::Srq, p.client)) };
            if levels.len() != rot.padded() {
                return Err(DmeError::Decode(format!("client {}: wrong number of levels", p.client)));
            }
            for (a, v) in acc.iter_mut().zip(Self::dequantize(*lo, *hi, self.levels, levels)) {
                *a += v;
            }
        }
        // The rotation is linear, so averaging before un-rotating is exact.
        acc.iter_mut().for_each(|a| *a /= m as f64);
        Ok(Estimate::new(rot.unrotate(&acc)))
    }

    fn bits_per_client(&self, d: usize, _m: usize) -> Result<u64> {
        Ok(Self::bits(self.levels, d))
    }
}
