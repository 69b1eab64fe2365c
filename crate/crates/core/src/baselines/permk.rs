use super::sparse_bits;
use crate::compressors::{by_client, check_dim, wrong_body, Compressor, Estimate, Payload, PayloadBody, Problem, Scheme, SharedState};
use crate::error::{DmeError, Result};
use crate::rng::StreamRng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

/// Clients send disjoint (when `mK ≤ d`) blocks of a shared random
/// permutation of the coordinates. Each covered coordinate decodes to the
/// average of the clients that sent it; uncovered ones decode to 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermK {
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PermKState {
    pub m: usize,
    pub k: usize,
    pub perm: Vec<u32>,
}

impl PermKState {
    /// Coordinates of client i: positions `iK .. iK+K` of the permutation,
    /// wrapping cyclically.
    pub fn block(&self, client: usize) -> impl Iterator<Item = usize> + '_ {
        let d = self.perm.len();
        (0..self.k).map(move |t| self.perm[(client * self.k + t) % d] as usize)
    }
}

impl Compressor for PermK {
    fn scheme(&self) -> Scheme {
        Scheme::PermK
    }

    fn init(&self, problem: &Problem, rng: &mut StreamRng) -> Result<SharedState> {
        problem.validate()?;
        if self.k == 0 || self.k > problem.d {
            return Err(DmeError::param(format!("permk needs 1 <= K <= d (K={}, d={})", self.k, problem.d)));
        }
        let mut perm: Vec<u32> = (0..problem.d as u32).collect();
        perm.shuffle(rng);
        Ok(SharedState::PermK(PermKState { m: problem.m, k: self.k, perm }))
    }

    fn encode(&self, state: &SharedState, client: usize, g: &[f64], _rng: &mut StreamRng) -> Result<Payload> {
        let SharedState::PermK(st) = state else { return Err(state.mismatch("permk")) };
        check_dim(st.perm.len(), g)?;
        let indices: Vec<u32> = st.block(client).map(|i| i as u32).collect();
        let values = indices.iter().map(|&i| g[i as usize]).collect();
        Ok(Payload {
            scheme: Scheme::PermK,
            client,
            bit_cost: sparse_bits(st.k, st.perm.len()),
            body: PayloadBody::Sparse { indices, values },
            clipped: false,
        })
    }

    fn decode(&self, state: &SharedState, payloads: &[Payload]) -> Result<Estimate> {
        let SharedState::PermK(st) = state else { return Err(state.mismatch("permk")) };
        let d = st.perm.len();
        let mut sum = vec![0.0; d];
        let mut count = vec![0u32; d];
        for p in by_client(payloads, st.m)? {
            let PayloadBody::Sparse { indices, values } = &p.body else { return Err(wrong_body(Scheme::PermK, p.client)) };
            for (&i, v) in indices.iter().zip(values) {
                let i = i as usize;
                if i >= d {
                    return Err(DmeError::Decode(format!("index {i} out of range")));
                }
                sum[i] += v;
                count[i] += 1;
            }
        }
        let values = sum.iter().zip(&count).map(|(s, &c)| if c == 0 { 0.0 } else { s / f64::from(c) }).collect();
        Ok(Estimate::new(values))
    }

    fn bits_per_client(&self, d: usize, _m: usize) -> Result<u64> {
        Ok(sparse_bits(self.k, d))
    }
}
