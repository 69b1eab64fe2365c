use super::sparse_bits;
use crate::compressors::{by_client, check_dim, wrong_body, Compressor, Estimate, Payload, PayloadBody, Problem, Scheme, SharedState};
use crate::error::{DmeError, Result};
use crate::rng::StreamRng;
use rand::seq::index;
use serde::{Deserialize, Serialize};

/// Each client sends `K` uniformly chosen coordinates; the server averages
/// the `d/K`-scaled sparse vectors (unbiased).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandK {
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandKState {
    pub d: usize,
    pub k: usize,
}

impl Compressor for RandK {
    fn scheme(&self) -> Scheme {
        Scheme::RandK
    }

    fn init(&self, problem: &Problem, _rng: &mut StreamRng) -> Result<SharedState> {
        problem.validate()?;
        if self.k == 0 || self.k > problem.d {
            return Err(DmeError::param(format!("randk needs 1 <= K <= d (K={}, d={})", self.k, problem.d)));
        }
        Ok(SharedState::RandK(RandKState { d: problem.d, k: self.k }))
    }

    fn encode(&self, state: &SharedState, client: usize, g: &[f64], rng: &mut StreamRng) -> Result<Payload> {
        let SharedState::RandK(st) = state else { return Err(state.mismatch("randk")) };
        check_dim(st.d, g)?;
        let mut idx: Vec<u32> = index::sample(rng, st.d, st.k).into_iter().map(|i| i as u32).collect();
        idx.sort_unstable();
        let values = idx.iter().map(|&i| g[i as usize]).collect();
        Ok(Payload {
            scheme: Scheme::RandK,
            client,
            bit_cost: sparse_bits(st.k, st.d),
            body: PayloadBody::Sparse { indices: idx, values },
            clipped: false,
        })
    }

    fn decode(&self, state: &SharedState, payloads: &[Payload]) -> Result<Estimate> {
        let SharedState::RandK(st) = state else { return Err(state.mismatch("randk")) };
        let m = payloads.len();
        let scale = st.d as f64 / (st.k as f64 * m as f64);
        let mut out = vec![0.0; st.d];
        for p in by_client(payloads, m)? {
            let PayloadBody::Sparse { indices, values } = &p.body else { return Err(wrong_body(Scheme::RandK, p.client)) };
            for (&i, v) in indices.iter().zip(values) {
                *out.get_mut(i as usize).ok_or_else(|| DmeError::Decode(format!("index {i} out of range")))? += scale * v;
            }
        }
        Ok(Estimate::new(out))
    }

    fn bits_per_client(&self, d: usize, _m: usize) -> Result<u64> {
        Ok(sparse_bits(self.k, d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compressors::{init_stream, run_round, RoundKey};
    use crate::rng::RngStream;

    #[test]
    fn full_k_is_exact() {
        let rows: Vec<Vec<f64>> = vec![vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 2.0]];
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let root = RngStream::new(0);
        let key = RoundKey { trial: 0, round: 0 };
        let rk = RandK { k: 3 };
        let st = rk.init(&Problem::from_rows(&refs).unwrap(), &mut init_stream(&root, key)).unwrap();
        let out = run_round(&rk, &st, &refs, &root, key).unwrap();
        assert_eq!(out.estimate.values, vec![0.0, 1.25, 2.5]);
        assert!(RandK { k: 4 }.init(&Problem::new(1, 3), &mut init_stream(&root, key)).is_err());
    }

    #[test]
    fn unbiased_in_two_dimensions() {
        let g = [3.0, -1.0];
        let rk = RandK { k: 1 };
        let st = SharedState::RandK(RandKState { d: 2, k: 1 });
        let n = 10_000;
        let root = RngStream::new(5);
        let mut sum = [0.0; 2];
        let mut sq = [0.0; 2];
        for t in 0..n {
            let mut r = root.stream(t, 0, crate::rng::Purpose::Encode);
            let p = rk.encode(&st, 0, &g, &mut r).unwrap();
            let est = rk.decode(&st, &[p]).unwrap().values;
            for j in 0..2 {
                sum[j] += est[j];
                sq[j] += est[j] * est[j];
            }
        }
        for j in 0..2 {
            let mean = sum[j] / n as f64;
            let se = ((sq[j] / n as f64 - mean * mean) / n as f64).sqrt();
            assert!((mean - g[j]).abs() <= 3.0 * se, "coord {j}: {mean} ± {se}");
        }
    }
}
