use super::{by_client, check_dim, wrong_body, Compressor, Estimate, Payload, PayloadBody, Problem, Scheme, SharedState};
use crate::error::Result;
use crate::rng::StreamRng;
use crate::vector::compensated_mean;

/// No compression: every client ships its vector as 32-bit reals (costed,
/// not rounded) and the server averages exactly. The reference point for
/// downstream tasks.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Compressor for Identity {
    fn scheme(&self) -> Scheme {
        Scheme::Identity
    }

    fn init(&self, problem: &Problem, _rng: &mut StreamRng) -> Result<SharedState> {
        problem.validate()?;
        Ok(SharedState::Identity { d: problem.d })
    }

    fn encode(&self, state: &SharedState, client: usize, g: &[f64], _rng: &mut StreamRng) -> Result<Payload> {
        let SharedState::Identity { d } = state else { return Err(state.mismatch("identity")) };
        check_dim(*d, g)?;
        Ok(Payload {
            scheme: Scheme::Identity,
            client,
            bit_cost: 32 * *d as u64,
            body: PayloadBody::Dense(g.to_vec()),
            clipped: false,
        })
    }

    fn decode(&self, state: &SharedState, payloads: &[Payload]) -> Result<Estimate> {
        let SharedState::Identity { .. } = state else { return Err(state.mismatch("identity")) };
        let rows = by_client(payloads, payloads.len())?
            .into_iter()
            .map(|p| match &p.body {
                PayloadBody::Dense(v) => Ok(v.as_slice()),
                _ => Err(wrong_body(Scheme::Identity, p.client)),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Estimate::new(compensated_mean(&rows)?))
    }

    fn bits_per_client(&self, d: usize, _m: usize) -> Result<u64> {
        Ok(32 * d as u64)
    }
}
