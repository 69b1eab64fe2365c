use super::RotationState;
use crate::compressors::{by_client, check_dim, wrong_body, Compressor, Estimate, Payload, PayloadBody, Problem, Scheme, SharedState};
use crate::error::{DmeError, Result};
use crate::rng::StreamRng;
use serde::{Deserialize, Serialize};

/// Rotate, send the sign of each rotated coordinate plus one scale
/// `S = ⟨y, sign(y)⟩/p = ‖y‖₁/p`, the least-squares fit of `y` by `S·sign(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Drive;

impl Drive {
    pub fn bits(d: usize) -> u64 {
        32 + d.next_power_of_two() as u64
    }
}

impl Compressor for Drive {
    fn scheme(&self) -> Scheme {
        Scheme::Drive
    }

    fn init(&self, problem: &Problem, rng: &mut StreamRng) -> Result<SharedState> {
        problem.validate()?;
        Ok(SharedState::Rotation(RotationState::draw(problem.d, rng)?))
    }

    fn encode(&self, state: &SharedState, client: usize, g: &[f64], _rng: &mut StreamRng) -> Result<Payload> {
        let SharedState::Rotation(rot) = state else { return Err(state.mismatch("rotation")) };
        check_dim(rot.d, g)?;
        let y = rot.rotate(g);
        let signs: Vec<i8> = y.iter().map(|&v| if v >= 0.0 { 1 } else { -1 }).collect();
        let scale = y.iter().map(|v| v.abs()).sum::<f64>() / y.len() as f64;
        Ok(Payload {
            scheme: Scheme::Drive,
            client,
            bit_cost: Self::bits(rot.d),
            body: PayloadBody::ScaledSigns { scale, signs },
            clipped: false,
        })
    }

    fn decode(&self, state: &SharedState, payloads: &[Payload]) -> Result<Estimate> {
        let SharedState::Rotation(rot) = state else { return Err(state.mismatch("rotation")) };
        let m = payloads.len();
        let mut acc = vec![0.0; rot.padded()];
        for p in by_client(payloads, m)? {
            let PayloadBody::ScaledSigns { scale, signs } = &p.body else { return Err(wrong_body(Scheme::Drive, p.client)) };
            if signs.len() != rot.padded() {
                return Err(DmeError::Decode(format!("client {}: wrong number of signs", p.client)));
            }
            for (a, &s) in acc.iter_mut().zip(signs) {
                *a += scale * f64::from(s);
            }
        }
        acc.iter_mut().for_each(|a| *a /= m as f64);
        Ok(Estimate::new(rot.unrotate(&acc)))
    }

    fn bits_per_client(&self, d: usize, _m: usize) -> Result<u64> {
        Ok(Self::bits(d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, RngStream};
    use crate::vector::{dist_sq, norm_sq};
    use rand_distr::{Distribution, StandardNormal};

    fn one_client(g: &[f64], seed: u64) -> Vec<f64> {
        let mut r = RngStream::new(seed).stream(0, 0, Purpose::Init);
        let st = Drive.init(&Problem::new(1, g.len()), &mut r).unwrap();
        let p = Drive.encode(&st, 0, g, &mut r).unwrap();
        Drive.decode(&st, &[p]).unwrap().values
    }

    #[test]
    fn zero_and_scalar_cases() {
        assert_eq!(one_client(&[0.0; 4], 0), vec![0.0; 4]);
        for x in [-3.5, 0.0, 2.0] {
            assert!((one_client(&[x], 1)[0] - x).abs() < 1e-15);
        }
    }

    #[test]
    fn reconstruction_never_worse_than_zero() {
        let mut r = RngStream::new(2).stream(0, 0, Purpose::Generator);
        for seed in 0..100 {
            let g: Vec<f64> = (0..512).map(|_| StandardNormal.sample(&mut r)).collect();
            let est = one_client(&g, seed);
            assert!(dist_sq(&est, &g) <= norm_sq(&g));
        }
    }
}
