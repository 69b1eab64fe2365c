//! Sign of the data plus Gaussian noise, decoded through the inverse of the
//! noise's CDF. With identical clients the vote fraction at a coordinate
//! converges to `Φ_σ(g^j)`, which the decoder inverts.

use super::{by_client, check_dim, wrong_body, Bound, Compressor, Estimate, Payload, PayloadBody, Problem, Scheme, SharedState};
use crate::error::{DmeError, Result};
use crate::rng::StreamRng;
use crate::special::{inv_phi_sigma, phi_sigma};
use crate::vector::compensated_mean;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoisySign {
    /// Noise scale σ; `Auto` takes `max_i ‖g_i‖∞`.
    pub sigma: Bound,
}

impl NoisySign {
    pub fn new(sigma: f64) -> Self {
        NoisySign { sigma: Bound::Fixed(sigma) }
    }

    /// The bit each coordinate would send for a given noise draw.
    pub fn sign_with_noise(g: &[f64], noise: &[f64]) -> Vec<i8> {
        g.iter().zip(noise).map(|(x, n)| if x + n >= 0.0 { 1 } else { -1 }).collect()
    }

    fn sigma_of(state: &SharedState) -> Result<(f64, usize)> {
        match state {
            SharedState::NoisySign { sigma, d } => Ok((*sigma, *d)),
            other => Err(other.mismatch("noisysign")),
        }
    }
}

impl Compressor for NoisySign {
    fn scheme(&self) -> Scheme {
        Scheme::NoisySign
    }

    fn init(&self, problem: &Problem, _rng: &mut StreamRng) -> Result<SharedState> {
        problem.validate()?;
        Ok(SharedState::NoisySign { sigma: self.sigma.resolve(problem.linf_bound)?, d: problem.d })
    }

    fn encode(&self, state: &SharedState, client: usize, g: &[f64], rng: &mut StreamRng) -> Result<Payload> {
        let (sigma, d) = Self::sigma_of(state)?;
        check_dim(d, g)?;
        let noise: Vec<f64> = (0..d).map(|_| sigma * Distribution::<f64>::sample(&StandardNormal, rng)).collect();
        Ok(Payload {
            scheme: Scheme::NoisySign,
            client,
            bit_cost: d as u64,
            body: PayloadBody::Signs(Self::sign_with_noise(g, &noise)),
            clipped: false,
        })
    }

    fn decode(&self, state: &SharedState, payloads: &[Payload]) -> Result<Estimate> {
        let (sigma, d) = Self::sigma_of(state)?;
        let m = payloads.len();
        if m == 0 {
            return Err(DmeError::Decode("no payloads".into()));
        }
        let mut votes = vec![0i64; d];
        for p in by_client(payloads, m)? {
            let PayloadBody::Signs(bits) = &p.body else { return Err(wrong_body(Scheme::NoisySign, p.client)) };
            if bits.len() != d {
                return Err(DmeError::Decode(format!("client {}: {} bits, expected {d}", p.client, bits.len())));
            }
            for (v, b) in votes.iter_mut().zip(bits) {
                *v += i64::from(*b);
            }
        }
        // Half the vote resolution keeps Φ⁻¹ away from its poles.
        let cap = 1.0 - 1.0 / (2.0 * m as f64);
        let values = votes
            .iter()
            .map(|&v| inv_phi_sigma(sigma, (v as f64 / m as f64).clamp(-cap, cap)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Estimate::new(values))
    }

    fn bits_per_client(&self, d: usize, _m: usize) -> Result<u64> {
        Ok(d as u64)
    }

    fn scheme_dissimilarity(&self, state: &SharedState, rows: &[&[f64]]) -> Result<Option<f64>> {
        let (sigma, _) = Self::sigma_of(state)?;
        noisysign_delta_phi(sigma, rows).map(Some)
    }
}

/// `Δ_Φ = max_j |(1/m) Σ_i Φ_σ(g_i^j) − Φ_σ(g^j)|`.
pub fn noisysign_delta_phi(sigma: f64, rows: &[&[f64]]) -> Result<f64> {
    let mean = compensated_mean(rows)?;
    let m = rows.len() as f64;
    let mut worst = 0.0f64;
    for (j, gj) in mean.iter().enumerate() {
        let phis = rows.iter().map(|r| phi_sigma(sigma, r[j])).collect::<Result<Vec<_>>>()?;
        // Identical coordinates average exactly, so identical clients give 0.
        let avg = if phis.iter().all(|&p| p == phis[0]) { phis[0] } else { phis.iter().sum::<f64>() / m };
        worst = worst.max((avg - phi_sigma(sigma, *gj)?).abs());
    }
    Ok(worst)
}
