//! One bit per direction: client i reports which side of a shared random
//! hyperplane its (unit) vector lies on. Recovering the mean direction is
//! then halfspace learning from `m·t` labelled points, a fraction of whose
//! labels are "corrupted" by the clients' disagreement.

use super::{by_client, check_dim, wrong_body, Compressor, Estimate, NormPolicy, Payload, PayloadBody, Problem, Scheme, SharedState};
use crate::error::{DmeError, Result};
use crate::rng::{Purpose, RngStream, StreamRng};
use crate::vector::{axpy, dot, norm, normalized, scaled};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use std::fmt;
use std::sync::Arc;

/// Tolerance on `‖g_i‖₂ = 1` before the norm policy kicks in.
pub const UNIT_TOL: f64 = 1e-9;

/// Custom direction learner: `(directions, labels) → unit vector`.
pub type HalfspaceLearner = dyn Fn(&[Vec<f64>], &[i8]) -> Result<Vec<f64>> + Send + Sync;

#[derive(Clone, Default)]
pub enum OneBitDecoder {
    /// `g' = (1/(m·t)) Σ z·b`, then `g'/‖g'‖`.
    #[default]
    Average,
    /// Any halfspace learner, e.g. one robust to malicious noise.
    Custom(Arc<HalfspaceLearner>),
}

impl fmt::Debug for OneBitDecoder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OneBitDecoder::Average => f.write_str("Average"),
            OneBitDecoder::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Where the shared unit directions `z_{i,s}` come from.
#[derive(Debug, Clone)]
pub enum Directions {
    /// Regenerated on demand from a shared seed: client i's slot s is the
    /// s-th normalized Gaussian draw of stream `(0, i, Directions)`. Avoids
    /// storing `m·t·d` reals.
    Seeded { key: u64 },
    /// `z[i][s]`, each of unit norm.
    Explicit(Arc<Vec<Vec<Vec<f64>>>>),
}

#[derive(Debug, Clone)]
pub struct OneBitState {
    pub d: usize,
    pub m: usize,
    pub slots: usize,
    pub directions: Directions,
}

/// A uniform point on `S^{d−1}`.
pub fn random_unit(d: usize, rng: &mut impl RngCore) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        if let Some(u) = normalized(&v) {
            return u;
        }
    }
}

impl OneBitState {
    /// All `t` directions of one client.
    pub fn client_directions(&self, client: usize) -> Result<Vec<Vec<f64>>> {
        if client >= self.m {
            return Err(DmeError::Encode { client, reason: format!("no directions for client (m={})", self.m) });
        }
        match &self.directions {
            Directions::Seeded { key } => {
                let mut rng = RngStream::new(*key).stream(0, client as u64, Purpose::Directions);
                Ok((0..self.slots).map(|_| random_unit(self.d, &mut rng)).collect())
            }
            Directions::Explicit(z) => Ok(z[client].clone()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OneBit {
    /// Bits per client `t`.
    pub slots: usize,
    pub policy: NormPolicy,
    pub decoder: OneBitDecoder,
    /// Use these directions instead of drawing them in `init`.
    pub explicit: Option<Arc<Vec<Vec<Vec<f64>>>>>,
}

impl OneBit {
    pub fn new(slots: usize) -> Self {
        OneBit { slots, policy: NormPolicy::Permissive, decoder: OneBitDecoder::Average, explicit: None }
    }

    pub fn with_decoder(mut self, decoder: OneBitDecoder) -> Self {
        self.decoder = decoder;
        self
    }

    /// Fix the directions: `z[i][s]` for client i, slot s.
    pub fn with_directions(mut self, z: Vec<Vec<Vec<f64>>>) -> Self {
        self.explicit = Some(Arc::new(z));
        self
    }

    fn state(state: &SharedState) -> Result<&OneBitState> {
        match state {
            SharedState::OneBit(s) => Ok(s),
            other => Err(other.mismatch("onebit")),
        }
    }
}

/// `sign(⟨g, z⟩)` with ties to +1.
#[inline]
pub fn halfspace_label(g: &[f64], z: &[f64]) -> i8 {
    if dot(g, z) >= 0.0 {
        1
    } else {
        -1
    }
}

impl Compressor for OneBit {
    fn scheme(&self) -> Scheme {
        Scheme::OneBit
    }

    fn init(&self, problem: &Problem, rng: &mut StreamRng) -> Result<SharedState> {
        problem.validate()?;
        if self.slots == 0 {
            return Err(DmeError::param("onebit needs t >= 1 bits per client"));
        }
        let directions = match &self.explicit {
            Some(z) => {
                let ok = z.len() == problem.m
                    && z.iter().all(|c| c.len() == self.slots && c.iter().all(|v| v.len() == problem.d));
                if !ok {
                    return Err(DmeError::param(format!(
                        "explicit directions must be m={} x t={} x d={}",
                        problem.m, self.slots, problem.d
                    )));
                }
                if let Some(v) = z.iter().flatten().find(|v| (norm(v) - 1.0).abs() > 1e-12) {
                    return Err(DmeError::param(format!("direction with norm {} is not unit", norm(v))));
                }
                Directions::Explicit(z.clone())
            }
            None => Directions::Seeded { key: rng.next_u64() },
        };
        Ok(SharedState::OneBit(OneBitState { d: problem.d, m: problem.m, slots: self.slots, directions }))
    }

    fn encode(&self, state: &SharedState, client: usize, g: &[f64], _rng: &mut StreamRng) -> Result<Payload> {
        let st = Self::state(state)?;
        check_dim(st.d, g)?;
        let n = norm(g);
        let clipped = (n - 1.0).abs() > UNIT_TOL;
        if clipped && self.policy == NormPolicy::Strict {
            return Err(DmeError::Encode { client, reason: format!("‖g‖₂ = {n}, expected a unit vector") });
        }
        // Only the sign of ⟨g, z⟩ matters, so normalization is for the
        // record; a zero vector labels every slot +1.
        let bits = st.client_directions(client)?.iter().map(|z| halfspace_label(g, z)).collect();
        Ok(Payload { scheme: Scheme::OneBit, client, bit_cost: st.slots as u64, body: PayloadBody::Signs(bits), clipped })
    }

    fn decode(&self, state: &SharedState, payloads: &[Payload]) -> Result<Estimate> {
        let st = Self::state(state)?;
        let ordered = by_client(payloads, st.m)?;
        let labels = |p: &Payload| -> Result<Vec<i8>> {
            match &p.body {
                PayloadBody::Signs(b) if b.len() == st.slots => Ok(b.clone()),
                _ => Err(wrong_body(Scheme::OneBit, p.client)),
            }
        };
        match &self.decoder {
            OneBitDecoder::Average => {
                let mut sum = vec![0.0; st.d];
                let mut first = None;
                for p in ordered {
                    let bits = labels(p)?;
                    for (z, b) in st.client_directions(p.client)?.into_iter().zip(bits) {
                        axpy(f64::from(b), &z, &mut sum);
                        first.get_or_insert(z);
                    }
                }
                let avg = scaled(&sum, 1.0 / (st.m * st.slots) as f64);
                match normalized(&avg) {
                    Some(u) => Ok(Estimate::new(u)),
                    None => Ok(Estimate { values: first.expect("m, t >= 1"), degenerate: true }),
                }
            }
            OneBitDecoder::Custom(learn) => {
                let mut zs = Vec::with_capacity(st.m * st.slots);
                let mut ys = Vec::with_capacity(st.m * st.slots);
                for p in ordered {
                    ys.extend(labels(p)?);
                    zs.extend(st.client_directions(p.client)?);
                }
                let v = learn(&zs, &ys)?;
                check_dim(st.d, &v).map_err(|e| DmeError::Decode(format!("custom decoder: {e}")))?;
                match normalized(&v) {
                    Some(u) => Ok(Estimate::new(u)),
                    None => Ok(Estimate { values: zs.swap_remove(0), degenerate: true }),
                }
            }
        }
    }

    fn bits_per_client(&self, _d: usize, _m: usize) -> Result<u64> {
        Ok(self.slots as u64)
    }
}
