use super::{by_client, Compressor, Estimate, Payload, PayloadBody, Problem, Scheme, SharedState};
use crate::error::{DmeError, Result};
use crate::rng::StreamRng;
use std::sync::Arc;

/// Run an inner scheme `R` times with fresh per-round randomness
/// (permutation, rotation, encode noise) and average the decodes. Long-lived
/// structure such as a codebook is drawn once and reused. The variance-type
/// dissimilarity term shrinks by `1/R` at `R×` the bits.
#[derive(Clone)]
pub struct Repetition {
    inner: Arc<dyn Compressor>,
    reps: usize,
}

impl std::fmt::Debug for Repetition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Repetition({} x{})", self.inner.scheme(), self.reps)
    }
}

impl Repetition {
    pub fn new(inner: Arc<dyn Compressor>, reps: usize) -> Result<Self> {
        if reps == 0 {
            return Err(DmeError::param("repetitions must be >= 1"));
        }
        Ok(Repetition { inner, reps })
    }

    pub fn inner(&self) -> &dyn Compressor {
        self.inner.as_ref()
    }

    pub fn reps(&self) -> usize {
        self.reps
    }

    fn states(state: &SharedState) -> Result<&[SharedState]> {
        match state {
            SharedState::Repeated(s) => Ok(s),
            other => Err(other.mismatch("repeated")),
        }
    }
}

impl Compressor for Repetition {
    fn scheme(&self) -> Scheme {
        Scheme::Repetition
    }

    fn init(&self, problem: &Problem, rng: &mut StreamRng) -> Result<SharedState> {
        let first = self.inner.init(problem, rng)?;
        let mut states = Vec::with_capacity(self.reps);
        for _ in 1..self.reps {
            states.push(self.inner.refresh(&first, problem, rng)?);
        }
        states.insert(0, first);
        Ok(SharedState::Repeated(states))
    }

    fn refresh(&self, state: &SharedState, problem: &Problem, rng: &mut StreamRng) -> Result<SharedState> {
        Self::states(state)?
            .iter()
            .map(|s| self.inner.refresh(s, problem, rng))
            .collect::<Result<_>>()
            .map(SharedState::Repeated)
    }

    fn encode(&self, state: &SharedState, client: usize, g: &[f64], rng: &mut StreamRng) -> Result<Payload> {
        let parts = self.inner.encode_repeated(Self::states(state)?, client, g, rng)?;
        Ok(Payload {
            scheme: Scheme::Repetition,
            client,
            bit_cost: parts.iter().map(|p| p.bit_cost).sum(),
            clipped: parts.iter().any(|p| p.clipped),
            body: PayloadBody::Repeated(parts),
        })
    }

    fn decode(&self, state: &SharedState, payloads: &[Payload]) -> Result<Estimate> {
        let states = Self::states(state)?;
        let ordered = by_client(payloads, payloads.len())?;
        let mut per_rep: Vec<Vec<Payload>> = vec![Vec::with_capacity(ordered.len()); states.len()];
        for p in ordered {
            match &p.body {
                PayloadBody::Repeated(parts) if parts.len() == states.len() => {
                    for (bucket, part) in per_rep.iter_mut().zip(parts) {
                        bucket.push(part.clone());
                    }
                }
                _ => return Err(super::wrong_body(Scheme::Repetition, p.client)),
            }
        }
        let mut acc: Option<Vec<f64>> = None;
        let mut degenerate = false;
        for (s, ps) in states.iter().zip(&per_rep) {
            let est = self.inner.decode(s, ps)?;
            degenerate |= est.degenerate;
            match &mut acc {
                None => acc = Some(est.values),
                Some(a) => a.iter_mut().zip(&est.values).for_each(|(x, y)| *x += y),
            }
        }
        let r = states.len() as f64;
        let values = acc.unwrap_or_default().into_iter().map(|x| x / r).collect();
        Ok(Estimate { values, degenerate })
    }

    fn bits_per_client(&self, d: usize, m: usize) -> Result<u64> {
        Ok(self.reps as u64 * self.inner.bits_per_client(d, m)?)
    }

    /// The inner scheme's dissimilarity for the first repetition's state;
    /// the effective variance term is this divided by `R`.
    fn scheme_dissimilarity(&self, state: &SharedState, rows: &[&[f64]]) -> Result<Option<f64>> {
        let states = Self::states(state)?;
        self.inner.scheme_dissimilarity(&states[0], rows)
    }
}
