//! Declarative compressor configuration.

use crate::baselines::{Drive, PermK, RandK, Srq};
use crate::compressors::{Bound, Compressor, HadamardMultiDim, Identity, NoisySign, NormPolicy, OneBit, Repetition, Scheme};
use crate::error::{DmeError, Result};
use crate::sparc::{Codebook, SparseReg};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

fn one() -> usize {
    1
}

/// A scheme plus its parameters, as written in a config file.
///
/// Only the fields the scheme uses may be set:
/// `k` (RandK/PermK coordinates, SRQ levels), `section` (SparseReg `L`),
/// `slots` (OneBit `t`), `sigma` (NoisySign), `bound` (Hadamard ℓ∞ /
/// SparseReg ℓ₂; omitted = taken from the data), and `reps` for any
/// scheme (repetition averaging).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slots: Option<usize>,
    #[serde(default = "one")]
    pub reps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub policy: NormPolicy,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme) -> Self {
        SchemeConfig {
            scheme,
            label: None,
            k: None,
            section: None,
            slots: None,
            reps: 1,
            bound: None,
            sigma: None,
            policy: NormPolicy::Permissive,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    pub fn with_section(mut self, section: usize) -> Self {
        self.section = Some(section);
        self
    }

    pub fn with_slots(mut self, slots: usize) -> Self {
        self.slots = Some(slots);
        self
    }

    pub fn with_reps(mut self, reps: usize) -> Self {
        self.reps = reps;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// The configured label, or the scheme name.
    pub fn display_label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.scheme.name().to_owned())
    }

    fn require(v: Option<usize>, what: &str, scheme: Scheme) -> Result<usize> {
        match v {
            Some(x) if x >= 1 => Ok(x),
            Some(_) => Err(DmeError::param(format!("{scheme}: `{what}` must be >= 1"))),
            None => Err(DmeError::param(format!("{scheme}: missing `{what}`"))),
        }
    }

    fn reject(&self, fields: &[(&str, bool)]) -> Result<()> {
        match fields.iter().find(|(_, set)| *set) {
            Some((name, _)) => Err(DmeError::param(format!("{}: `{name}` does not apply", self.scheme))),
            None => Ok(()),
        }
    }

    fn bound(&self) -> Bound {
        self.bound.map_or(Bound::Auto, Bound::Fixed)
    }

    /// Check that exactly the relevant parameters are present.
    pub fn validate(&self) -> Result<()> {
        use Scheme::*;
        if self.reps == 0 {
            return Err(DmeError::param("`reps` must be >= 1"));
        }
        let k = self.k.is_some();
        let sec = self.section.is_some();
        let slots = self.slots.is_some();
        let bound = self.bound.is_some();
        let sigma = self.sigma.is_some();
        match self.scheme {
            Identity | Drive => self.reject(&[("k", k), ("section", sec), ("slots", slots), ("bound", bound), ("sigma", sigma)]),
            NoisySign => self.reject(&[("k", k), ("section", sec), ("slots", slots), ("bound", bound)]),
            HadamardMultiDim => self.reject(&[("k", k), ("section", sec), ("slots", slots), ("sigma", sigma)]),
            SparseReg => {
                Self::require(self.section, "section", self.scheme)?;
                self.reject(&[("k", k), ("slots", slots), ("sigma", sigma)])
            }
            OneBit => {
                Self::require(self.slots, "slots", self.scheme)?;
                self.reject(&[("k", k), ("section", sec), ("bound", bound), ("sigma", sigma)])
            }
            RandK | PermK | Srq => {
                let kv = Self::require(self.k, "k", self.scheme)?;
                if self.scheme == Srq && kv < 2 {
                    return Err(DmeError::param("srq: `k` (levels) must be >= 2"));
                }
                self.reject(&[("section", sec), ("slots", slots), ("bound", bound), ("sigma", sigma)])
            }
            Repetition => Err(DmeError::param("use `reps` on the inner scheme instead of `repetition`")),
        }?;
        if let Some(b) = self.bound.or(self.sigma) {
            if !(b > 0.0 && b.is_finite()) {
                return Err(DmeError::param("bounds must be positive and finite"));
            }
        }
        Ok(())
    }

    /// Instantiate the compressor. `codebook` is used by SparseReg only
    /// (otherwise each `init` generates one).
    pub fn build(&self, codebook: Option<Arc<Codebook>>) -> Result<Arc<dyn Compressor>> {
        self.validate()?;
        let inner: Arc<dyn Compressor> = match self.scheme {
            Scheme::Identity => Arc::new(Identity),
            Scheme::NoisySign => Arc::new(NoisySign { sigma: self.sigma.map_or(Bound::Auto, Bound::Fixed) }),
            Scheme::HadamardMultiDim => Arc::new(HadamardMultiDim { bound: self.bound(), policy: self.policy }),
            Scheme::SparseReg => {
                let mut s = SparseReg::new(self.section.unwrap_or_default());
                s.bound = self.bound();
                s.policy = self.policy;
                s.codebook = codebook;
                Arc::new(s)
            }
            Scheme::OneBit => {
                let mut o = OneBit::new(self.slots.unwrap_or_default());
                o.policy = self.policy;
                Arc::new(o)
            }
            Scheme::RandK => Arc::new(RandK { k: self.k.unwrap_or_default() }),
            Scheme::PermK => Arc::new(PermK { k: self.k.unwrap_or_default() }),
            Scheme::Srq => Arc::new(Srq { levels: self.k.unwrap_or_default() }),
            Scheme::Drive => Arc::new(Drive),
            Scheme::Repetition => unreachable!("rejected by validate"),
        };
        if self.reps > 1 {
            Ok(Arc::new(Repetition::new(inner, self.reps)?))
        } else {
            Ok(inner)
        }
    }

    /// Exact bits per client per round.
    pub fn bits_per_client(&self, d: usize, m: usize) -> Result<u64> {
        self.build(None)?.bits_per_client(d, m)
    }
}
