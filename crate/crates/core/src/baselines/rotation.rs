use crate::error::{DmeError, Result};
use crate::rng::StreamRng;
use rand::Rng;

/// In-place unnormalized fast Walsh–Hadamard transform; `x.len()` must be a
/// power of two.
pub fn fwht(x: &mut [f64]) {
    let n = x.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in x.chunks_exact_mut(2 * h) {
            let (a, b) = block.split_at_mut(h);
            for (u, v) in a.iter_mut().zip(b.iter_mut()) {
                let (s, t) = (*u + *v, *u - *v);
                *u = s;
                *v = t;
            }
        }
        h *= 2;
    }
}

/// Randomized Hadamard rotation `x ↦ H·D·pad(x)/√p`, with `p` the next
/// power of two ≥ d and `D` a shared random ±1 diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationState {
    pub d: usize,
    pub signs: Vec<f64>,
}

impl RotationState {
    pub fn draw(d: usize, rng: &mut StreamRng) -> Result<Self> {
        if d == 0 {
            return Err(DmeError::param("rotation needs d >= 1"));
        }
        let p = d.next_power_of_two();
        let signs = (0..p).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        Ok(RotationState { d, signs })
    }

    /// Padded length `p`.
    pub fn padded(&self) -> usize {
        self.signs.len()
    }

    pub fn rotate(&self, x: &[f64]) -> Vec<f64> {
        let p = self.padded();
        let mut y = vec![0.0; p];
        for ((o, xi), s) in y.iter_mut().zip(x).zip(&self.signs) {
            *o = xi * s;
        }
        fwht(&mut y);
        let scale = 1.0 / (p as f64).sqrt();
        y.iter_mut().for_each(|v| *v *= scale);
        y
    }

    /// Inverse of [`rotate`](Self::rotate), truncated back to `d`.
    pub fn unrotate(&self, y: &[f64]) -> Vec<f64> {
        let p = self.padded();
        let mut x = y.to_vec();
        fwht(&mut x);
        let scale = 1.0 / (p as f64).sqrt();
        x.truncate(self.d);
        for (v, s) in x.iter_mut().zip(&self.signs) {
            *v *= scale * s;
        }
        x
    }
}
