//! The DME step used inside iterative tasks.

use crate::compressors::{init_stream, run_round, Compressor, Problem, RoundKey, RoundOutput, SharedState};
use crate::error::Result;
use crate::rng::RngStream;
use std::sync::Arc;

/// Runs one DME round per call, keeping the protocol state between calls.
///
/// The first call runs `init`; later calls `refresh` the per-round part
/// (fresh permutations/rotations, codebooks kept) unless the driver is
/// [`frozen`](DmeDriver::frozen). Each call uses the next round key, so
/// every encode draws from its own stream.
pub struct DmeDriver {
    compressor: Arc<dyn Compressor>,
    root: RngStream,
    trial: u64,
    refresh_each_round: bool,
    state: Option<SharedState>,
    rounds: u64,
    total_bits: u64,
    clipped: usize,
}

impl DmeDriver {
    pub fn new(compressor: Arc<dyn Compressor>, root: RngStream, trial: u64) -> Self {
        DmeDriver { compressor, root, trial, refresh_each_round: true, state: None, rounds: 0, total_bits: 0, clipped: 0 }
    }

    /// Keep the state drawn by the first `init` for every round.
    pub fn frozen(mut self) -> Self {
        self.refresh_each_round = false;
        self
    }

    pub fn compressor(&self) -> &dyn Compressor {
        self.compressor.as_ref()
    }

    /// The state used by the most recent round.
    pub fn state(&self) -> Option<&SharedState> {
        self.state.as_ref()
    }

    /// DME rounds run so far.
    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    /// Σ of every payload's bit cost over all rounds.
    pub fn total_bits(&self) -> u64 {
        self.total_bits
    }

    /// Payloads whose input was clamped or rescaled, over all rounds.
    pub fn clipped(&self) -> usize {
        self.clipped
    }

    /// Estimate the mean of `rows` (one per client).
    pub fn aggregate(&mut self, rows: &[&[f64]]) -> Result<RoundOutput> {
        let key = RoundKey { trial: self.trial, round: self.rounds };
        let problem = Problem::from_rows(rows)?;
        let mut rng = init_stream(&self.root, key);
        let state = match self.state.take() {
            None => self.compressor.init(&problem, &mut rng)?,
            Some(prev) if self.refresh_each_round => self.compressor.refresh(&prev, &problem, &mut rng)?,
            Some(prev) => prev,
        };
        let out = run_round(self.compressor.as_ref(), &state, rows, &self.root, key);
        self.state = Some(state);
        let out = out?;
        self.rounds += 1;
        self.total_bits += out.total_bits;
        self.clipped += out.clipped_clients;
        Ok(out)
    }
}
