//! Comparison schemes: RandK and PermK sparsifiers, stochastic rotated
//! quantization (SRQ) and Drive (rotated signs with one scale).

mod drive;
mod permk;
mod randk;
mod rotation;
mod srq;

pub use drive::Drive;
pub use permk::{PermK, PermKState};
pub use randk::{RandK, RandKState};
pub use rotation::{fwht, RotationState};
pub use srq::Srq;

/// `⌈log₂ n⌉` for `n ≥ 1`.
pub(crate) fn ceil_log2(n: usize) -> u64 {
    (usize::BITS - n.saturating_sub(1).leading_zeros()) as u64
}

/// Bits to send `k` (value, index) pairs over `d` coordinates:
/// `32k + k⌈log₂ d⌉`.
pub fn sparse_bits(k: usize, d: usize) -> u64 {
    let k = k as u64;
    32 * k + k * ceil_log2(d)
}
