//! Sparse regression codes (SPARCs) and the SparseReg scheme.
//!
//! A codebook `A` has `m` sections of `L` rows each. A vector is
//! approximated greedily by picking one row per section, scaled by a
//! geometrically decaying coefficient. SparseReg splits this code across
//! clients: client i sends only its pick for section ρ(i), i.e. `⌈log₂ L⌉`
//! bits.

mod codebook;
mod coeffs;
mod cover;
mod sparsereg;

pub use codebook::{gen_codebook, Codebook, DEFAULT_MEMORY_CAP};
pub use coeffs::CoeffSchedule;
pub use cover::{cover_check, CoverReport};
pub use sparsereg::{
    sparc_encode_full, sparc_reconstruct, sr_delta_reg, sr_delta_reg_bound, DeltaReg, SparseReg, SparseRegState,
};
