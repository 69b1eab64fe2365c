//! Budget matching: pick integer parameters so a scheme's bits per client
//! land as close as possible to a target.

use super::config::SchemeConfig;
use crate::baselines::{sparse_bits, Srq};
use crate::compressors::Scheme;
use crate::error::{DmeError, Result};
use crate::sparc::DEFAULT_MEMORY_CAP;

/// Largest SparseReg section size the matcher considers.
pub const MAX_SECTION: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetMatch {
    pub config: SchemeConfig,
    pub bits: u64,
    pub within_tolerance: bool,
}

/// Tune `base`'s integer parameters (K for sparsifiers and SRQ, `L` and
/// repetitions for SparseReg, repetitions for fixed-cost schemes, `t` for
/// OneBit) to minimize `|bits − budget|`. Never fails for a reachable
/// scheme; out-of-tolerance results are flagged, not rejected.
pub fn match_budget(base: &SchemeConfig, d: usize, m: usize, budget: u64, tol: u64) -> Result<BudgetMatch> {
    if budget == 0 || d == 0 || m == 0 {
        return Err(DmeError::param("budget, d and m must be positive"));
    }
    let gap = |bits: u64| bits.abs_diff(budget);
    let mut cfg = base.clone();
    let bits = match base.scheme {
        Scheme::RandK | Scheme::PermK => {
            // Cost is increasing in K; the first minimizer is the smaller K.
            let k = (1..=d).min_by_key(|&k| gap(sparse_bits(k, d))).expect("d >= 1");
            cfg.k = Some(k);
            cfg.reps = 1;
            sparse_bits(k, d)
        }
        Scheme::Srq => {
            let mut best = (2, gap(Srq::bits(2, d)));
            let mut k = 3usize;
            while Srq::bits(k, d) <= budget + gap(Srq::bits(best.0, d)) && k < 1 << 24 {
                let g = gap(Srq::bits(k, d));
                if g < best.1 {
                    best = (k, g);
                }
                k += 1;
            }
            cfg.k = Some(best.0);
            cfg.reps = 1;
            Srq::bits(best.0, d)
        }
        Scheme::SparseReg => {
            // (gap, −L, R): smallest gap, ties to the larger section.
            let mut best: Option<(u64, i64, usize)> = None;
            let mut section = 2usize;
            while section <= MAX_SECTION {
                let rate_ok = (d as f64) > 2.0 * (section as f64).ln();
                let mem_ok = section.saturating_mul(m).saturating_mul(d) <= DEFAULT_MEMORY_CAP;
                if rate_ok && mem_ok {
                    let b = section.trailing_zeros() as u64;
                    let r_lo = (budget / b).max(1) as usize;
                    for r in [r_lo, r_lo + 1] {
                        let key = (gap(r as u64 * b), -(section as i64), r);
                        if best.map_or(true, |bk| (key.0, key.1) < (bk.0, bk.1)) {
                            best = Some(key);
                        }
                    }
                }
                section *= 2;
            }
            let (_, neg_l, r) =
                best.ok_or_else(|| DmeError::param(format!("no admissible SparseReg section size for d={d}")))?;
            cfg.section = Some((-neg_l) as usize);
            cfg.reps = r;
            cfg.bits_per_client(d, m)?
        }
        Scheme::OneBit => {
            cfg.slots = Some(budget as usize);
            cfg.reps = 1;
            budget
        }
        Scheme::Identity | Scheme::NoisySign | Scheme::HadamardMultiDim | Scheme::Drive => {
            cfg.reps = 1;
            let unit = cfg.bits_per_client(d, m)?;
            let r_lo = (budget / unit).max(1);
            let r = [r_lo, r_lo + 1].into_iter().min_by_key(|&r| gap(r * unit)).expect("nonempty");
            cfg.reps = r as usize;
            r * unit
        }
        Scheme::Repetition => return Err(DmeError::param("match the inner scheme, not `repetition`")),
    };
    debug_assert_eq!(bits, cfg.bits_per_client(d, m)?);
    Ok(BudgetMatch { config: cfg, bits, within_tolerance: gap(bits) <= tol })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matched(scheme: Scheme, d: usize, budget: u64) -> BudgetMatch {
        match_budget(&SchemeConfig::new(scheme), d, 100, budget, 25).unwrap()
    }

    #[test]
    fn randk_exhaustive() {
        let b = matched(Scheme::RandK, 512, 2375);
        assert_eq!((b.config.k, b.bits, b.within_tolerance), (Some(58), 2378, true));
    }

    #[test]
    fn hadamard_is_flagged() {
        let b = matched(Scheme::HadamardMultiDim, 512, 2375);
        assert_eq!((b.config.reps, b.bits, b.within_tolerance), (5, 2560, false));
    }

    #[test]
    fn onebit_one_bit_per_slot() {
        let b = matched(Scheme::OneBit, 512, 2375);
        assert_eq!((b.config.slots, b.bits), (Some(2375), 2375));
    }

    #[test]
    fn srq_and_sparsereg_hit_the_band() {
        let s = matched(Scheme::Srq, 512, 2375);
        assert!(s.within_tolerance, "{s:?}");
        let r = matched(Scheme::SparseReg, 512, 2375);
        assert!(r.within_tolerance, "{r:?}");
        assert_eq!(r.bits, 2375);
    }

    #[test]
    fn matcher_is_optimal_for_randk_by_brute_force() {
        for budget in [40u64, 100, 777, 2375, 5000] {
            let b = matched(Scheme::RandK, 300, budget);
            let best = (1..=300).map(|k| sparse_bits(k, 300).abs_diff(budget)).min().unwrap();
            assert_eq!(b.bits.abs_diff(budget), best);
        }
    }
}
