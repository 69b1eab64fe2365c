use super::{gen_codebook, Codebook, CoeffSchedule, DEFAULT_MEMORY_CAP};
use crate::compressors::{
    by_client, check_dim, wrong_body, Bound, Compressor, Estimate, NormPolicy, Payload, PayloadBody, Problem, Scheme,
    SharedState,
};
use crate::error::{DmeError, Result};
use crate::rng::StreamRng;
use crate::vector::{axpy, dist_sq, dot, norm, scaled};
use rand::seq::SliceRandom;
use rand::RngCore;
use std::sync::Arc;

/// Greedy SPARC encoding of `g` over the first `levels` sections: at each
/// section pick the row best aligned with the residual (ties to the
/// smallest index), then subtract its scaled contribution.
///
/// Requires `‖g‖₂ ≤ B` (up to rounding).
pub fn sparc_encode_full(g: &[f64], codebook: &Codebook, coeffs: &CoeffSchedule, levels: usize) -> Result<Vec<u32>> {
    check_dim(codebook.dim(), g)?;
    if levels > codebook.levels() || levels > coeffs.c.len() {
        return Err(DmeError::param(format!(
            "requested {levels} levels, codebook has {} and schedule {}",
            codebook.levels(),
            coeffs.c.len()
        )));
    }
    let n = norm(g);
    if n > coeffs.bound * (1.0 + 1e-12) {
        return Err(DmeError::param(format!("‖g‖₂ = {n} exceeds bound {}", coeffs.bound)));
    }
    let d = codebook.dim();
    let mut residual = g.to_vec();
    let mut out = Vec::with_capacity(levels);
    for k in 0..levels {
        let mut best = 0usize;
        let mut best_val = f64::NEG_INFINITY;
        for (r, row) in codebook.section(k).chunks_exact(d).enumerate() {
            let v = dot(row, &residual);
            if v > best_val {
                best_val = v;
                best = r;
            }
        }
        axpy(-coeffs.c[k], codebook.row(k, best), &mut residual);
        out.push(best as u32);
    }
    Ok(out)
}

/// `Σ_k c_k A_{k, idx_k}` over the given prefix of sections.
pub fn sparc_reconstruct(indices: &[u32], codebook: &Codebook, coeffs: &CoeffSchedule) -> Vec<f64> {
    let mut out = vec![0.0; codebook.dim()];
    for (k, &r) in indices.iter().enumerate() {
        axpy(coeffs.c[k], codebook.row(k, r as usize), &mut out);
    }
    out
}

#[derive(Debug, Clone)]
pub struct SparseRegState {
    pub codebook: Arc<Codebook>,
    pub coeffs: CoeffSchedule,
    /// `levels[i] = ρ(i) ∈ 1..=m`, a permutation.
    pub levels: Vec<u32>,
}

impl SparseRegState {
    pub fn bound(&self) -> f64 {
        self.coeffs.bound
    }
}

#[derive(Debug, Clone)]
pub struct SparseReg {
    /// Rows per section `L`.
    pub section: usize,
    /// ℓ₂ bound B; `Auto` takes `max_i ‖g_i‖₂`.
    pub bound: Bound,
    pub policy: NormPolicy,
    /// Use this codebook instead of generating one in `init`.
    pub codebook: Option<Arc<Codebook>>,
    pub memory_cap: usize,
}

impl SparseReg {
    pub fn new(section: usize) -> Self {
        SparseReg {
            section,
            bound: Bound::Auto,
            policy: NormPolicy::Permissive,
            codebook: None,
            memory_cap: DEFAULT_MEMORY_CAP,
        }
    }

    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = Bound::Fixed(bound);
        self
    }

    pub fn with_codebook(mut self, codebook: Arc<Codebook>) -> Self {
        self.codebook = Some(codebook);
        self
    }

    fn state(state: &SharedState) -> Result<&SparseRegState> {
        match state {
            SharedState::SparseReg(s) => Ok(s),
            other => Err(other.mismatch("sparsereg")),
        }
    }

    fn permutation(m: usize, rng: &mut StreamRng) -> Vec<u32> {
        let mut levels: Vec<u32> = (1..=m as u32).collect();
        levels.shuffle(rng);
        levels
    }

    /// Apply the norm policy: returns the vector to encode and whether it
    /// was rescaled.
    fn admit<'a>(&self, client: usize, g: &'a [f64], bound: f64) -> Result<(std::borrow::Cow<'a, [f64]>, bool)> {
        let n = norm(g);
        if n <= bound * (1.0 + 1e-12) {
            return Ok((g.into(), false));
        }
        match self.policy {
            NormPolicy::Strict => {
                Err(DmeError::Encode { client, reason: format!("‖g‖₂ = {n} exceeds bound {bound}") })
            }
            NormPolicy::Permissive => Ok((scaled(g, bound / n).into(), true)),
        }
    }

    /// Every client's full greedy encoding: `out[i][k]`. Diagnostic only.
    pub fn all_level_indices(&self, state: &SharedState, rows: &[&[f64]]) -> Result<Vec<Vec<u32>>> {
        let st = Self::state(state)?;
        rows.iter()
            .enumerate()
            .map(|(i, g)| {
                let (g, _) = self.admit(i, g, st.bound())?;
                sparc_encode_full(&g, &st.codebook, &st.coeffs, st.codebook.levels())
            })
            .collect()
    }
}

impl Compressor for SparseReg {
    fn scheme(&self) -> Scheme {
        Scheme::SparseReg
    }

    fn init(&self, problem: &Problem, rng: &mut StreamRng) -> Result<SharedState> {
        problem.validate()?;
        let bound = self.bound.resolve(problem.l2_bound)?;
        let coeffs = CoeffSchedule::new(bound, self.section, problem.d, problem.m)?;
        let codebook = match &self.codebook {
            Some(cb) => {
                if (cb.levels(), cb.section_size(), cb.dim()) != (problem.m, self.section, problem.d) {
                    return Err(DmeError::param(format!(
                        "codebook is {}x{}x{}, problem needs m={} L={} d={}",
                        cb.levels(),
                        cb.section_size(),
                        cb.dim(),
                        problem.m,
                        self.section,
                        problem.d
                    )));
                }
                cb.clone()
            }
            None => Arc::new(gen_codebook(problem.m, self.section, problem.d, rng.next_u64(), self.memory_cap)?),
        };
        let levels = Self::permutation(problem.m, rng);
        Ok(SharedState::SparseReg(SparseRegState { codebook, coeffs, levels }))
    }

    /// New ρ (and bound, if automatic); the codebook is kept.
    fn refresh(&self, state: &SharedState, problem: &Problem, rng: &mut StreamRng) -> Result<SharedState> {
        let st = Self::state(state)?;
        if st.levels.len() != problem.m || st.codebook.dim() != problem.d {
            return self.init(problem, rng);
        }
        let bound = self.bound.resolve(problem.l2_bound)?;
        let coeffs = CoeffSchedule::new(bound, self.section, problem.d, problem.m)?;
        let levels = Self::permutation(problem.m, rng);
        Ok(SharedState::SparseReg(SparseRegState { codebook: st.codebook.clone(), coeffs, levels }))
    }

    fn encode(&self, state: &SharedState, client: usize, g: &[f64], rng: &mut StreamRng) -> Result<Payload> {
        Ok(self.encode_repeated(std::slice::from_ref(state), client, g, rng)?.remove(0))
    }

    /// The greedy encoding does not depend on ρ, so repetitions sharing a
    /// codebook and bound reuse one encoding up to the deepest level needed.
    fn encode_repeated(
        &self,
        states: &[SharedState],
        client: usize,
        g: &[f64],
        _rng: &mut StreamRng,
    ) -> Result<Vec<Payload>> {
        let mut cache: Option<(Arc<Codebook>, f64, Vec<u32>, bool)> = None;
        let need = states
            .iter()
            .map(|s| Self::state(s).and_then(|st| level_of(st, client)))
            .collect::<Result<Vec<_>>>()?;
        let deepest = need.iter().copied().max().unwrap_or(0) as usize;
        let bits = (self.section as f64).log2().ceil() as u64;
        let mut out = Vec::with_capacity(states.len());
        for (s, &level) in states.iter().zip(&need) {
            let st = Self::state(s)?;
            let reuse = matches!(&cache, Some((cb, b, _, _)) if Arc::ptr_eq(cb, &st.codebook) && *b == st.bound());
            if !reuse {
                let (gv, clipped) = self.admit(client, g, st.bound())?;
                let full = sparc_encode_full(&gv, &st.codebook, &st.coeffs, deepest.min(st.codebook.levels()))?;
                cache = Some((st.codebook.clone(), st.bound(), full, clipped));
            }
            let (_, _, full, clipped) = cache.as_ref().expect("filled above");
            let idx = *full
                .get(level as usize - 1)
                .ok_or_else(|| DmeError::Encode { client, reason: format!("level {level} not encoded") })?;
            out.push(Payload {
                scheme: Scheme::SparseReg,
                client,
                bit_cost: bits,
                body: PayloadBody::Index(idx),
                clipped: *clipped,
            });
        }
        Ok(out)
    }

    fn decode(&self, state: &SharedState, payloads: &[Payload]) -> Result<Estimate> {
        let st = Self::state(state)?;
        // Accumulate in section order so that identical clients reproduce
        // `sparc_reconstruct` bit for bit.
        let mut by_level = vec![0u32; st.levels.len()];
        for p in by_client(payloads, st.levels.len())? {
            let PayloadBody::Index(r) = p.body else { return Err(wrong_body(Scheme::SparseReg, p.client)) };
            if r as usize >= st.codebook.section_size() {
                return Err(DmeError::Decode(format!("client {}: section index {r} out of range", p.client)));
            }
            by_level[st.levels[p.client] as usize - 1] = r;
        }
        Ok(Estimate::new(sparc_reconstruct(&by_level, &st.codebook, &st.coeffs)))
    }

    fn bits_per_client(&self, _d: usize, _m: usize) -> Result<u64> {
        if self.section == 0 {
            return Err(DmeError::param("section size L must be >= 1"));
        }
        Ok((self.section as f64).log2().ceil() as u64)
    }

    fn scheme_dissimilarity(&self, state: &SharedState, rows: &[&[f64]]) -> Result<Option<f64>> {
        let idx = self.all_level_indices(state, rows)?;
        Ok(Some(sr_delta_reg(Self::state(state)?, &idx)?.exact))
    }
}

fn level_of(st: &SparseRegState, client: usize) -> Result<u32> {
    st.levels
        .get(client)
        .copied()
        .ok_or_else(|| DmeError::Encode { client, reason: format!("no level for client (m={})", st.levels.len()) })
}

/// `Δ_reg` together with its codebook-geometry upper bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaReg {
    /// `(1/m²) Σ_{i≠j} Σ_k c_k² ‖A_{k,b_ik} − A_{k,b_jk}‖²`
    pub exact: f64,
    /// `(2B²Γ² ln L/(d²m²)) Σ_{i≠j} Σ_k (1 − 2 ln L/d)^{k−1}·1(b_ik ≠ b_jk)`, with Γ
    /// the largest within-section row distance of the codebook.
    pub upper_bound: f64,
}

fn check_indices(st: &SparseRegState, indices: &[Vec<u32>]) -> Result<usize> {
    let levels = indices.first().map(Vec::len).unwrap_or(0);
    if levels > st.codebook.levels() || indices.iter().any(|v| v.len() != levels) {
        return Err(DmeError::param("index array must be m clients x (<= codebook levels)"));
    }
    if indices.iter().flatten().any(|&r| r as usize >= st.codebook.section_size()) {
        return Err(DmeError::param("section index out of range"));
    }
    Ok(levels)
}

/// Exact `Δ_reg` and its upper bound from full encodings `indices[i][k]`.
pub fn sr_delta_reg(st: &SparseRegState, indices: &[Vec<u32>]) -> Result<DeltaReg> {
    let levels = check_indices(st, indices)?;
    let m = indices.len();
    let mut exact = 0.0;
    for k in 0..levels {
        let ck2 = st.coeffs.c[k] * st.coeffs.c[k];
        for i in 0..m {
            for j in 0..m {
                if i != j && indices[i][k] != indices[j][k] {
                    let a = st.codebook.row(k, indices[i][k] as usize);
                    let b = st.codebook.row(k, indices[j][k] as usize);
                    exact += ck2 * dist_sq(a, b);
                }
            }
        }
    }
    let mm = (m * m) as f64;
    Ok(DeltaReg { exact: exact / mm, upper_bound: sr_delta_reg_bound(st, indices)? })
}

/// The right-hand side alone, using the codebook's measured diameter.
pub fn sr_delta_reg_bound(st: &SparseRegState, indices: &[Vec<u32>]) -> Result<f64> {
    let levels = check_indices(st, indices)?;
    let m = indices.len();
    let (l, d) = (st.codebook.section_size() as f64, st.codebook.dim() as f64);
    let gamma = st.codebook.section_diameters().iter().copied().fold(0.0, f64::max);
    let contraction = 1.0 - 2.0 * l.ln() / d;
    let mut sum = 0.0;
    for k in 0..levels {
        let w = contraction.powi(k as i32);
        for i in 0..m {
            for j in 0..m {
                if i != j && indices[i][k] != indices[j][k] {
                    sum += w;
                }
            }
        }
    }
    let b = st.bound();
    Ok(2.0 * b * b * gamma * gamma * l.ln() / (d * d * (m * m) as f64) * sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compressors::{init_stream, run_round, RoundKey};
    use crate::rng::{Purpose, RngStream};
    use crate::vector::normalized;
    use rand::Rng;

    fn rng(seed: u64) -> StreamRng {
        RngStream::new(seed).stream(0, 0, Purpose::Init)
    }

    fn unit(d: usize, r: &mut StreamRng) -> Vec<f64> {
        crate::compressors::onebit::random_unit(d, r)
    }

    fn state_for(sr: &SparseReg, m: usize, d: usize, seed: u64) -> SharedState {
        let mut p = Problem::new(m, d);
        p.l2_bound = 1.0;
        sr.init(&p, &mut rng(seed)).unwrap()
    }

    #[test]
    fn single_row_sections_pick_index_zero() {
        let cb = gen_codebook(3, 1, 4, 0, DEFAULT_MEMORY_CAP).unwrap();
        let co = CoeffSchedule::new(1.0, 1, 4, 3).unwrap();
        assert_eq!(sparc_encode_full(&[0.5, 0.0, 0.0, 0.0], &cb, &co, 3).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn aligned_row_is_selected() {
        // Section 0: row 2 is along e1, the others are orthogonal to it.
        let rows = vec![
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, -1.0, 0.0],
        ];
        let cb = Codebook::from_rows(1, 4, rows, 0).unwrap();
        let co = CoeffSchedule::new(1.0, 4, 3, 1).unwrap();
        let g = scaled(cb.row(0, 2), co.c[0]);
        assert_eq!(sparc_encode_full(&g, &cb, &co, 1).unwrap(), vec![2]);
    }

    #[test]
    fn prefix_consistency() {
        let cb = gen_codebook(16, 8, 24, 4, DEFAULT_MEMORY_CAP).unwrap();
        let co = CoeffSchedule::new(1.0, 8, 24, 16).unwrap();
        let mut r = rng(9);
        for _ in 0..20 {
            let g = unit(24, &mut r);
            let full = sparc_encode_full(&g, &cb, &co, 16).unwrap();
            for k in 1..=16 {
                assert_eq!(sparc_encode_full(&g, &cb, &co, k).unwrap(), full[..k]);
            }
        }
    }

    #[test]
    fn residual_shrinks_over_levels() {
        let (m, l, d) = (64, 4, 32);
        let cb = gen_codebook(m, l, d, 77, DEFAULT_MEMORY_CAP).unwrap();
        let co = CoeffSchedule::new(1.0, l, d, m).unwrap();
        let mut r = rng(1);
        let mut ok = 0;
        for _ in 0..100 {
            let g = unit(d, &mut r);
            let full = sparc_encode_full(&g, &cb, &co, m).unwrap();
            let all = dist_sq(&g, &sparc_reconstruct(&full, &cb, &co));
            let half = dist_sq(&g, &sparc_reconstruct(&full[..m / 2], &cb, &co));
            ok += (all <= half) as usize;
        }
        assert!(ok >= 95, "{ok}/100");
    }

    #[test]
    fn payload_is_level_index_with_log_bits() {
        let sr = SparseReg::new(16).with_bound(1.0);
        let st = state_for(&sr, 6, 12, 3);
        let SharedState::SparseReg(s) = &st else { unreachable!() };
        let g = unit(12, &mut rng(4));
        let full = sparc_encode_full(&g, &s.codebook, &s.coeffs, 6).unwrap();
        for i in 0..6 {
            let p = sr.encode(&st, i, &g, &mut rng(0)).unwrap();
            assert_eq!(p.bit_cost, 4);
            assert_eq!(p.body, PayloadBody::Index(full[s.levels[i] as usize - 1]));
        }
    }

    #[test]
    fn identical_clients_reconstruct_full_code() {
        let sr = SparseReg::new(4).with_bound(1.0);
        let g = unit(16, &mut rng(5));
        let rows = vec![g.as_slice(); 10];
        let root = RngStream::new(8);
        let key = RoundKey { trial: 0, round: 0 };
        let p = Problem::from_rows(&rows).unwrap();
        let st = sr.init(&p, &mut init_stream(&root, key)).unwrap();
        let out = run_round(&sr, &st, &rows, &root, key).unwrap();
        let SharedState::SparseReg(s) = &st else { unreachable!() };
        let full = sparc_encode_full(&g, &s.codebook, &s.coeffs, 10).unwrap();
        assert_eq!(out.estimate.values, sparc_reconstruct(&full, &s.codebook, &s.coeffs));
        let d = sr_delta_reg(s, &vec![full; 10]).unwrap();
        assert_eq!((d.exact, d.upper_bound), (0.0, 0.0));
    }

    #[test]
    fn single_client_decodes_first_section() {
        let sr = SparseReg::new(4).with_bound(1.0);
        let st = state_for(&sr, 1, 8, 2);
        let g = unit(8, &mut rng(3));
        let p = sr.encode(&st, 0, &g, &mut rng(0)).unwrap();
        let SharedState::SparseReg(s) = &st else { unreachable!() };
        let PayloadBody::Index(r) = p.body else { unreachable!() };
        assert_eq!(sr.decode(&st, &[p]).unwrap().values, scaled(s.codebook.row(0, r as usize), s.coeffs.c[0]));
    }

    #[test]
    fn decode_is_sum_of_client_contributions() {
        let sr = SparseReg::new(8).with_bound(1.0);
        let st = state_for(&sr, 7, 10, 6);
        let SharedState::SparseReg(s) = &st else { unreachable!() };
        let mut r = rng(2);
        let ps: Vec<Payload> = (0..7).map(|i| sr.encode(&st, i, &unit(10, &mut r), &mut r).unwrap()).collect();
        let mut naive = vec![0.0; 10];
        for p in &ps {
            let PayloadBody::Index(idx) = p.body else { unreachable!() };
            let k = s.levels[p.client] as usize - 1;
            let row = s.codebook.row(k, idx as usize);
            for j in 0..10 {
                naive[j] += s.coeffs.c[k] * row[j];
            }
        }
        let got = sr.decode(&st, &ps).unwrap().values;
        for (a, b) in got.iter().zip(&naive) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(sr.decode(&st, &ps[1..]).is_err());
    }

    #[test]
    fn norm_policy() {
        let mut sr = SparseReg::new(4).with_bound(1.0);
        let st = state_for(&sr, 2, 8, 1);
        let big = vec![1.0; 8];
        let p = sr.encode(&st, 0, &big, &mut rng(0)).unwrap();
        assert!(p.clipped);
        let small = normalized(&big).unwrap();
        let q = sr.encode(&st, 0, &small, &mut rng(0)).unwrap();
        assert_eq!(p.body, q.body);
        sr.policy = NormPolicy::Strict;
        assert!(matches!(sr.encode(&st, 1, &big, &mut rng(0)), Err(DmeError::Encode { client: 1, .. })));
    }

    #[test]
    fn delta_reg_one_level_difference() {
        let sr = SparseReg::new(4).with_bound(1.0);
        let m = 2;
        let st = state_for(&sr, m, 16, 12);
        let SharedState::SparseReg(s) = &st else { unreachable!() };
        let base = vec![0u32; m];
        let mut other = base.clone();
        other[1] = 2;
        let idx = vec![base, other];
        let dist = dist_sq(s.codebook.row(1, 0), s.codebook.row(1, 2));
        let want = 2.0 / (m * m) as f64 * s.coeffs.c[1].powi(2) * dist;
        let got = sr_delta_reg(s, &idx).unwrap();
        assert!((got.exact - want).abs() < 1e-15 * want.max(1.0));
        assert!(got.exact <= got.upper_bound);
    }

    #[test]
    fn delta_reg_never_exceeds_bound() {
        let mut r = rng(31);
        for t in 0..200 {
            let m = r.random_range(2..8);
            let l = 1 << r.random_range(1..4);
            let d = r.random_range(8..24);
            let sr = SparseReg::new(l).with_bound(1.0);
            let st = state_for(&sr, m, d, t);
            let SharedState::SparseReg(s) = &st else { unreachable!() };
            let idx: Vec<Vec<u32>> = (0..m).map(|_| (0..m).map(|_| r.random_range(0..l as u32)).collect()).collect();
            let got = sr_delta_reg(s, &idx).unwrap();
            assert!(got.exact <= got.upper_bound * (1.0 + 1e-12), "{got:?}");
        }
    }
}
