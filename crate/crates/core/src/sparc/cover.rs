use super::Codebook;
use crate::compressors::onebit::random_unit;
use crate::error::{DmeError, Result};
use crate::rng::StreamRng;
use crate::vector::{dot, norm};
use serde::{Deserialize, Serialize};

/// Measured (δ₁, δ₂, Γ)-cover parameters of a codebook.
///
/// `gamma_k` and `diameter_k` are exact. The ε-net slack cannot be certified
/// (it quantifies over the whole sphere), so `eps_k` is the minimum over a
/// finite set of probe directions, which can only overstate the true slack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    /// `max_j ‖A_j‖₂ / √d − 1` per section.
    pub gamma_k: Vec<f64>,
    /// `max_{j≠j'} ‖A_j − A_j'‖₂` per section.
    pub diameter_k: Vec<f64>,
    /// Sampled `min_v max_j ⟨v, A_j⟩ / √(2 ln L) − 1` per section.
    pub eps_k: Vec<f64>,
    pub delta1: f64,
    pub delta2: f64,
    /// `max_k diameter_k`
    pub diameter: f64,
    pub eps_sample_count: usize,
    /// Always true: `eps_k` is an estimate, not a certificate.
    pub eps_is_sampled: bool,
}

pub fn cover_check(codebook: &Codebook, n_probe: usize, rng: &mut StreamRng) -> Result<CoverReport> {
    if n_probe == 0 {
        return Err(DmeError::param("cover_check needs n_probe >= 1"));
    }
    let l = codebook.section_size();
    if l < 2 {
        return Err(DmeError::param("cover_check needs sections of L >= 2 rows"));
    }
    let (m, d) = (codebook.levels(), codebook.dim());
    let scale = (2.0 * (l as f64).ln()).sqrt();
    let probes: Vec<Vec<f64>> = (0..n_probe).map(|_| random_unit(d, rng)).collect();

    let mut gamma_k = Vec::with_capacity(m);
    let mut eps_k = Vec::with_capacity(m);
    for k in 0..m {
        let max_norm = (0..l).map(|r| norm(codebook.row(k, r))).fold(0.0, f64::max);
        gamma_k.push(max_norm / (d as f64).sqrt() - 1.0);
        let worst = probes
            .iter()
            .map(|v| (0..l).map(|r| dot(v, codebook.row(k, r))).fold(f64::NEG_INFINITY, f64::max))
            .fold(f64::INFINITY, f64::min);
        eps_k.push(worst / scale - 1.0);
    }
    let diameter_k = codebook.section_diameters().to_vec();
    let mean_abs = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64;
    Ok(CoverReport {
        delta1: mean_abs(&gamma_k),
        delta2: mean_abs(&eps_k),
        diameter: diameter_k.iter().copied().fold(0.0, f64::max),
        gamma_k,
        diameter_k,
        eps_k,
        eps_sample_count: n_probe,
        eps_is_sampled: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, RngStream};
    use crate::sparc::{gen_codebook, DEFAULT_MEMORY_CAP};

    fn rng() -> StreamRng {
        RngStream::new(2).stream(0, 0, Purpose::Probe)
    }

    #[test]
    fn axis_rows_by_hand() {
        let s = 2f64.sqrt();
        let cb = Codebook::from_rows(1, 2, vec![vec![s, 0.0], vec![0.0, s]], 0).unwrap();
        let rep = cover_check(&cb, 10, &mut rng()).unwrap();
        assert!(rep.gamma_k[0].abs() < 1e-15);
        assert!((rep.diameter_k[0] - 2.0).abs() < 1e-15);
        assert_eq!(rep.diameter, rep.diameter_k[0]);
        assert!(rep.eps_is_sampled);
    }

    #[test]
    fn identical_rows_have_zero_diameter() {
        let cb = Codebook::from_rows(2, 3, vec![vec![1.0, 0.5, -0.2]; 6], 0).unwrap();
        let rep = cover_check(&cb, 5, &mut rng()).unwrap();
        assert_eq!(rep.diameter, 0.0);
    }

    #[test]
    fn summary_statistics() {
        let cb = gen_codebook(4, 8, 64, 3, DEFAULT_MEMORY_CAP).unwrap();
        let rep = cover_check(&cb, 50, &mut rng()).unwrap();
        let mean_abs = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>() / 4.0;
        assert_eq!(rep.delta1, mean_abs(&rep.gamma_k));
        assert_eq!(rep.delta2, mean_abs(&rep.eps_k));
        assert_eq!(rep.eps_sample_count, 50);
        assert!(cover_check(&cb, 0, &mut rng()).is_err());
        let single = gen_codebook(2, 1, 4, 3, DEFAULT_MEMORY_CAP).unwrap();
        assert!(cover_check(&single, 3, &mut rng()).is_err());
    }
}
