//! Synthetic DME instances: a center `g` plus client vectors spread around
//! it by a controllable dissimilarity.

use crate::compressors::Problem;
use crate::compressors::onebit::random_unit;
use crate::error::{DmeError, Result};
use crate::rng::StreamRng;
use crate::vector::{axpy, clients_from_rows, dot, scaled, ClientVector, MeanTarget};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    /// `‖g‖₂ = center_scale`, `g_i = g + N(0, dissim²·I)`.
    Gaussian,
    /// `g ~ U[−B, B]^d`, `g_i = g + U[−dissim, dissim]^d`.
    Hypercube,
    /// Unit `g`, each `g_i` a unit vector at angle `π·dissim` from `g`.
    Sphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub d: usize,
    pub m: usize,
    /// `‖g‖₂` for gaussian, `B` for hypercube; ignored for sphere.
    #[serde(default = "default_scale")]
    pub center_scale: f64,
    /// Per-coordinate std (gaussian), half-width (hypercube) or angle/π
    /// (sphere).
    pub dissim: f64,
}

fn default_scale() -> f64 {
    100.0
}

/// One generated problem.
#[derive(Debug, Clone)]
pub struct Instance {
    /// The generator's center `g`.
    pub center: Vec<f64>,
    /// What the server should recover: the clients' arithmetic mean, or for
    /// the sphere its unit direction.
    pub target: MeanTarget,
    pub clients: Vec<ClientVector>,
    /// A valid a-priori ℓ∞ bound when the generator implies one
    /// (hypercube: `B + Δ∞`).
    pub linf_bound: Option<f64>,
}

impl Instance {
    pub fn rows(&self) -> Vec<&[f64]> {
        self.clients.iter().map(|c| c.values.as_slice()).collect()
    }

    /// Sizes and bounds for `init`: data maxima, replaced by the
    /// generator's own bound where it has one.
    pub fn problem(&self) -> Result<Problem> {
        let mut p = Problem::from_rows(&self.rows())?;
        if let Some(b) = self.linf_bound {
            p.linf_bound = b;
        }
        Ok(p)
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.m == 0 {
            return Err(DmeError::param("generator needs d, m >= 1"));
        }
        let ok = match self.kind {
            GeneratorKind::Gaussian | GeneratorKind::Hypercube => (0.0..=100.0).contains(&self.dissim),
            GeneratorKind::Sphere => self.dissim > 0.0 && self.dissim < 0.5,
        };
        if !ok {
            return Err(DmeError::param(format!("dissimilarity {} out of range for {:?}", self.dissim, self.kind)));
        }
        if self.kind == GeneratorKind::Sphere && self.d < 2 {
            return Err(DmeError::param("sphere generator needs d >= 2"));
        }
        if self.kind != GeneratorKind::Sphere && !(self.center_scale > 0.0 && self.center_scale.is_finite()) {
            return Err(DmeError::param("center_scale must be positive"));
        }
        Ok(())
    }

    /// Draw an instance. The random draws do not depend on `dissim`, so
    /// instances at different dissimilarities from the same stream are
    /// coupled (common random numbers).
    pub fn generate(&self, rng: &mut StreamRng) -> Result<Instance> {
        self.validate()?;
        match self.kind {
            GeneratorKind::Gaussian => gen_gaussian(self, rng),
            GeneratorKind::Hypercube => gen_hypercube(self, rng),
            GeneratorKind::Sphere => gen_sphere(self, rng),
        }
    }
}

fn finish(center: Vec<f64>, rows: Vec<Vec<f64>>, unit: bool, linf_bound: Option<f64>) -> Result<Instance> {
    let clients = clients_from_rows(rows)?;
    let target = if unit { MeanTarget::unit_direction(&clients)? } else { MeanTarget::arithmetic(&clients)? };
    Ok(Instance { center, target, clients, linf_bound })
}

pub fn gen_gaussian(spec: &GeneratorSpec, rng: &mut StreamRng) -> Result<Instance> {
    let g = scaled(&random_unit(spec.d, rng), spec.center_scale);
    let rows = (0..spec.m)
        .map(|_| g.iter().map(|c| c + spec.dissim * Distribution::<f64>::sample(&StandardNormal, rng)).collect())
        .collect();
    finish(g, rows, false, None)
}

pub fn gen_hypercube(spec: &GeneratorSpec, rng: &mut StreamRng) -> Result<Instance> {
    let b = spec.center_scale;
    let g: Vec<f64> = (0..spec.d).map(|_| b * (2.0 * rng.random::<f64>() - 1.0)).collect();
    let rows = (0..spec.m)
        .map(|_| g.iter().map(|c| c + spec.dissim * (2.0 * rng.random::<f64>() - 1.0)).collect())
        .collect();
    finish(g, rows, false, Some(b + spec.dissim))
}

pub fn gen_sphere(spec: &GeneratorSpec, rng: &mut StreamRng) -> Result<Instance> {
    let g = random_unit(spec.d, rng);
    let (c, s) = ((PI * spec.dissim).cos(), (PI * spec.dissim).sin());
    let rows = (0..spec.m)
        .map(|_| {
            // Uniform on the unit sphere of g's orthogonal complement.
            let u = loop {
                let mut v = random_unit(spec.d, rng);
                axpy(-dot(&v, &g), &g, &mut v);
                if let Some(u) = crate::vector::normalized(&v) {
                    break u;
                }
            };
            let mut gi = scaled(&g, c);
            axpy(s, &u, &mut gi);
            gi
        })
        .collect();
    finish(g, rows, true, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissimilarity::dissimilarity;
    use crate::rng::{Purpose, RngStream};
    use crate::vector::{norm, norm_inf};

    fn rng(seed: u64) -> StreamRng {
        RngStream::new(seed).stream(0, 0, Purpose::Generator)
    }

    fn spec(kind: GeneratorKind, d: usize, m: usize, dissim: f64) -> GeneratorSpec {
        GeneratorSpec { kind, d, m, center_scale: 100.0, dissim }
    }

    #[test]
    fn gaussian_center_norm_and_spread() {
        let inst = spec(GeneratorKind::Gaussian, 512, 100, 1.0).generate(&mut rng(1)).unwrap();
        assert!((norm(&inst.center) - 100.0).abs() < 1e-10);
        let spread: f64 = inst.clients.iter().map(|c| crate::vector::dist_sq(&c.values, &inst.center)).sum::<f64>() / 100.0;
        assert!((spread / 512.0 - 1.0).abs() < 0.15, "{spread}");
    }

    #[test]
    fn zero_dissimilarity_means_identical_clients() {
        let inst = spec(GeneratorKind::Gaussian, 16, 5, 0.0).generate(&mut rng(2)).unwrap();
        let r = dissimilarity(&inst.clients).unwrap();
        assert_eq!((r.delta2, r.delta2_max, r.delta_inf, r.delta_inf_max), (0.0, 0.0, 0.0, 0.0));
        let cube = spec(GeneratorKind::Hypercube, 16, 5, 0.0).generate(&mut rng(2)).unwrap();
        assert!(cube.clients.iter().all(|c| c.values == cube.center));
    }

    #[test]
    fn hypercube_bounds() {
        let inst = spec(GeneratorKind::Hypercube, 64, 50, 3.0).generate(&mut rng(3)).unwrap();
        assert!(inst.clients.iter().all(|c| norm_inf(&c.values) <= 103.0));
        assert_eq!(inst.linf_bound, Some(103.0));
        assert_eq!(inst.problem().unwrap().linf_bound, 103.0);
    }

    #[test]
    fn sphere_angles_are_exact() {
        for delta in [0.01, 0.2, 0.45] {
            let inst = spec(GeneratorKind::Sphere, 32, 40, delta).generate(&mut rng(4)).unwrap();
            for c in &inst.clients {
                assert!((dot(&c.values, &inst.center) - (PI * delta).cos()).abs() < 1e-12);
                assert!((norm(&c.values) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ranges_are_validated() {
        assert!(spec(GeneratorKind::Sphere, 8, 2, 0.5).generate(&mut rng(0)).is_err());
        assert!(spec(GeneratorKind::Sphere, 1, 2, 0.1).generate(&mut rng(0)).is_err());
        assert!(spec(GeneratorKind::Gaussian, 8, 2, 101.0).generate(&mut rng(0)).is_err());
    }

    #[test]
    fn draws_are_coupled_across_dissimilarity() {
        let a = spec(GeneratorKind::Gaussian, 8, 3, 0.5).generate(&mut rng(7)).unwrap();
        let b = spec(GeneratorKind::Gaussian, 8, 3, 1.0).generate(&mut rng(7)).unwrap();
        assert_eq!(a.center, b.center);
        for (x, y) in a.clients.iter().zip(&b.clients) {
            for ((p, q), c) in x.values.iter().zip(&y.values).zip(&a.center) {
                assert!(((q - c) - 2.0 * (p - c)).abs() < 1e-9);
            }
        }
    }
}
