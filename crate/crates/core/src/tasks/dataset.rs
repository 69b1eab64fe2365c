//! Client-sharded datasets: synthetic generators and CSV ingestion.

use crate::error::{DmeError, Result};
use crate::harness::{GeneratorKind, GeneratorSpec};
use crate::rng::StreamRng;
use crate::vector::{dot, norm, normalized, scaled};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::io::Read;

/// One client's examples.
#[derive(Debug, Clone, PartialEq)]
pub struct Shard {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl Shard {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShardedDataset {
    pub shards: Vec<Shard>,
    pub feature_dim: usize,
}

impl ShardedDataset {
    /// Checks that every shard is nonempty and all features share one
    /// dimension.
    pub fn new(shards: Vec<Shard>) -> Result<Self> {
        let feature_dim = shards
            .first()
            .and_then(|s| s.features.first())
            .map(Vec::len)
            .ok_or_else(|| DmeError::param("dataset needs at least one nonempty shard"))?;
        if feature_dim == 0 {
            return Err(DmeError::param("feature dimension must be >= 1"));
        }
        for (i, s) in shards.iter().enumerate() {
            if s.is_empty() || s.features.len() != s.labels.len() {
                return Err(DmeError::param(format!("shard {i} is empty or has mismatched labels")));
            }
            if let Some(x) = s.features.iter().find(|x| x.len() != feature_dim) {
                return Err(DmeError::Dimension { expected: feature_dim, got: x.len() });
            }
        }
        Ok(ShardedDataset { shards, feature_dim })
    }

    pub fn clients(&self) -> usize {
        self.shards.len()
    }

    /// All examples in one shard (for centralized references).
    pub fn pooled(&self) -> Shard {
        Shard {
            features: self.shards.iter().flat_map(|s| s.features.iter().cloned()).collect(),
            labels: self.shards.iter().flat_map(|s| s.labels.iter().copied()).collect(),
        }
    }
}

fn gaussian_vec(d: usize, rng: &mut StreamRng) -> Vec<f64> {
    (0..d).map(|_| Distribution::<f64>::sample(&StandardNormal, rng)).collect()
}

/// Per-client linear models around a common center, with data drawn from
/// each.
#[derive(Debug, Clone)]
pub struct MixtureRegression {
    pub dataset: ShardedDataset,
    /// Client `i`'s true model `w_i`.
    pub models: Vec<Vec<f64>>,
    /// The common center `w`.
    pub center: Vec<f64>,
    pub noise_var: f64,
}

impl MixtureRegression {
    /// Fresh examples from the same per-client models.
    pub fn sample(&self, n: usize, rng: &mut StreamRng) -> ShardedDataset {
        let shards = self.models.iter().map(|w| regression_shard(w, n, self.noise_var, rng)).collect();
        ShardedDataset::new(shards).expect("n >= 1 and uniform dimension")
    }
}

fn regression_shard(w: &[f64], n: usize, noise_var: f64, rng: &mut StreamRng) -> Shard {
    let sd = noise_var.sqrt();
    let features: Vec<Vec<f64>> = (0..n).map(|_| gaussian_vec(w.len(), rng)).collect();
    let labels = features
        .iter()
        .map(|x| dot(w, x) + sd * Distribution::<f64>::sample(&StandardNormal, rng))
        .collect();
    Shard { features, labels }
}

/// Models from the Gaussian DME generator (`‖w‖₂ = 100`, per-coordinate
/// spread `delta2`), standard normal features, `y = ⟨w_i, x⟩ + N(0, noise_var)`.
pub fn gen_mixture_regression(
    m: usize,
    d: usize,
    n: usize,
    delta2: f64,
    noise_var: f64,
    rng: &mut StreamRng,
) -> Result<MixtureRegression> {
    if n == 0 || noise_var < 0.0 {
        return Err(DmeError::param("need n >= 1 and noise_var >= 0"));
    }
    let spec = GeneratorSpec { kind: GeneratorKind::Gaussian, d, m, center_scale: 100.0, dissim: delta2 };
    let inst = spec.generate(rng)?;
    let models: Vec<Vec<f64>> = inst.clients.into_iter().map(|c| c.values).collect();
    let shards = models.iter().map(|w| regression_shard(w, n, noise_var, rng)).collect();
    Ok(MixtureRegression { dataset: ShardedDataset::new(shards)?, models, center: inst.center, noise_var })
}

/// `k` spherical Gaussian clusters with centers of norm `separation`,
/// `n` points per client; labels are the true cluster ids.
pub fn gen_gaussian_clusters(m: usize, d: usize, n: usize, k: usize, separation: f64, rng: &mut StreamRng) -> Result<ShardedDataset> {
    if k == 0 || n == 0 {
        return Err(DmeError::param("need k, n >= 1"));
    }
    let centers: Vec<Vec<f64>> =
        (0..k).map(|_| scaled(&normalized(&gaussian_vec(d, rng)).unwrap_or_else(|| vec![1.0; d]), separation)).collect();
    let shards = (0..m)
        .map(|_| {
            let labels: Vec<f64> = (0..n).map(|_| rng.random_range(0..k) as f64).collect();
            let features = labels
                .iter()
                .map(|&c| centers[c as usize].iter().zip(gaussian_vec(d, rng)).map(|(a, z)| a + z).collect())
                .collect();
            Shard { features, labels }
        })
        .collect();
    ShardedDataset::new(shards)
}

/// Zero-mean data with covariance `I + (ratio − 1)·u uᵀ` for a random unit
/// `u`, so the top eigenvalue is `ratio` times the rest. Returns `u` too.
pub fn gen_spiked(m: usize, d: usize, n: usize, ratio: f64, rng: &mut StreamRng) -> Result<(ShardedDataset, Vec<f64>)> {
    if !(ratio >= 1.0) || d < 2 || n == 0 {
        return Err(DmeError::param("need ratio >= 1, d >= 2, n >= 1"));
    }
    let u = loop {
        if let Some(u) = normalized(&gaussian_vec(d, rng)) {
            break u;
        }
    };
    let amp = (ratio - 1.0).sqrt();
    let shards = (0..m)
        .map(|_| {
            let features = (0..n)
                .map(|_| {
                    let s: f64 = Distribution::<f64>::sample(&StandardNormal, rng);
                    gaussian_vec(d, rng).iter().zip(&u).map(|(z, ui)| z + amp * s * ui).collect()
                })
                .collect();
            Shard { features, labels: vec![0.0; n] }
        })
        .collect();
    Ok((ShardedDataset::new(shards)?, u))
}

/// Read a numeric CSV with a header row. `label_column` names the label
/// (labels are 0 when absent). Rows are shuffled by `rng` and dealt into
/// `m` near-equal shards (the first `N mod m` get one extra). With
/// `pca_dim`, features are centered and projected onto their top
/// principal directions.
pub fn ingest_csv(
    reader: impl Read,
    label_column: Option<&str>,
    m: usize,
    rng: &mut StreamRng,
    pca_dim: Option<usize>,
) -> Result<ShardedDataset> {
    if m == 0 {
        return Err(DmeError::param("need m >= 1 shards"));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(reader);
    let headers = rdr.headers().map_err(|e| DmeError::Ingest { row: 0, reason: e.to_string() })?.clone();
    let label_idx = match label_column {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| DmeError::Ingest { row: 0, reason: format!("no column named `{name}`") })?,
        ),
        None => None,
    };
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| DmeError::Ingest { row, reason: e.to_string() })?;
        let mut x = Vec::with_capacity(rec.len());
        let mut y = 0.0;
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| DmeError::Ingest {
                row,
                reason: format!("non-numeric cell `{cell}` in column `{}`", headers.get(j).unwrap_or("?")),
            })?;
            if !v.is_finite() {
                return Err(DmeError::Ingest { row, reason: format!("non-finite cell in column {j}") });
            }
            if Some(j) == label_idx {
                y = v;
            } else {
                x.push(v);
            }
        }
        features.push(x);
        labels.push(y);
    }
    let n = labels.len();
    if n < m {
        return Err(DmeError::Ingest { row: n, reason: format!("{n} rows cannot fill {m} shards") });
    }
    if let Some(k) = pca_dim {
        features = pca_project(&features, k, rng)?;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut shards = Vec::with_capacity(m);
    let mut start = 0;
    for i in 0..m {
        let size = n / m + usize::from(i < n % m);
        let idx = &order[start..start + size];
        shards.push(Shard {
            features: idx.iter().map(|&r| features[r].clone()).collect(),
            labels: idx.iter().map(|&r| labels[r]).collect(),
        });
        start += size;
    }
    ShardedDataset::new(shards)
}

/// Center `x` and project onto the top `k` eigenvectors of its covariance,
/// found by power iteration with deflation.
pub fn pca_project(x: &[Vec<f64>], k: usize, rng: &mut StreamRng) -> Result<Vec<Vec<f64>>> {
    let n = x.len();
    let d = x.first().map_or(0, Vec::len);
    if k == 0 || k > d || n == 0 {
        return Err(DmeError::param(format!("PCA dimension {k} must be in 1..={d}")));
    }
    let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let centered: Vec<Vec<f64>> = x.iter().map(|r| r.iter().zip(&mean).map(|(a, b)| a - b).collect()).collect();
    let mut cov = vec![vec![0.0; d]; d];
    for r in &centered {
        for a in 0..d {
            for b in 0..d {
                cov[a][b] += r[a] * r[b] / n as f64;
            }
        }
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut v = normalized(&gaussian_vec(d, rng)).unwrap_or_else(|| vec![1.0 / (d as f64).sqrt(); d]);
        for _ in 0..1000 {
            let mut w: Vec<f64> = cov.iter().map(|row| dot(row, &v)).collect();
            for b in &basis {
                let p = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(wi, bi)| *wi -= p * bi);
            }
            let nw = norm(&w);
            if nw == 0.0 {
                // Remaining variance is zero: any orthogonal direction will do.
                break;
            }
            let next = scaled(&w, 1.0 / nw);
            let moved = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = next;
            if moved < 1e-13 {
                break;
            }
        }
        for b in &basis {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(vi, bi)| *vi -= p * bi);
        }
        basis.push(normalized(&v).unwrap_or(v));
    }
    Ok(centered.iter().map(|r| basis.iter().map(|b| dot(r, b)).collect()).collect())
}
