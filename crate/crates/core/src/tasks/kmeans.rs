//! Distributed Lloyd iterations: every cluster center is the DME estimate
//! of the clients' local cluster means.

use super::dataset::ShardedDataset;
use super::driver::DmeDriver;
use crate::error::{DmeError, Result};
use crate::rng::StreamRng;
use crate::vector::dist_sq;
use rand::Rng;

/// Index of the nearest center (ties to the smallest index) and the
/// squared distance to it.
pub fn nearest(x: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    centers
        .iter()
        .enumerate()
        .map(|(c, ctr)| (c, dist_sq(x, ctr)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// Σ over all examples of the squared distance to the nearest center.
pub fn kmeans_cost(centers: &[Vec<f64>], data: &ShardedDataset) -> f64 {
    data.shards.iter().flat_map(|s| &s.features).map(|x| nearest(x, centers).1).sum()
}

/// k-means++ seeding on one set of points.
pub fn kmeans_pp_seed(points: &[Vec<f64>], k: usize, rng: &mut StreamRng) -> Result<Vec<Vec<f64>>> {
    if k == 0 || points.len() < k {
        return Err(DmeError::param(format!("cannot seed {k} centers from {} points", points.len())));
    }
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|x| dist_sq(x, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            d2.iter().position(|&w| {
                u -= w;
                u < 0.0
            })
            .unwrap_or(points.len() - 1)
        } else {
            rng.random_range(0..points.len())
        };
        centers.push(points[pick].clone());
        let last = centers.last().expect("nonempty");
        d2.iter_mut().zip(points).for_each(|(w, x)| *w = w.min(dist_sq(x, last)));
    }
    Ok(centers)
}

/// Per-client local means for every cluster; an empty local cluster
/// reports the current center. Also returns, per cluster, whether any
/// client had points in it.
pub fn local_means(centers: &[Vec<f64>], data: &ShardedDataset) -> (Vec<Vec<Vec<f64>>>, Vec<bool>) {
    let (k, d) = (centers.len(), data.feature_dim);
    let mut occupied = vec![false; k];
    let means = data
        .shards
        .iter()
        .map(|s| {
            let mut sums = vec![vec![0.0; d]; k];
            let mut counts = vec![0usize; k];
            for x in &s.features {
                let (c, _) = nearest(x, centers);
                counts[c] += 1;
                sums[c].iter_mut().zip(x).for_each(|(a, b)| *a += b);
            }
            (0..k)
                .map(|c| {
                    if counts[c] == 0 {
                        centers[c].clone()
                    } else {
                        occupied[c] = true;
                        sums[c].iter().map(|v| v / counts[c] as f64).collect()
                    }
                })
                .collect()
        })
        .collect();
    (means, occupied)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansStep {
    pub centers: Vec<Vec<f64>>,
    /// Global cost of the new centers.
    pub cost: f64,
}

/// One Lloyd round with one DME call per cluster. A cluster empty on every
/// client keeps its center and sends nothing.
pub fn kmeans_round(centers: &[Vec<f64>], data: &ShardedDataset, dme: &mut DmeDriver) -> Result<KMeansStep> {
    let (means, occupied) = local_means(centers, data);
    let mut next = Vec::with_capacity(centers.len());
    for (c, center) in centers.iter().enumerate() {
        if !occupied[c] {
            next.push(center.clone());
            continue;
        }
        let rows: Vec<&[f64]> = means.iter().map(|mi| mi[c].as_slice()).collect();
        next.push(dme.aggregate(&rows)?.estimate.values);
    }
    let cost = kmeans_cost(&next, data);
    Ok(KMeansStep { centers: next, cost })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansTrace {
    /// `centers[0]` is the seeding, then one entry per round.
    pub centers: Vec<Vec<Vec<f64>>>,
    pub costs: Vec<f64>,
}

/// Seed on shard `seed_shard` with k-means++ and run `iterations` rounds.
pub fn kmeans(
    data: &ShardedDataset,
    n_clusters: usize,
    iterations: usize,
    seed_shard: usize,
    dme: &mut DmeDriver,
    rng: &mut StreamRng,
) -> Result<KMeansTrace> {
    let shard = data.shards.get(seed_shard).ok_or_else(|| DmeError::param("seed shard out of range"))?;
    let init = kmeans_pp_seed(&shard.features, n_clusters, rng)?;
    let mut trace = KMeansTrace { costs: vec![kmeans_cost(&init, data)], centers: vec![init] };
    for _ in 0..iterations {
        let step = kmeans_round(trace.centers.last().expect("seeded"), data, dme)?;
        trace.costs.push(step.cost);
        trace.centers.push(step.centers);
    }
    Ok(trace)
}
