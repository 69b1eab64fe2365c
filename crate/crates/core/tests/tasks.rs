use approx::assert_relative_eq;
use dme_core::compressors::{HadamardMultiDim, Identity, OneBit};
use dme_core::harness::median;
use dme_core::sparc::SparseReg;
use dme_core::tasks::*;
use dme_core::vector::{dot, norm};
use dme_core::{Compressor, Purpose, RngStream, StreamRng};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use std::sync::Arc;

fn rng(seed: u64, purpose: Purpose) -> StreamRng {
    RngStream::new(seed).stream(0, 0, purpose)
}

fn identity_driver(seed: u64) -> DmeDriver {
    DmeDriver::new(Arc::new(Identity), RngStream::new(seed), 0)
}

fn driver(c: impl Compressor + 'static, seed: u64) -> DmeDriver {
    DmeDriver::new(Arc::new(c), RngStream::new(seed), 0)
}

fn shard(points: &[[f64; 2]]) -> Shard {
    Shard { features: points.iter().map(|p| p.to_vec()).collect(), labels: vec![0.0; points.len()] }
}

fn top_eigenvalue(c: &[Vec<f64>]) -> f64 {
    let d = c.len();
    let m = DMatrix::from_fn(d, d, |a, b| c[a][b]);
    SymmetricEigen::new(m).eigenvalues.max()
}

/// Plain single-machine Lloyd on pooled points, written independently.
fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>, rounds: usize) -> Vec<Vec<Vec<f64>>> {
    let mut out = vec![centers.clone()];
    for _ in 0..rounds {
        let k = centers.len();
        let mut sums = vec![vec![0.0; points[0].len()]; k];
        let mut counts = vec![0.0; k];
        for p in points {
            let mut best = 0;
            for c in 1..k {
                let dc: f64 = p.iter().zip(&centers[c]).map(|(a, b)| (a - b) * (a - b)).sum();
                let db: f64 = p.iter().zip(&centers[best]).map(|(a, b)| (a - b) * (a - b)).sum();
                if dc < db {
                    best = c;
                }
            }
            counts[best] += 1.0;
            sums[best].iter_mut().zip(p).for_each(|(s, x)| *s += x);
        }
        for c in 0..k {
            if counts[c] > 0.0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c]).collect();
            }
        }
        out.push(centers.clone());
    }
    out
}

fn assert_trajectories_match(a: &[Vec<f64>], b: &[Vec<f64>], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        for (p, q) in x.iter().zip(y) {
            assert!((p - q).abs() <= tol, "{p} vs {q}");
        }
    }
}

#[test]
fn kmeans_identity_matches_lloyd_on_balanced_toy() {
    // Every shard holds one point of each cluster, so the average of local
    // means is the pooled centroid and the protocol is plain Lloyd.
    let data = ShardedDataset::new(vec![
        shard(&[[0.0, 0.0], [10.0, 10.0]]),
        shard(&[[1.0, 0.5], [11.0, 9.0]]),
        shard(&[[-0.5, 1.0], [9.5, 10.5]]),
    ])
    .unwrap();
    let init = vec![vec![2.0, 2.0], vec![8.0, 7.0]];
    let reference = lloyd(&data.pooled().features, init.clone(), 4);
    let mut dme = identity_driver(1);
    let mut centers = init;
    for want in &reference[1..] {
        centers = kmeans_round(&centers, &data, &mut dme).unwrap().centers;
        assert_trajectories_match(&centers, want, 1e-10);
    }
}

#[test]
fn kmeans_single_client_is_single_machine_lloyd() {
    let data = gen_gaussian_clusters(1, 4, 200, 3, 6.0, &mut rng(2, Purpose::Dataset)).unwrap();
    let trace = kmeans(&data, 3, 10, 0, &mut identity_driver(2), &mut rng(2, Purpose::Task)).unwrap();
    let reference = lloyd(&data.shards[0].features, trace.centers[0].clone(), 10);
    for (got, want) in trace.centers.iter().zip(&reference) {
        assert_trajectories_match(got, want, 1e-10);
    }
    assert!(trace.costs.windows(2).all(|w| w[1] <= w[0] + 1e-9));
}

#[test]
fn kmeans_empty_local_cluster_reuses_center() {
    let data = ShardedDataset::new(vec![shard(&[[0.0, 0.0]]), shard(&[[10.0, 0.0]])]).unwrap();
    let centers = vec![vec![0.0, 0.0], vec![10.0, 0.0]];
    // Client 0 sees cluster 1 empty and reports (10, 0); client 1 likewise.
    let step = kmeans_round(&centers, &data, &mut identity_driver(0)).unwrap();
    assert_eq!(step.centers, centers);
    // A cluster empty everywhere stays put and costs no DME round.
    let far = vec![vec![0.0, 0.0], vec![10.0, 0.0], vec![100.0, 100.0]];
    let mut dme = identity_driver(0);
    let step = kmeans_round(&far, &data, &mut dme).unwrap();
    assert_eq!(step.centers[2], vec![100.0, 100.0]);
    assert_eq!(dme.rounds(), 2);
}

#[test]
fn kmeans_hadamard_close_to_uncompressed() {
    let mut ratios = Vec::new();
    for seed in 0..5 {
        let data = gen_gaussian_clusters(20, 16, 100, 3, 8.0, &mut rng(seed, Purpose::Dataset)).unwrap();
        let exact = kmeans(&data, 3, 20, 0, &mut identity_driver(seed), &mut rng(seed, Purpose::Task)).unwrap();
        let hmd = dme_core::compressors::Repetition::new(Arc::new(HadamardMultiDim::default()), 10).unwrap();
        let comp = kmeans(&data, 3, 20, 0, &mut driver(hmd, seed), &mut rng(seed, Purpose::Task)).unwrap();
        ratios.push(comp.costs.last().unwrap() / exact.costs.last().unwrap());
    }
    let med = median(&ratios).unwrap();
    assert!(med <= 1.10, "median cost ratio {med}");
}

#[test]
fn power_iteration_rank_one_in_one_step() {
    let u = [0.6, 0.8];
    let pts: Vec<[f64; 2]> = [1.0, -2.0, 3.0, 0.5].iter().map(|s| [s * u[0], s * u[1]]).collect();
    let data = ShardedDataset::new(vec![shard(&pts[..2]), shard(&pts[2..])]).unwrap();
    let trace = power_iteration(&data, 1, &mut identity_driver(0), &mut rng(0, Purpose::Task)).unwrap();
    let v = &trace.vectors[1];
    assert_relative_eq!(dot(v, &u).abs(), 1.0, epsilon = 1e-12);
}

#[test]
fn power_iteration_identity_matches_centralized() {
    let (data, _) = gen_spiked(4, 6, 50, 5.0, &mut rng(3, Purpose::Dataset)).unwrap();
    let trace = power_iteration(&data, 15, &mut identity_driver(3), &mut rng(3, Purpose::Task)).unwrap();
    let c = pooled_second_moment(&data);
    let mut v = trace.vectors[0].clone();
    for want in &trace.vectors[1..] {
        let cv: Vec<f64> = c.iter().map(|r| dot(r, &v)).collect();
        let n = norm(&cv);
        v = cv.iter().map(|x| x / n).collect();
        assert_trajectories_match(std::slice::from_ref(want), std::slice::from_ref(&v), 1e-10);
    }
    assert_eq!(trace.restarts, 0);
}

#[test]
fn power_iteration_onebit_reaches_top_eigenvalue() {
    let mut ratios = Vec::new();
    for seed in 0..5 {
        let (data, _) = gen_spiked(20, 16, 200, 5.0, &mut rng(seed, Purpose::Dataset)).unwrap();
        let truth = top_eigenvalue(&pooled_second_moment(&data));
        let trace = power_iteration(&data, 30, &mut driver(OneBit::new(200), seed), &mut rng(seed, Purpose::Task)).unwrap();
        ratios.push(trace.top_eigenvalue() / truth);
    }
    let med = median(&ratios).unwrap();
    assert!(med >= 0.8, "median Rayleigh ratio {med}");
}

#[test]
fn power_iteration_restarts_on_zero_estimate() {
    let data = ShardedDataset::new(vec![shard(&[[0.0, 0.0]])]).unwrap();
    let trace = power_iteration(&data, 3, &mut identity_driver(0), &mut rng(0, Purpose::Task)).unwrap();
    assert_eq!(trace.restarts, 3);
    assert!(trace.vectors.iter().all(|v| (norm(v) - 1.0).abs() < 1e-12));
}

#[test]
fn gradients_match_finite_differences() {
    let mix = gen_mixture_regression(1, 5, 40, 1.0, 0.1, &mut rng(4, Purpose::Dataset)).unwrap();
    let mut sh = mix.dataset.shards[0].clone();
    let scale = 0.01; // keep the logistic margins moderate
    sh.features.iter_mut().for_each(|x| x.iter_mut().for_each(|v| *v *= scale));
    let logistic = Shard { labels: sh.labels.iter().map(|y| if *y >= 0.0 { 1.0 } else { -1.0 }).collect(), ..sh.clone() };
    let mut r = rng(5, Purpose::Task);
    for _ in 0..10 {
        let w: Vec<f64> = dme_core::compressors::onebit::random_unit(5, &mut r).iter().map(|v| v * 30.0).collect();
        for (loss, s) in [(Loss::Squared, &sh), (Loss::Logistic, &logistic)] {
            let g = loss.gradient(&w, s);
            for j in 0..5 {
                let h = 1e-5;
                let (mut wp, mut wm) = (w.clone(), w.clone());
                wp[j] += h;
                wm[j] -= h;
                let fd = (loss.value(&wp, s) - loss.value(&wm, s)) / (2.0 * h);
                assert!((fd - g[j]).abs() <= 1e-6 * g[j].abs().max(1e-3), "{loss:?} j={j}: {fd} vs {}", g[j]);
            }
        }
    }
}

#[test]
fn logistic_gradient_at_zero() {
    let s = Shard { features: vec![vec![1.0, 2.0], vec![-1.0, -2.0], vec![3.0, 0.0], vec![-3.0, 0.0]], labels: vec![1.0, -1.0, -1.0, 1.0] };
    let g = Loss::Logistic.gradient(&[0.0, 0.0], &s);
    let n = s.len() as f64;
    for j in 0..2 {
        let want = -(s.features.iter().zip(&s.labels).map(|(x, y)| y * x[j]).sum::<f64>()) / (2.0 * n);
        assert_relative_eq!(g[j], want, epsilon = 1e-15);
    }
}

#[test]
fn gd_identity_single_client_is_exact_and_monotone() {
    let mix = gen_mixture_regression(1, 4, 100, 0.0, 0.01, &mut rng(6, Purpose::Dataset)).unwrap();
    let cfg = GdConfig { loss: Loss::Squared, iterations: 30, step_size: 0.3 };
    let trace = distributed_gd(&mix.dataset, &cfg, vec![0.0; 4], &mut identity_driver(6), None).unwrap();
    let s = &mix.dataset.shards[0];
    let mut w = vec![0.0; 4];
    for want in &trace.weights[1..] {
        let g = Loss::Squared.gradient(&w, s);
        w = w.iter().zip(&g).map(|(a, b)| a - 0.3 * b).collect();
        assert_trajectories_match(std::slice::from_ref(want), std::slice::from_ref(&w), 1e-10);
    }
    assert!(trace.losses.windows(2).all(|p| p[1] <= p[0]));
}

#[test]
fn gd_identity_matches_centralized_average_gradient() {
    let mix = gen_mixture_regression(5, 6, 50, 1.0, 0.01, &mut rng(7, Purpose::Dataset)).unwrap();
    let cfg = GdConfig { loss: Loss::Squared, iterations: 20, step_size: 0.2 };
    let trace = distributed_gd(&mix.dataset, &cfg, vec![0.0; 6], &mut identity_driver(7), None).unwrap();
    // Equal shard sizes: the mean of local gradients is the pooled gradient.
    let pooled = mix.dataset.pooled();
    let mut w = vec![0.0; 6];
    for want in &trace.weights[1..] {
        let g = Loss::Squared.gradient(&w, &pooled);
        w = w.iter().zip(&g).map(|(a, b)| a - 0.2 * b).collect();
        assert_trajectories_match(std::slice::from_ref(want), std::slice::from_ref(&w), 1e-10);
    }
}

#[test]
fn gd_divergence_is_flagged() {
    let mix = gen_mixture_regression(2, 3, 30, 0.0, 0.0, &mut rng(8, Purpose::Dataset)).unwrap();
    let cfg = GdConfig { loss: Loss::Squared, iterations: 500, step_size: 10.0 };
    let trace = distributed_gd(&mix.dataset, &cfg, vec![0.0; 3], &mut identity_driver(8), None).unwrap();
    assert!(trace.diverged);
    assert!(trace.weights.len() < 501);
}

#[test]
fn ols_on_one_shard_recovers_the_client_model() {
    let mix = gen_mixture_regression(3, 32, 1000, 4.0, 1e-2, &mut rng(9, Purpose::Dataset)).unwrap();
    let s = &mix.dataset.shards[1];
    let x = DMatrix::from_fn(s.len(), 32, |i, j| s.features[i][j]);
    let y = DVector::from_vec(s.labels.clone());
    let w = (x.transpose() * &x).cholesky().unwrap().solve(&(x.transpose() * y));
    let truth = DVector::from_vec(mix.models[1].clone());
    assert!((w - &truth).norm() / truth.norm() <= 0.05);
}

#[test]
fn linreg_sparsereg_close_to_uncompressed() {
    let mut ratios = Vec::new();
    for seed in 0..5 {
        let mix = gen_mixture_regression(20, 32, 1000, 4.0, 1e-2, &mut rng(seed, Purpose::Dataset)).unwrap();
        let test = mix.sample(200, &mut rng(seed, Purpose::Custom(1))).pooled();
        let cfg = GdConfig { loss: Loss::Squared, iterations: 50, step_size: 0.1 };
        let exact = distributed_gd(&mix.dataset, &cfg, vec![0.0; 32], &mut identity_driver(seed), Some(&test)).unwrap();
        let sr = distributed_gd(&mix.dataset, &cfg, vec![0.0; 32], &mut driver(SparseReg::new(16), seed), Some(&test)).unwrap();
        assert!(!sr.diverged);
        ratios.push(sr.test_metric.unwrap() / exact.test_metric.unwrap());
    }
    let med = median(&ratios).unwrap();
    assert!(med <= 2.0, "median test-MSE ratio {med}");
}

#[test]
fn projection_onto_ball() {
    let p = project_ball(&[6.0, 8.0], 5.0);
    assert_relative_eq!(norm(&p), 5.0, epsilon = 1e-12);
    assert_relative_eq!(p[0] / p[1], 0.75, epsilon = 1e-12);
    assert_eq!(project_ball(&[1.0, 1.0], 5.0), vec![1.0, 1.0]);
}

#[test]
fn projected_gd_zero_gradients_keep_w() {
    let w0 = vec![0.3, -0.2, 0.1, 0.0];
    let obj = QuadraticObjective { centers: vec![w0.clone(); 8] };
    let cfg = ProjectedGdConfig { radius: 1.0, grad_bound: 2.0, iterations: 10, section: 4, step_size: None };
    let trace = projected_gd_sparsereg(&obj, &cfg, w0.clone(), RngStream::new(1), 0).unwrap();
    assert!(trace.iterates.iter().all(|w| *w == w0));
    assert_eq!(trace.total_bits, 0);
}

#[test]
fn projected_iterates_stay_in_the_ball() {
    let mut r = rng(10, Purpose::Task);
    let centers: Vec<Vec<f64>> =
        (0..16).map(|_| dme_core::compressors::onebit::random_unit(8, &mut r).iter().map(|v| v * 3.0).collect()).collect();
    let obj = QuadraticObjective { centers };
    let cfg = ProjectedGdConfig { radius: 1.0, grad_bound: 4.0, iterations: 50, section: 4, step_size: Some(0.5) };
    let trace = projected_gd_sparsereg(&obj, &cfg, vec![0.0; 8], RngStream::new(2), 0).unwrap();
    assert!(trace.iterates.iter().all(|w| norm(w) <= 1.0 + 1e-12));
    assert_eq!(trace.clipped_gradients, 0);
    assert_eq!(trace.total_bits, 50 * 16 * 2);
}

#[test]
fn pca_keeps_rank_two_variance() {
    let mut r = rng(11, Purpose::Dataset);
    let a = dme_core::compressors::onebit::random_unit(6, &mut r);
    let b = dme_core::compressors::onebit::random_unit(6, &mut r);
    let mut text = String::from("f0,f1,f2,f3,f4,f5\n");
    let mut rows = Vec::new();
    for i in 0..60 {
        let (s, t) = ((i as f64 * 0.7).sin() * 3.0, (i as f64 * 1.3).cos());
        let row: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 5.0 + s * x + t * y).collect();
        text.push_str(&row.iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(","));
        text.push('\n');
        rows.push(row);
    }
    let data = ingest_csv(text.as_bytes(), None, 3, &mut rng(12, Purpose::Dataset), Some(2)).unwrap();
    assert_eq!(data.feature_dim, 2);
    let total: f64 = {
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..6).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        rows.iter().map(|r| r.iter().zip(&mean).map(|(x, m)| (x - m).powi(2)).sum::<f64>()).sum::<f64>()
    };
    let kept: f64 = data.pooled().features.iter().map(|x| x.iter().map(|v| v * v).sum::<f64>()).sum();
    assert!(kept / total >= 0.999, "{}", kept / total);
}
