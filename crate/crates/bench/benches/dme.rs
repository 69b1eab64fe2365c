use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use dme_bench::{clients, matched_schemes};
use dme_core::baselines::fwht;
use dme_core::compressors::{init_stream, run_round, Problem, RoundKey};
use dme_core::sparc::gen_codebook;
use dme_core::RngStream;

const D: usize = 512;
// HadamardMultiDim caps m at 52 levels.
const M: usize = 50;

/// One full round (init + parallel encode + decode) per scheme.
fn rounds(c: &mut Criterion) {
    let rows = clients(D, M, 1.0, 1);
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let problem = Problem::from_rows(&refs).unwrap();
    let root = RngStream::new(2);
    let mut group = c.benchmark_group("round");
    group.sample_size(10).throughput(Throughput::Elements((D * M) as u64));
    for cfg in matched_schemes(D, M) {
        let comp = cfg.build(None).unwrap();
        group.bench_function(BenchmarkId::from_parameter(cfg.display_label()), |b| {
            let mut round = 0;
            b.iter(|| {
                let key = RoundKey { trial: 0, round };
                round += 1;
                let state = comp.init(&problem, &mut init_stream(&root, key)).unwrap();
                black_box(run_round(comp.as_ref(), &state, &refs, &root, key).unwrap())
            })
        });
    }
    group.finish();
}

fn transform(c: &mut Criterion) {
    let mut group = c.benchmark_group("fwht");
    for log_d in [9, 12, 16] {
        let d = 1usize << log_d;
        let mut x: Vec<f64> = (0..d).map(|i| (i % 7) as f64 - 3.0).collect();
        group.throughput(Throughput::Elements(d as u64));
        group.bench_function(BenchmarkId::from_parameter(d), |b| b.iter(|| fwht(black_box(&mut x))));
    }
    group.finish();
}

fn codebook(c: &mut Criterion) {
    let mut group = c.benchmark_group("codebook_gen");
    group.sample_size(10);
    for section in [4, 64] {
        group.bench_function(BenchmarkId::new("d512_m50", section), |b| {
            b.iter(|| gen_codebook(M, section, D, black_box(3), usize::MAX).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, rounds, transform, codebook);
criterion_main!(benches);
