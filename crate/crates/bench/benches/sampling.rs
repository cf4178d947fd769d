use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use tierflow::dataset::{NegativeSampler, PairSet};
use tierflow::RngStream;

fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Sampler over an `n x n` grid with every seventh pair marked positive.
fn sampler(n: usize) -> NegativeSampler {
    let (c, p) = (ids("c", n), ids("p", n));
    let positives: PairSet = (0..n * n)
        .filter(|k| k % 7 == 0)
        .map(|k| (c[k / n].clone(), p[k % n].clone()))
        .collect();
    NegativeSampler::new(&c, &p, &positives).expect("valid ids")
}

fn sample(c: &mut Criterion) {
    let s = sampler(300);
    let available = s.complement_size();
    let mut group = c.benchmark_group("negative_sampling");
    // Sparse requests take the rejection path, dense ones enumerate the complement.
    for (label, count) in [("rejection", 5_000), ("enumeration", available * 3 / 4)] {
        group.bench_with_input(BenchmarkId::new(label, count), &count, |b, &count| {
            let mut rng = RngStream::new(9);
            b.iter(|| black_box(s.sample(count, &mut rng).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, sample);
criterion_main!(benches);
