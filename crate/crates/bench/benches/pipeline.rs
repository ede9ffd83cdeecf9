use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use egosearch::{assign, interleave, score_all, time_sort};
use egosearch_bench::{random_codebook, random_feature_map, random_index, random_partition};

fn scoring(c: &mut Criterion) {
    let mut group = c.benchmark_group("score_all");
    // 2000 images per day, as in a full lifelog day
    for k in [1_000usize, 25_000] {
        let (idx, q) = random_index(7, 2_000, k, 300);
        group.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, _| {
            b.iter(|| score_all(black_box(&idx), black_box(&q)).unwrap())
        });
    }
    group.finish();
}

fn reranking(c: &mut Criterion) {
    let p = random_partition(3, 2_000);
    c.bench_function("time_sort/2000", |b| b.iter(|| time_sort(black_box(&p))));
    c.bench_function("interleave/2000", |b| b.iter(|| interleave(black_box(&p))));
}

fn quantization(c: &mut Criterion) {
    let cb = random_codebook(1, 1_024, 64);
    let fm = random_feature_map(2, 32, 42, 64);
    c.bench_function("assign/32x42x64/k1024", |b| {
        b.iter(|| assign(black_box(&fm), black_box(&cb)).unwrap())
    });
}

criterion_group!(benches, scoring, reranking, quantization);
criterion_main!(benches);
