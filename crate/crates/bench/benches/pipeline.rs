use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use osfe_bench::{model, patches, union_cloud};
use osfe_core::cloud::{extract_patch, SpatialIndex};
use osfe_core::net::forward;
use osfe_core::train::predict;

fn knn(c: &mut Criterion) {
    let cloud = union_cloud(20_000);
    let index = SpatialIndex::build(&cloud).unwrap();
    let mut g = c.benchmark_group("knn");
    g.throughput(Throughput::Elements(cloud.len() as u64));
    g.bench_function("build_20k", |b| b.iter(|| SpatialIndex::build(black_box(&cloud)).unwrap()));
    g.bench_function("query_32_all", |b| {
        b.iter(|| (0..cloud.len()).map(|i| index.knn_excluding(i, 32).len()).sum::<usize>())
    });
    g.finish();
}

fn patch(c: &mut Criterion) {
    let cloud = union_cloud(20_000);
    let index = SpatialIndex::build(&cloud).unwrap();
    c.bench_function("extract_patch_k16", |b| {
        let mut i = 0;
        b.iter(|| {
            i = (i + 97) % cloud.len();
            extract_patch(&cloud, &index, black_box(i), 16).unwrap()
        })
    });
}

fn network(c: &mut Criterion) {
    let cloud = union_cloud(5_000);
    let params = model();
    let batch = patches(&cloud, 64);
    let mut g = c.benchmark_group("forward");
    g.throughput(Throughput::Elements(batch.len() as u64));
    g.bench_function("k16_x64", |b| {
        b.iter(|| batch.iter().map(|p| forward(black_box(p), &params).unwrap()).sum::<f64>())
    });
    g.finish();
}

fn throughput(c: &mut Criterion) {
    let cloud = union_cloud(5_000);
    let params = model();
    let mut g = c.benchmark_group("predict");
    g.sample_size(10);
    g.throughput(Throughput::Elements(cloud.len() as u64));
    g.bench_function("5k_points", |b| {
        b.iter_batched(|| cloud.clone(), |cl| predict(&cl, &params, 256).unwrap(), BatchSize::LargeInput)
    });
    g.finish();
}

criterion_group!(benches, knn, patch, network, throughput);
criterion_main!(benches);
