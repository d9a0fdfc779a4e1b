use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use stn_insight::partition::Hierarchy;
use stn_insight::synthetic::{random_dataset, random_points, SyntheticSpec};
use stn_insight::{build_stn, export_graph, extract_all, DistanceMeasure, FitnessSource, GraphFormat};

fn hierarchy(c: &mut Criterion) {
    let mut group = c.benchmark_group("hierarchy");
    for n in [50usize, 200, 500] {
        let points = random_points(1, n, 3);
        group.bench_with_input(BenchmarkId::from_parameter(n), &points, |b, points| {
            b.iter(|| Hierarchy::build(black_box(points), 10.0, 10.0, DistanceMeasure::Euclidean).unwrap())
        });
    }
    group.finish();
}

fn stn_and_features(c: &mut Criterion) {
    let spec = SyntheticSpec {
        algorithms: 5,
        max_trajectories: 10,
        max_steps: 50,
        dimension: 3,
        grid: 8,
        ..SyntheticSpec::default()
    };
    let dataset = random_dataset(3, &spec);
    c.bench_function("build_stn", |b| b.iter(|| build_stn(black_box(&dataset), None).unwrap()));
    let stn = build_stn(&dataset, None).unwrap();
    c.bench_function("extract_all", |b| {
        b.iter(|| extract_all(black_box(&dataset), black_box(&stn), FitnessSource::Best))
    });
    c.bench_function("export_graphml", |b| b.iter(|| export_graph(black_box(&stn), GraphFormat::GraphMl)));
}

criterion_group!(benches, hierarchy, stn_and_features);
criterion_main!(benches);
