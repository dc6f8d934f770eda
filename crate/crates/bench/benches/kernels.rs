use std::hint::black_box;

use callias_core::bvp::{aps_condition, assemble_bvp, compute_index, IndexOptions, IndexRoute, Side};
use callias_core::flow_eta::{default_cobordism, relative_eta_heat, spectral_flow, FamilySpec, FlowMethod, HeatOptions};
use callias_core::spectral::{eigendecompose, eigendecompose_window, DenseEigensolver};
use callias_bench::bowl;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn spectra(c: &mut Criterion) {
    let mut g = c.benchmark_group("spectrum");
    g.sample_size(10);
    for n in [8usize, 16] {
        let op = bowl(n, 4.0, 0.0);
        g.bench_with_input(BenchmarkId::new("dense", n), &op, |b, op| b.iter(|| eigendecompose(black_box(op)).unwrap()));
    }
    for n in [32usize, 48] {
        let op = bowl(n, 4.0, 0.0);
        g.bench_with_input(BenchmarkId::new("window5", n), &op, |b, op| {
            b.iter(|| eigendecompose_window(black_box(op), 5, Default::default()).unwrap())
        });
    }
    g.finish();
}

fn indices(c: &mut Criterion) {
    let mut g = c.benchmark_group("aps_index");
    g.sample_size(10);
    let (a0, a1) = (bowl(8, 3.0, -0.5), bowl(8, 3.0, 0.5));
    let d = default_cobordism(&a0, &a1, 9).unwrap();
    let b0 = aps_condition(&eigendecompose(&a0).unwrap(), 0.0, Side::Left).unwrap();
    let b1 = aps_condition(&eigendecompose(&a1).unwrap(), 0.0, Side::Right).unwrap();
    let problem = assemble_bvp(&d, &b0, &b1).unwrap();
    for route in [IndexRoute::Dense, IndexRoute::Transfer] {
        let opts = IndexOptions {
            route,
            ..IndexOptions::default()
        };
        g.bench_function(format!("{route:?}"), |b| b.iter(|| compute_index(black_box(&problem), &opts).unwrap()));
    }
    g.finish();
}

fn flows(c: &mut Criterion) {
    let mut g = c.benchmark_group("flow");
    g.sample_size(10);
    let f = FamilySpec::linear(&bowl(6, 2.0, -1.0), &bowl(6, 2.0, 1.0), 16).unwrap();
    for method in [FlowMethod::CrossingCount, FlowMethod::DaiZhang] {
        g.bench_function(format!("{method:?}"), |b| {
            b.iter(|| spectral_flow(black_box(&f), method, &DenseEigensolver).unwrap())
        });
    }
    let (s0, s1) = (eigendecompose(&bowl(10, 3.0, -0.4)).unwrap(), eigendecompose(&bowl(10, 3.0, 0.4)).unwrap());
    g.bench_function("heat_route", |b| {
        b.iter(|| relative_eta_heat(black_box(&s0), black_box(&s1), HeatOptions::default()).unwrap())
    });
    g.finish();
}

criterion_group!(benches, spectra, indices, flows);
criterion_main!(benches);
