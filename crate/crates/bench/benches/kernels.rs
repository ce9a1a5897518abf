use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use crlab_core::asymptotics::{i_integral, j_integral};
use crlab_core::catalog::{hexagonal_torus, whitney_sphere};
use crlab_core::functionals::energies;
use crlab_core::integration::{volume, SampledSurface};
use crlab_core::moebius::{normalize_at_point, psi_b_raw};
use crlab_core::{build_grid, fundamental_data, AmbientVector, MoebiusParam};

fn oblique(s: f64) -> MoebiusParam {
    let r = s / 2f64.sqrt();
    MoebiusParam::from_coords(vec![r, 0.0, 0.0, r, 0.0, 0.0]).unwrap()
}

fn quadrature(c: &mut Criterion) {
    let torus = hexagonal_torus(2).unwrap();
    let mut g = c.benchmark_group("torus_volume");
    for res in [32, 64, 128] {
        let grid = build_grid(&torus, Some(res)).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(res), &grid, |b, grid| {
            b.iter(|| volume(black_box(&torus), grid).unwrap())
        });
    }
    g.finish();

    // the cr-volume objective: one weighted volume on a cached sample
    let sphere = whitney_sphere(2, 2, &oblique(0.4)).unwrap();
    let sample = SampledSurface::new(&sphere, &build_grid(&sphere, None).unwrap()).unwrap();
    let b = [0.1, -0.05, 0.2, 0.0, 0.03, -0.1];
    c.bench_function("weighted_volume_48x64", |bench| bench.iter(|| sample.weighted_volume(black_box(&b))));

    let grid = build_grid(&sphere, Some(32)).unwrap();
    c.bench_function("energies_whitney_32", |bench| bench.iter(|| energies(black_box(&sphere), &grid, Some(0)).unwrap()));
}

fn pointwise(c: &mut Criterion) {
    let sphere = whitney_sphere(2, 2, &oblique(0.4)).unwrap();
    c.bench_function("fundamental_data_whitney", |b| b.iter(|| fundamental_data(black_box(&sphere), &[0.8, 1.3]).unwrap()));
    c.bench_function("normalize_at_point", |b| b.iter(|| normalize_at_point(black_box(&sphere), &[0.8, 1.3]).unwrap()));

    let beta = oblique(0.6);
    let z = AmbientVector::from_coords(vec![0.5, 0.5, 0.5, 0.5, 0.0, 0.0]).unwrap();
    c.bench_function("psi_b", |b| b.iter(|| psi_b_raw(black_box(&beta), black_box(&z))));
}

fn special_integrals(c: &mut Criterion) {
    c.bench_function("j_integral_6_9", |b| b.iter(|| j_integral(black_box(6), 9, 1e3, 0.7).unwrap()));
    c.bench_function("i_integral_4_5", |b| b.iter(|| i_integral(black_box(4), 5, 1e-3, 0.2).unwrap()));
}

criterion_group!(benches, quadrature, pointwise, special_integrals);
criterion_main!(benches);
