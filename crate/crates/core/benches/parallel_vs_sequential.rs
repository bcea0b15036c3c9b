//! Same workloads on a one-thread pool and on the full pool. Build with
//! `--no-default-features` to time the plain-iterator fallback instead.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use hpspec::besov::{besov_norm, BesovIndex};
use hpspec::par::{current_threads, with_threads};
use hpspec::propagators::{solve_constant_parabolic, ConstantParabolicOp};
use hpspec::spectral::{Field, Flavor, GridSpec};
use hpspec::verifier::{verify_product_law, Corpus};

fn pools() -> Vec<(String, Option<usize>)> {
    let full = with_threads(None, current_threads);
    vec![("1-thread".to_string(), Some(1)), (format!("pool-{full}"), None)]
}

fn field_2d(n: usize) -> Field {
    let g = GridSpec::torus(2, n, 2).unwrap();
    Field::from_fn(g, |x, c| (3.0 * x[0] + c as f64).sin() * (5.0 * x[1]).cos() + 0.1 * (17.0 * x[0]).cos())
}

fn besov(c: &mut Criterion) {
    let u = field_2d(256);
    let mut group = c.benchmark_group("besov_norm_256x256");
    for (name, threads) in pools() {
        group.bench_with_input(BenchmarkId::from_parameter(&name), &threads, |b, &t| {
            b.iter(|| with_threads(t, || besov_norm(black_box(&u), BesovIndex::b21(1.0, Flavor::Nonhomogeneous)).unwrap()))
        });
    }
    group.finish();
}

fn heat(c: &mut Criterion) {
    let u = field_2d(128).select(0..1);
    let op = ConstantParabolicOp::heat(2, 1);
    let mut group = c.benchmark_group("heat_trajectory_128x128");
    group.sample_size(10);
    for (name, threads) in pools() {
        group.bench_with_input(BenchmarkId::from_parameter(&name), &threads, |b, &t| {
            b.iter(|| with_threads(t, || solve_constant_parabolic(black_box(&u), &op, 0.1, 21).unwrap()))
        });
    }
    group.finish();
}

fn product_law(c: &mut Criterion) {
    let corpus = Corpus::generate(GridSpec::torus(2, 64, 1).unwrap(), 1, 6).unwrap();
    let mut group = c.benchmark_group("product_law_2d_64");
    group.sample_size(10);
    for (name, threads) in pools() {
        group.bench_with_input(BenchmarkId::from_parameter(&name), &threads, |b, &t| {
            b.iter(|| with_threads(t, || verify_product_law(black_box(&corpus), 0.5).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, besov, heat, product_law);
criterion_main!(benches);
