use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use hecke_core::arith_core::{CongruenceLevel, PElement};
use hecke_core::dseries_kernel::{conjugate_ball_sum, sum_over_coset, QuadratureSpec, Weight};
use hecke_core::hecke_assembly::{build_basis, hecke_block_matrix};
use hecke_core::par;

fn paths() -> [(&'static str, bool); 2] {
    [("sequential", true), ("parallel", false)]
}

fn bench_coset_sum(c: &mut Criterion) {
    let q = QuadratureSpec::default();
    let n = Weight::new(12).unwrap();
    let level = CongruenceLevel::gamma(2);
    let e = PElement::identity(2);
    let mut g = c.benchmark_group("sum_over_coset");
    g.sample_size(10);
    for (name, seq) in paths() {
        g.bench_with_input(BenchmarkId::new(name, 20), &20u64, |b, &h| {
            par::force_sequential(seq);
            b.iter(|| sum_over_coset(n, &level, &e, black_box(h), &q).unwrap());
        });
    }
    par::force_sequential(false);
    g.finish();
}

fn bench_ball_sum(c: &mut Criterion) {
    let q = QuadratureSpec::default();
    let n = Weight::new(12).unwrap();
    let s = PElement::diag(2, 1, 2).unwrap();
    let mut g = c.benchmark_group("conjugate_ball_sum");
    g.sample_size(10);
    for (name, seq) in paths() {
        g.bench_with_input(BenchmarkId::new(name, 10), &10u64, |b, &h| {
            par::force_sequential(seq);
            b.iter(|| conjugate_ball_sum(n, &s, black_box(h), &q).unwrap());
        });
    }
    par::force_sequential(false);
    g.finish();
}

fn bench_block_matrix(c: &mut Criterion) {
    let q = QuadratureSpec::default();
    let n = Weight::new(12).unwrap();
    let basis = build_basis(n, 16, &q).unwrap();
    let level = CongruenceLevel::gamma(2);
    let s = PElement::diag(2, 1, 2).unwrap();
    let mut g = c.benchmark_group("hecke_block_matrix");
    g.sample_size(10);
    for (name, seq) in paths() {
        g.bench_with_input(BenchmarkId::new(name, 6), &6u64, |b, &h| {
            par::force_sequential(seq);
            b.iter(|| hecke_block_matrix(&level, &s, black_box(h), &basis, &q).unwrap());
        });
    }
    par::force_sequential(false);
    g.finish();
}

criterion_group!(benches, bench_coset_sum, bench_ball_sum, bench_block_matrix);
criterion_main!(benches);
