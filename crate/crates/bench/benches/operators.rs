use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use tachibana_core::forms::FormField;
use tachibana_core::geometry::make_round_sphere;
use tachibana_core::operators::{tachibana_laplacian, weitzenbock_term, Route, DEFAULT_ORDER};
use tachibana_core::samples::random_form;
use tachibana_core::spectral::{compute_numbers, DEFAULT_TOL};

fn spectral(c: &mut Criterion) {
    c.bench_function("numbers T^4 r=2 B=2", |b| {
        b.iter(|| compute_numbers(black_box(4), 2, 2, DEFAULT_TOL).unwrap())
    });
    c.bench_function("numbers T^3 r=1 B=3", |b| {
        b.iter(|| compute_numbers(black_box(3), 1, 3, DEFAULT_TOL).unwrap())
    });
}

fn pointwise(c: &mut Criterion) {
    let chart = make_round_sphere(3, 1.0).unwrap();
    let w = random_form(3, 1, 1).unwrap();
    let p = [0.1, -0.2, 0.3];
    c.bench_function("local geometry S^3", |b| {
        b.iter(|| chart.local(black_box(&p), DEFAULT_ORDER).unwrap())
    });
    let geo = chart.local(&p, DEFAULT_ORDER).unwrap();
    c.bench_function("form jet S^3 r=1", |b| {
        b.iter(|| w.jet_at(black_box(&geo)).unwrap())
    });
    let jet = w.jet_at(&geo).unwrap();
    c.bench_function("curvature term S^3 r=1", |b| {
        b.iter(|| weitzenbock_term(black_box(&jet), &geo).unwrap())
    });
    c.bench_function("tachibana laplacian S^3 r=1", |b| {
        b.iter(|| tachibana_laplacian(black_box(&jet), &geo, Route::Rough).unwrap())
    });
}

criterion_group!(benches, spectral, pointwise);
criterion_main!(benches);
