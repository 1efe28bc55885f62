use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use markmle::limits::examples::{example_info, example_model};
use markmle::limits::{EvaluationWindow, LimitEngine};
use markmle::repaired::{discretize_marks, fit_cr_mle, EmConfig, MarkGrid};
use markmle::{fit, maximal_intersections, order_dataset, QuadratureConfig};
use markmle_bench::fixture;

fn product_limit(c: &mut Criterion) {
    let mut g = c.benchmark_group("product_limit");
    for n in [1_000, 10_000, 100_000] {
        let data = fixture(2, n);
        g.bench_with_input(BenchmarkId::new("fit", n), &data, |b, d| {
            b.iter(|| fit(&order_dataset(black_box(d)).unwrap()).unwrap())
        });
        let ord = order_dataset(&data).unwrap();
        g.bench_with_input(BenchmarkId::new("maximal_intersections", n), &ord, |b, o| {
            b.iter(|| maximal_intersections(black_box(o)))
        });
    }
    g.finish();
}

fn repaired(c: &mut Criterion) {
    let mut g = c.benchmark_group("repaired");
    g.sample_size(10);
    let grid = MarkGrid::equidistant(0.0, 4.0, 20).unwrap();
    for n in [1_000, 5_000] {
        let data = discretize_marks(&fixture(2, n), &grid);
        g.bench_with_input(BenchmarkId::new("em", n), &data, |b, d| {
            b.iter(|| fit_cr_mle(black_box(d), &EmConfig::default()).unwrap())
        });
    }
    g.finish();
}

fn limits(c: &mut Criterion) {
    let cfg = QuadratureConfig::default();
    let mut g = c.benchmark_group("limit_marginal");
    g.sample_size(10);
    for id in 1..=4u8 {
        let model = example_model(id).unwrap();
        let tau = example_info(id).unwrap().tau;
        g.bench_function(BenchmarkId::from_parameter(id), |b| {
            b.iter(|| {
                let window = EvaluationWindow::with_step(&model, tau, 0.02, &cfg).unwrap();
                let engine = LimitEngine::new(&model, &window, &cfg).unwrap();
                engine.marginal(window.grid()).unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, product_limit, repaired, limits);
criterion_main!(benches);
