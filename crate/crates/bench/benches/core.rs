use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use radjump_bench::{mixture, tabulated};
use radjump_core::bounds::Certifier;
use radjump_core::{estimate_c, landau_production, landau_production_mc, self_convolve_rescaled, FunctionalReport};
use std::hint::black_box;

fn functionals(c: &mut Criterion) {
    let mut g = c.benchmark_group("functionals");
    for d in [2usize, 8, 64] {
        let p = mixture(d);
        g.bench_with_input(BenchmarkId::new("mixture", d), &p, |b, p| b.iter(|| FunctionalReport::compute(black_box(p))));
    }
    let t = tabulated(3);
    g.bench_function("tabulated/3", |b| b.iter(|| FunctionalReport::compute(black_box(&t))));
    g.finish();
}

fn convolution(c: &mut Criterion) {
    let mut g = c.benchmark_group("self_convolve");
    g.sample_size(10);
    for d in [2usize, 8] {
        let p = mixture(d);
        g.bench_with_input(BenchmarkId::new("mixture", d), &p, |b, p| b.iter(|| self_convolve_rescaled(black_box(p))));
    }
    let t = tabulated(3);
    g.bench_function("tabulated/3", |b| b.iter(|| self_convolve_rescaled(black_box(&t))));
    g.finish();
}

fn landau(c: &mut Criterion) {
    let mut g = c.benchmark_group("landau");
    g.sample_size(10);
    let p = mixture(5);
    g.bench_function("reduced/5", |b| b.iter(|| landau_production(black_box(&p))));
    g.bench_function("monte_carlo/5/1e5", |b| b.iter(|| landau_production_mc(black_box(&p), 100_000, 7)));
    g.finish();
}

fn certificates(c: &mut Criterion) {
    let mut g = c.benchmark_group("certificates");
    g.sample_size(10);
    let p = mixture(3);
    g.bench_function("regularity/3", |b| b.iter(|| estimate_c(black_box(&p))));
    g.bench_function("fisher_jump/3", |b| {
        b.iter(|| {
            let cert = Certifier::new(black_box(&p)).unwrap();
            cert.fisher_jump(2.0, 1.0)
        })
    });
    g.finish();
}

criterion_group!(benches, functionals, convolution, landau, certificates);
criterion_main!(benches);
