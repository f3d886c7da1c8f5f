use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fde_decay::NonlinearitySpec;

fn families() -> Vec<NonlinearitySpec> {
    vec![
        NonlinearitySpec::power_law(2.0),
        NonlinearitySpec::power_log(2.0, 0.5),
        NonlinearitySpec::exp_poly(1.0),
        NonlinearitySpec::double_exp(),
    ]
}

fn evaluation(c: &mut Criterion) {
    let mut group = c.benchmark_group("g");
    for g in families() {
        group.bench_with_input(BenchmarkId::new("g", g.name()), &g, |b, g| b.iter(|| g.g(0.3).unwrap()));
        group.bench_with_input(BenchmarkId::new("big_g", g.name()), &g, |b, g| {
            b.iter(|| g.big_g(0.3).unwrap())
        });
    }
    group.finish();
}

fn inverses(c: &mut Criterion) {
    let mut group = c.benchmark_group("inverse");
    for g in families() {
        group.bench_with_input(BenchmarkId::new("big_g_inverse", g.name()), &g, |b, g| {
            b.iter(|| g.big_g_inverse(1e6).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("gamma1", g.name()), &g, |b, g| {
            b.iter(|| g.gamma1(1e-8).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, evaluation, inverses);
criterion_main!(benches);
