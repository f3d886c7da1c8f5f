use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fde_decay::{integrate, DelaySpec, EquationKind, History, NonlinearitySpec, ProblemSpec, SolverConfig, Trajectory};

fn problem(delay: DelaySpec, kind: EquationKind) -> ProblemSpec {
    ProblemSpec::new(
        2.0,
        1.0,
        NonlinearitySpec::power_law(2.0),
        delay,
        History::constant(1.0),
    )
    .with_kind(kind)
}

fn integrate_to(c: &mut Criterion) {
    let mut group = c.benchmark_group("integrate");
    group.sample_size(10);
    let cases = [
        ("sublinear", DelaySpec::sublinear(0.5, 1.0).unwrap(), 1e5),
        ("pantograph", DelaySpec::proportional(0.75).unwrap(), 1e6),
        ("power_gap", DelaySpec::power_gap(0.5, 1.0).unwrap(), 1e5),
    ];
    for (name, delay, t_end) in cases {
        for kind in [EquationKind::DiscreteDelay, EquationKind::MaxFunctional] {
            let p = problem(delay.clone(), kind);
            let cfg = SolverConfig::default().with_t_end(t_end).with_pruning();
            group.bench_with_input(BenchmarkId::new(name, format!("{kind:?}")), &p, |b, p| {
                b.iter(|| integrate(p, &cfg).unwrap().len())
            });
        }
    }
    group.finish();
}

fn dense_queries(c: &mut Criterion) {
    let p = problem(DelaySpec::proportional(0.75).unwrap(), EquationKind::DiscreteDelay);
    let tr: Trajectory = integrate(&p, &SolverConfig::default().with_t_end(1e5)).unwrap();
    let g = NonlinearitySpec::power_law(2.0);
    c.bench_function("interpolate", |b| {
        let mut t = 1.0;
        b.iter(|| {
            t = if t > 9e4 { 1.0 } else { t * 1.001 };
            tr.interpolate(t).unwrap()
        })
    });
    c.bench_function("window_max_g", |b| {
        let mut t = 10.0;
        b.iter(|| {
            t = if t > 9e4 { 10.0 } else { t * 1.001 };
            tr.window_max_g(0.25 * t, t, &g).unwrap()
        })
    });
}

criterion_group!(benches, integrate_to, dense_queries);
criterion_main!(benches);
