use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use tubeflow_core::flow::rhs;
use tubeflow_core::tubegeom::{delta1, delta1_fixed};
use tubeflow_core::{catalog_lookup, BaseDensity, Flow, FlowConfig, LapMode, RadialProfile};

fn config(name: &str, lap: LapMode) -> FlowConfig {
    let e = catalog_lookup(name).unwrap();
    let mut cfg = FlowConfig::new(e.params, BaseDensity { mult: e.density_mult });
    cfg.lap_mode = lap;
    cfg
}

fn bench_rhs(c: &mut Criterion) {
    let mut group = c.benchmark_group("rhs");
    for n in [100usize, 200, 400] {
        let cfg = config("CH3/CH1", LapMode::Full);
        let p = RadialProfile::cosine(1.0, n, 0.5, 0.05).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &p, |b, p| b.iter(|| rhs(&cfg, black_box(p)).unwrap()));
    }
    group.finish();
}

fn bench_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("rk4_step");
    for n in [100usize, 200, 400] {
        let flow = Flow::new(config("RH3/RH1", LapMode::Paper61), RadialProfile::cosine(1.0, n, 0.5, 0.05).unwrap()).unwrap();
        let dt = flow.dt();
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter_batched(|| flow.clone(), |mut f| f.step_with_dt(dt).unwrap(), criterion::BatchSize::SmallInput)
        });
    }
    group.finish();
}

fn bench_delta(c: &mut Criterion) {
    let space = catalog_lookup("QH2/QH1").unwrap().params;
    c.bench_function("delta1_adaptive", |b| b.iter(|| delta1(&space, black_box(1.3)).unwrap()));
    c.bench_function("delta1_fixed", |b| b.iter(|| delta1_fixed(&space, black_box(1.3))));
}

criterion_group!(benches, bench_rhs, bench_step, bench_delta);
criterion_main!(benches);
