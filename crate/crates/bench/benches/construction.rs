use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use splitsim_core::scenario;
use splitsim_core::verifier;
use splitsim_core::{run_construction, sampler};

fn bench_scenarios(c: &mut Criterion) {
    let mut group = c.benchmark_group("scenario-run");
    for sc in scenario::all() {
        group.bench_with_input(BenchmarkId::from_parameter(sc.name), &sc, |b, sc| {
            b.iter(|| run_construction(sc.cfg.clone(), sc.roster.clone()));
        });
    }
    group.finish();
}

fn bench_verify(c: &mut Criterion) {
    let sc = scenario::fig2();
    let trace = run_construction(sc.cfg.clone(), sc.roster.clone());
    c.bench_function("standard-checks/fig2", |b| {
        b.iter(|| verifier::standard_checks(&trace));
    });
}

fn bench_sampled(c: &mut Criterion) {
    let mut group = c.benchmark_group("sampled-run");
    for seed in [0u64, 1, 2] {
        let (cfg, roster) = sampler::sample(seed);
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("seed-{seed}")),
            &(cfg, roster),
            |b, (cfg, roster)| {
                b.iter(|| run_construction(cfg.clone(), roster.clone()));
            },
        );
    }
    group.finish();
}

criterion_group!(benches, bench_scenarios, bench_verify, bench_sampled);
criterion_main!(benches);
