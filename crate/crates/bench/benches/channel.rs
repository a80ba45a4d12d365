use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use wstate_core::fom::sweep;
use wstate_core::kraus::step;
use wstate_core::scattering::{total_reflection, total_reflection_sector};
use wstate_core::{ChannelConfig, Engine, GridSpec, KrausPair, StateVector};

fn reflection(c: &mut Criterion) {
    let mut g = c.benchmark_group("reflection");
    g.sample_size(20);
    for n in [3, 6, 9] {
        let cfg = ChannelConfig::reference(n);
        g.bench_with_input(BenchmarkId::new("sector", n), &cfg, |b, cfg| {
            b.iter(|| total_reflection_sector(black_box(cfg), &[0, 1]).unwrap())
        });
        // dense 2^(n+1) cascade; n = 9 takes seconds per call
        if n <= 6 {
            g.bench_with_input(BenchmarkId::new("full", n), &cfg, |b, cfg| {
                b.iter(|| total_reflection(black_box(cfg)).unwrap())
            });
        }
    }
    g.finish();
}

fn kraus_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("kraus_step");
    for (engine, n) in [(Engine::Sector, 12), (Engine::Full, 6)] {
        let pair = KrausPair::for_channel(&ChannelConfig::reference(n), engine).unwrap();
        let rho = StateVector::basis_state(pair.basis, 1 << (n - 1)).unwrap().density();
        g.bench_function(BenchmarkId::new(engine.to_string(), n), |b| {
            b.iter(|| step(black_box(&rho), &pair).unwrap())
        });
    }
    g.finish();
}

fn fom_sweep(c: &mut Criterion) {
    let grid = GridSpec::kd_kd0(16);
    let base = ChannelConfig::reference(3);
    let mut g = c.benchmark_group("fom");
    g.sample_size(20);
    g.bench_function("fom_sweep_16x16", |b| b.iter(|| sweep(black_box(&base), &grid).unwrap()));
    g.finish();
}

criterion_group!(benches, reflection, kraus_step, fom_sweep);
criterion_main!(benches);
