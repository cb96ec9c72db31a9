use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use kinlv_core::fp::{initial_state, step_fp, FpOptions};
use kinlv_core::inequality::{gini_of, Distribution};
use kinlv_core::mc::{run_mc, McConfig};
use kinlv_core::ode::{integrate_cv, integrate_means, OdeSolverConfig};
use kinlv_core::{Analytic, InitialConditions, Mesh1D, ModelParams, RiskMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ode(c: &mut Criterion) {
    let p = ModelParams::table1();
    let ic = InitialConditions::reference();
    let cfg = OdeSolverConfig::adaptive(50.0, 1e-9);
    c.bench_function("lv_means_t50", |b| b.iter(|| integrate_means(black_box(&p), &ic, &cfg).unwrap()));
    let p = p.with_risk_mode(RiskMode::HalfHalf);
    c.bench_function("cv_system_t50", |b| b.iter(|| integrate_cv(black_box(&p), &ic, &cfg).unwrap()));
}

fn fp(c: &mut Criterion) {
    let p = ModelParams::table1();
    let ic = InitialConditions::new(4.0, 3.0, 0.3, 0.3);
    let (state, _) = initial_state(&ic, Mesh1D::new(1024, 20.0).unwrap()).unwrap();
    let opts = FpOptions::default();
    c.bench_function("fp_step_1024", |b| b.iter(|| step_fp(&p, black_box(&state), 1e-4, &opts).unwrap()));
}

fn mc(c: &mut Criterion) {
    let p = ModelParams::table1();
    let ic = InitialConditions::reference();
    // ten rounds of 1e4 agents per species
    let cfg = McConfig::new(10_000, 0.1, 1.0, 1.0, 5);
    let mut g = c.benchmark_group("mc");
    g.sample_size(20);
    g.bench_function("ten_rounds_1e4", |b| b.iter(|| run_mc(&p, &ic, black_box(&cfg)).unwrap()));
    g.finish();
}

fn gini(c: &mut Criterion) {
    let d = Analytic::Gamma { shape: 2.0, rate: 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let xs: Vec<f64> = (0..100_000).map(|_| d.sample(&mut rng)).collect();
    c.bench_function("sample_gini_1e5", |b| {
        b.iter_batched(|| xs.clone(), |v| gini_of(&Distribution::Sample(&v)).unwrap(), BatchSize::LargeInput)
    });
}

criterion_group!(benches, ode, fp, mc, gini);
criterion_main!(benches);
