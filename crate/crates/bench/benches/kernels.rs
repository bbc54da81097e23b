use std::hint::black_box;

use cns_core::gamma::{compute_gamma, GammaConfig};
use cns_core::noise::{color_noise, power_law_profile, white_noise};
use cns_core::rng::root_rng;
use cns_core::solvers::{integrate, DiffusionSpec, Scheme, SolverConfig};
use cns_core::spectral::{build_band_map, forward_transform, project_band};
use cns_core::{GaussianMixtureOracle, GridShape, VelocityModel};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn spectral(c: &mut Criterion) {
    let mut g = c.benchmark_group("spectral");
    for size in [16usize, 64, 256] {
        let shape = GridShape::square(size);
        let x = white_noise(shape, &mut root_rng(1));
        let map = build_band_map(shape, 16).unwrap();
        g.bench_with_input(BenchmarkId::new("fft2", size), &x, |b, x| {
            b.iter(|| forward_transform(black_box(x), shape).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("project_band", size), &x, |b, x| {
            b.iter(|| project_band(black_box(x), 3, &map).unwrap())
        });
        let profile = power_law_profile(&map, -1.0).unwrap();
        g.bench_with_input(BenchmarkId::new("color_noise", size), &x, |b, x| {
            b.iter(|| color_noise(black_box(x), &profile, &map).unwrap())
        });
    }
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let shape = GridShape::square(16);
    let o = GaussianMixtureOracle::radial_power_law(shape, 16, 0.1, -1.0, 2.0, &mut root_rng(2)).unwrap();
    let x = white_noise(shape, &mut root_rng(3));
    c.bench_function("gmm_velocity_16x16_k16", |b| b.iter(|| o.velocity(black_box(&x), 0.4).unwrap()));
}

fn solvers(c: &mut Criterion) {
    let shape = GridShape::square(16);
    let o = GaussianMixtureOracle::radial_power_law(shape, 16, 0.1, -1.0, 2.0, &mut root_rng(4)).unwrap();
    let init = white_noise(shape, &mut root_rng(5));
    let mut g = c.benchmark_group("integrate_100_steps");
    for scheme in [Scheme::OdeEuler, Scheme::SdeEulerMaruyama, Scheme::SdeHeun, Scheme::Srk2, Scheme::Srk2s] {
        let cfg = SolverConfig::new(scheme, 100, 6);
        let d = if scheme.is_stochastic() { DiffusionSpec::default() } else { DiffusionSpec::none() };
        g.bench_function(format!("{scheme:?}"), |b| b.iter(|| integrate(&o, &d, &cfg, black_box(&init)).unwrap()));
    }
    g.finish();
}

fn gamma(c: &mut Criterion) {
    let shape = GridShape::square(16);
    let o = GaussianMixtureOracle::radial_power_law(shape, 16, 0.1, -1.0, 2.0, &mut root_rng(7)).unwrap();
    let map = build_band_map(shape, 8).unwrap();
    let cfg = GammaConfig { steps: 50, batches: 1, batch_size: 8, seed: 8, scheme: Scheme::OdeEuler };
    let mut g = c.benchmark_group("gamma");
    g.sample_size(10);
    g.bench_function("16x16_8_samples_50_steps", |b| b.iter(|| compute_gamma(&o, &cfg, &map, "bench").unwrap()));
    g.finish();
}

criterion_group!(benches, spectral, oracle, solvers, gamma);
criterion_main!(benches);
