//! Sequential vs rayon execution of the data-parallel kernels.
//! Run with `cargo bench --bench parallel`; without the `parallel` feature
//! both variants run sequentially.

use std::f64::consts::PI;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use starkfloq::exponent::{spread_series_with, Method};
use starkfloq::lattice2d::{run_scenarios_with, ScenarioConfig, ScenarioId};
use starkfloq::propagator::{bloch_trajectory_with, uniform_grid};
use starkfloq::resonance::heq_trajectory_with;
use starkfloq::spectrum::biorthonormality_matrix_with;
use starkfloq::{ChainParams, Exec, StateVector};

const EXECS: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn bloch_trajectory(c: &mut Criterion) {
    let p = ChainParams::centered(Complex64::from_polar(1.0, PI / 4.0), 0.0, 1.0, 200).unwrap();
    let init = StateVector::site(&p, 0).unwrap();
    let grid = uniform_grid(0.0, 20.0 * PI, 401);
    let mut g = c.benchmark_group("bloch_trajectory");
    for (name, exec) in EXECS {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| bloch_trajectory_with(exec, &init, &p, &grid).unwrap())
        });
    }
    g.finish();
}

fn spread_series(c: &mut Criterion) {
    let times = uniform_grid(10.0, 100.0, 91);
    let mut g = c.benchmark_group("spread_series");
    for (name, exec) in EXECS {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| spread_series_with(exec, Complex64::new(0.0, 1.0), &times, Method::Fwhm).unwrap())
        });
    }
    g.finish();
}

fn level_trajectory(c: &mut Criterion) {
    let times = uniform_grid(0.0, 100.0, 201);
    let mut g = c.benchmark_group("level_trajectory");
    for (name, exec) in EXECS {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| heq_trajectory_with(exec, Complex64::new(1.0, 0.0), &times).unwrap())
        });
    }
    g.finish();
}

fn biorthonormality(c: &mut Criterion) {
    let p = ChainParams::centered(Complex64::new(1.0, 1.0), 0.0, 1.0, 200).unwrap();
    let mut g = c.benchmark_group("biorthonormality");
    for (name, exec) in EXECS {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| biorthonormality_matrix_with(exec, &p, 0.0, -60..=60).unwrap())
        });
    }
    g.finish();
}

fn scenarios_2d(c: &mut Criterion) {
    let cfg = ScenarioConfig::default();
    let mut g = c.benchmark_group("scenarios_2d");
    g.sample_size(10);
    for (name, exec) in EXECS {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_scenarios_with(exec, &ScenarioId::ALL, &cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(kernels, bloch_trajectory, spread_series, level_trajectory, biorthonormality);
criterion_group!(lattice, scenarios_2d);
criterion_main!(kernels, lattice);
