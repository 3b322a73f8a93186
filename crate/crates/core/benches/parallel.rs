//! Sequential versus data-parallel execution of the hot kernels.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use zkscatter::data::random_field;
use zkscatter::dynamics::{self, SolveOptions, SolverConfig};
use zkscatter::grid::{dealias, forward, forward_with};
use zkscatter::{bilinear, make_grid, Execution};

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn fft(c: &mut Criterion) {
    let g = make_grid(256, 256, 100.0, 100.0).unwrap();
    let f = random_field(g, 7, 0);
    let mut group = c.benchmark_group("forward_256");
    for exec in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &e| b.iter(|| forward_with(black_box(&f), e)));
    }
    group.finish();
}

fn pair(c: &mut Criterion) {
    let g = make_grid(16, 16, 20.0, 20.0).unwrap();
    let f = dealias(&forward(&random_field(g.clone(), 7, 0)));
    let h = dealias(&forward(&random_field(g, 7, 1)));
    let mut group = c.benchmark_group("pair_sum_16");
    for exec in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &e| {
            b.iter(|| bilinear::pair_sum(&f, &h, |p| Ok(Complex64::new(p.xi[0] - p.eta[1], 0.0)), e).unwrap())
        });
    }
    group.finish();
}

fn step(c: &mut Criterion) {
    let g = make_grid(128, 128, 60.0, 60.0).unwrap();
    let v = dealias(&forward(&random_field(g, 7, 0))).scale(1e-2);
    let mut group = c.benchmark_group("solve_128_ten_steps");
    group.sample_size(10);
    for exec in MODES {
        let cfg = SolverConfig::new(1e-3, 0.0, 1e-2).with_exec(exec);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &cfg, |b, cfg| {
            b.iter(|| dynamics::solve(&v, cfg, &[], &SolveOptions::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, fft, pair, step);
criterion_main!(benches);
