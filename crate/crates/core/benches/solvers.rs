use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use plateflow::elliptic::{DtnConfig, DtnSolver};
use plateflow::galerkin::{GalerkinConfig, Integrator};
use plateflow::parallel::with_thread_limit;
use plateflow::SpectralField;

/// `None` uses the default pool; `Some(1)` forces the sequential path.
const BACKENDS: [(&str, Option<usize>); 2] = [("parallel", None), ("sequential", Some(1))];

fn surface() -> SpectralField {
    &SpectralField::cos_mode(32, 1, 0.05) + &SpectralField::sin_mode(32, 2, 0.02)
}

fn strip_kernels(c: &mut Criterion) {
    let solver = DtnSolver::new(&DtnConfig::default()).unwrap();
    let eta = surface();
    let op = solver.operator(&eta);
    let len = 256 * 257;
    let x: Vec<f64> = (0..len).map(|i| (i as f64 * 0.37).sin()).collect();
    let mut y = vec![0.0; len];
    let psi = &SpectralField::cos_mode(32, 2, 1.0) + &SpectralField::sin_mode(32, 3, 0.3);
    let mut group = c.benchmark_group("strip");
    for (name, threads) in BACKENDS {
        group.bench_function(BenchmarkId::new("apply_full", name), |b| {
            with_thread_limit(threads, || b.iter(|| op.apply_full(black_box(&x), &mut y)))
        });
        group.bench_function(BenchmarkId::new("preconditioner", name), |b| {
            with_thread_limit(threads, || b.iter(|| op.precondition(black_box(&x), &mut y)))
        });
        group.bench_function(BenchmarkId::new("extend", name), |b| {
            with_thread_limit(threads, || b.iter(|| op.extend(black_box(&psi), None).unwrap()))
        });
    }
    group.finish();
}

fn time_stepping(c: &mut Criterion) {
    let cfg = GalerkinConfig { dt: 5e-4, ..GalerkinConfig::new(32) };
    let mut integ = Integrator::new(&cfg).unwrap();
    let psi = &SpectralField::cos_mode(32, 2, 0.05) + &SpectralField::sin_mode(32, 1, 0.025);
    let state = integ.init_state(&surface(), &psi).unwrap();
    let mut group = c.benchmark_group("galerkin");
    group.sample_size(10);
    for (name, threads) in BACKENDS {
        group.bench_function(BenchmarkId::new("rhs_eval", name), |b| {
            with_thread_limit(threads, || b.iter(|| integ.rhs_eval(black_box(&state)).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, strip_kernels, time_stepping);
criterion_main!(benches);
