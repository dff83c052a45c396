use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nhtopo::invariants::{spectrum_scan, winding_sweep, ScanOptions, SpectrumKind};
use nhtopo::model::{Boundary, ModelParams};
use nhtopo::sweep::{linspace, Execution};

fn base() -> ModelParams {
    ModelParams::new(0.0, 1.0, 1.0, 0.5, 1.0, 50).expect("valid parameters")
}

fn winding(c: &mut Criterion) {
    let u = linspace(-2.0, 2.0, 64);
    let mut group = c.benchmark_group("winding_sweep");
    for execution in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{execution:?}")),
            &execution,
            |b, &e| b.iter(|| winding_sweep(&base(), &u, 2001, e)),
        );
    }
    group.finish();
}

fn spectrum(c: &mut Criterion) {
    let u = linspace(-2.0, 2.0, 16);
    let mut group = c.benchmark_group("spectrum_scan");
    group.sample_size(10);
    for execution in [Execution::Sequential, Execution::Parallel] {
        let options = ScanOptions {
            execution,
            ..ScanOptions::default()
        };
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{execution:?}")),
            &options,
            |b, o| {
                b.iter(|| spectrum_scan(&base(), &u, Boundary::Open, SpectrumKind::Effective, *o))
            },
        );
    }
    group.finish();
}

criterion_group!(benches, winding, spectrum);
criterion_main!(benches);
