//! Sequential against rayon-parallel execution on the grid workloads.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pulse_dde::bifurcation::{sweep, Continuation, SweepParameter, SweepSpec};
use pulse_dde::engine::ForcingSchedule;
use pulse_dde::model::{limit_cycle, ModelParams};
use pulse_dde::par::Execution;
use pulse_dde::single_pulse::response_grid;
use pulse_dde::treatment::{chemo_scan, NeutrophilMapping, ScanSpec};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn delta_grid(c: &mut Criterion) {
    let p = ModelParams::new(1.0, 1.0, 1.0).unwrap();
    let mut g = c.benchmark_group("response_grid_2000");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| response_grid(&p, 1.0, 0.5, 2000, exec).unwrap())
        });
    }
    g.finish();
}

fn chemo(c: &mut Criterion) {
    let m = NeutrophilMapping::from_reduced(ModelParams::new(22.32, 0.41, 0.225).unwrap(), 2.4, 0.63).unwrap();
    let spec = ScanSpec::standard((600.0, 2000.0));
    let mut g = c.benchmark_group("chemo_scan_391");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| chemo_scan(&m, &spec, exec).unwrap()));
    }
    g.finish();
}

fn cold_sweep(c: &mut Criterion) {
    let p = ModelParams::new(1.0, 0.5, 1.0).unwrap();
    let f = ForcingSchedule::periodic(limit_cycle(&p).z2, 0.3, 0.6, 1.1).unwrap();
    let mut spec = SweepSpec::new(SweepParameter::BetaU, 0.5, 1.0);
    spec.mesh_count = 64;
    spec.transient_periods = 20.0;
    spec.record_periods = 20.0;
    spec.first_transient_periods = 40.0;
    spec.continuation = Continuation::Cold;
    let mut g = c.benchmark_group("cold_sweep_64");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| sweep(&p, &f, &spec, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, delta_grid, chemo, cold_sweep);
criterion_main!(benches);
