//! Parallel vs sequential throughput of the forward sweep and the 2D energy.
//!
//! The library parallelizes `tau_sweep` and the 2D potential sum with rayon
//! when the default `parallel` feature is on; the sequential baselines below
//! evaluate the identical work in a plain loop, so the comparison holds in a
//! single compilation. Building with `--no-default-features` makes both sides
//! sequential.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use phasecost::forward::{tau_forward, tau_sweep, Route};
use phasecost::monotone::StepFn;
use phasecost::network2d::energy_cells;
use phasecost::phase_costs::{MassSpecificCost, PhaseFieldCost};
use std::hint::black_box;

fn urban_cost() -> PhaseFieldCost {
    let z = StepFn::new(vec![0.52], vec![1.0], 0.5).unwrap();
    PhaseFieldCost::new(MassSpecificCost::Step(z)).unwrap()
}

fn bench_sweep(c: &mut Criterion) {
    let cost = urban_cost();
    let ws: Vec<f64> = (1..=256).map(|k| 0.05 * k as f64).collect();
    let mut group = c.benchmark_group("forward_sweep_mm");
    group.sample_size(20);
    group.bench_function(BenchmarkId::new("library", ws.len()), |b| {
        b.iter(|| tau_sweep(black_box(&cost), black_box(&ws), Route::ModicaMortola).unwrap())
    });
    group.bench_function(BenchmarkId::new("sequential", ws.len()), |b| {
        b.iter(|| {
            ws.iter()
                .map(|&w| tau_forward(black_box(&cost), w, Route::ModicaMortola))
                .collect::<Result<Vec<_>, _>>()
                .unwrap()
        })
    });
    group.finish();
}

fn bench_energy_2d(c: &mut Criterion) {
    let cost = urban_cost();
    let n = 256;
    let h = 1.0 / n as f64;
    let eps = 0.05;
    let cx: Vec<f64> = (0..n * n).map(|k| ((k % n) as f64 * h).sin()).collect();
    let cy: Vec<f64> = (0..n * n).map(|k| ((k / n) as f64 * h).cos()).collect();
    let mut group = c.benchmark_group("energy_2d");
    group.sample_size(30);
    group.bench_function(BenchmarkId::new("library", n), |b| {
        b.iter(|| energy_cells(n, h, black_box(&cx), black_box(&cy), eps, &cost))
    });
    group.bench_function(BenchmarkId::new("sequential", n), |b| {
        b.iter(|| {
            // same quadrature as the library potential term, plain loop
            let mut dir = 0.0;
            for comp in [&cx, &cy] {
                for j in 0..n {
                    for i in 0..n {
                        if i + 1 < n {
                            let d = comp[j * n + i + 1] - comp[j * n + i];
                            dir += d * d;
                        }
                        if j + 1 < n {
                            let d = comp[(j + 1) * n + i] - comp[j * n + i];
                            dir += d * d;
                        }
                    }
                }
            }
            let mut pot = 0.0;
            for k in 0..n * n {
                let m = cx[k].hypot(cy[k]);
                pot += cost.eval_c(eps * m).unwrap_or(f64::INFINITY) / eps * h * h;
            }
            0.5 * eps.powi(3) * dir + pot
        })
    });
    group.finish();
}

criterion_group!(benches, bench_sweep, bench_energy_2d);
criterion_main!(benches);
