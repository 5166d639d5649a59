//! Sequential versus rayon-parallel propagation of a formation.
//!
//! Each iteration propagates `n` satellites for one orbit with drag and J2..J6
//! at a 30 s step. Build with `--no-default-features` to time the crate
//! without rayon; the `parallel` group then falls back to one thread.

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use dragform::environment::AtmosphereTable;
use dragform::orbital::{orbital_period, EarthConstants, OrbitalElements, SpacecraftParams};
use dragform::par::Execution;
use dragform::propagator::{propagate, ControlSchedule, ForceModel, SatelliteSimState};

fn formation(n: usize, c: &EarthConstants) -> Vec<SatelliteSimState> {
    (0..n)
        .map(|k| {
            let oe = OrbitalElements::from_aol(
                c.r_eq + 440e3,
                0.005,
                51.5f64.to_radians(),
                0.0,
                0.01 * k as f64,
            );
            SatelliteSimState::from_elements(&oe, c, 0.0, 0.2).unwrap()
        })
        .collect()
}

fn bench_propagation(cr: &mut Criterion) {
    let c = EarthConstants::default();
    let model = ForceModel::zonal(&c, 6).with_drag(
        SpacecraftParams::default(),
        Arc::new(AtmosphereTable::default_table().clone()),
    );
    let period = orbital_period(c.r_eq + 440e3, &c);
    let mut group = cr.benchmark_group("propagate_one_orbit");
    group.sample_size(10);
    for n in [4usize, 16, 64] {
        let states = formation(n, &c);
        let u: Vec<f64> = (0..n).map(|k| if k % 2 == 0 { 0.2 } else { 1.0 }).collect();
        let sched = ControlSchedule::constant(0.0, period, u);
        group.throughput(Throughput::Elements(n as u64));
        for (label, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(label, n), &states, |b, states| {
                b.iter(|| {
                    propagate(black_box(states), &sched, period, &model, 30.0, 20, exec).unwrap()
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_propagation);
criterion_main!(benches);
