use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use landmark_bm::distance_sde::{simulate_distance, DistanceCoefficients, DistanceRun};
use landmark_bm::exec::Execution;
use landmark_bm::geometry::LandmarkConfig;
use landmark_bm::kernels::make_matern;
use landmark_bm::simulator::{simulate, SimulationParams};

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn landmark_ensemble(c: &mut Criterion) {
    let mut group = c.benchmark_group("landmark_ensemble");
    group.sample_size(10);
    for (n, d) in [(2, 1), (3, 2)] {
        for (label, execution) in MODES {
            let mut params = SimulationParams::new(
                make_matern(1.5, 2.0).unwrap(),
                LandmarkConfig::unit_spacing(n, d).unwrap(),
                0.1,
                500,
                16,
                1,
            );
            params.execution = execution;
            group.bench_with_input(BenchmarkId::new(label, format!("n{n}_d{d}")), &params, |b, p| {
                b.iter(|| simulate(p).unwrap())
            });
        }
    }
    group.finish();
}

fn distance_ensemble(c: &mut Criterion) {
    let mut group = c.benchmark_group("distance_ensemble");
    let coeffs = DistanceCoefficients::new(make_matern(0.5, 1.0).unwrap(), 2).unwrap();
    for (label, execution) in MODES {
        let mut run = DistanceRun::new(1.0, 1.0, 2000, 256, 1);
        run.execution = execution;
        group.bench_function(label, |b| b.iter(|| simulate_distance(&coeffs, &run).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, landmark_ensemble, distance_ensemble);
criterion_main!(benches);
