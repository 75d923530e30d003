use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lieflow::approximation::{hermite_coeffs, Decay};
use lieflow::dynamics::{discrete_gradient, flow_ensemble, ControlSchedule, FlowConfig, OutputMap};
use lieflow::fields::{evaluation_rank, ControlFamily};
use lieflow::geometry::ManifoldSpec;
use lieflow::solver::random_ensemble;
use lieflow::ExecMode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, ExecMode); 2] = [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)];

fn ensemble_work(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let fam = ControlFamily::Gh { d: 2 };
    let ens = random_ensemble(ManifoldSpec::Euclidean(2), 64, 1.0, &mut rng).unwrap();
    let targets: Vec<Vec<f64>> = (0..64).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
    let values = (0..40 * fam.controls()).map(|_| rng.random_range(-0.5..0.5)).collect();
    let sched = ControlSchedule::new(1.0, 40, fam.controls(), values).unwrap();

    let mut group = c.benchmark_group("ensemble_64");
    for (name, exec) in MODES {
        let cfg = FlowConfig { substeps: 4, exec };
        group.bench_with_input(BenchmarkId::new("flow", name), &cfg, |b, cfg| {
            b.iter(|| flow_ensemble(&fam, &sched, &ens, cfg).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("gradient", name), &cfg, |b, cfg| {
            b.iter(|| discrete_gradient(&fam, &sched, &ens, &targets, &OutputMap::Identity, 1e-4, cfg).unwrap())
        });
    }
    group.finish();
}

fn rank_and_quadrature(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ens = random_ensemble(ManifoldSpec::Euclidean(2), 6, 1.0, &mut rng).unwrap();
    let fam = ControlFamily::Gh { d: 2 };
    let bump = |x: &[f64]| (-x.iter().map(|v| v * v).sum::<f64>()).exp();

    let mut group = c.benchmark_group("algebra");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("rank_depth3", name), |b| {
            b.iter(|| evaluation_rank(&fam, &ens, 3, exec).unwrap())
        });
        group.bench_function(BenchmarkId::new("hermite_d2_n12", name), |b| {
            b.iter(|| hermite_coeffs(&bump, 2, 12, Decay::gaussian(), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, ensemble_work, rank_and_quadrature);
criterion_main!(benches);
