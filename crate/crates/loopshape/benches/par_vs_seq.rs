//! Parallel vs sequential benchmarks for the data-parallel inner loops:
//! gap-matrix assembly and swarm cost evaluation.

use criterion::{criterion_group, criterion_main, Criterion};
use loopshape::lti::TransferFunction;
use loopshape::missile::synthetic_envelope;
use loopshape::pso::{pso_minimize, SwarmConfig};
use loopshape::vgap::{vgap_matrix, vgap_matrix_seq};

fn plant_family() -> Vec<TransferFunction> {
    // The four synthetic envelope plants plus scaled variants for a
    // meatier pairwise workload.
    let mut plants = synthetic_envelope().plants().expect("fixture plants");
    let extra: Vec<TransferFunction> = plants
        .iter()
        .map(|p| p.scale(1.3))
        .chain(plants.iter().map(|p| p.scale(0.4)))
        .collect();
    plants.extend(extra);
    plants
}

fn bench_vgap_matrix(c: &mut Criterion) {
    let plants = plant_family();
    let mut group = c.benchmark_group("vgap_matrix");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| vgap_matrix(std::hint::black_box(&plants)).unwrap())
    });
    group.bench_function("sequential", |b| {
        b.iter(|| vgap_matrix_seq(std::hint::black_box(&plants)).unwrap())
    });
    group.finish();
}

fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum::<f64>()
        + x.iter().map(|v| (v.sin() * 50.0).cos().acos()).sum::<f64>() * 0.0
}

fn bench_pso(c: &mut Criterion) {
    let config = SwarmConfig {
        particle_count: 64,
        iterations: 60,
        inertia: 0.729,
        cognitive: 1.49445,
        social: 1.49445,
        bounds: vec![(-2.0, 2.0); 8],
        seed: 17,
    };
    let mut group = c.benchmark_group("pso_rosenbrock8");
    group.sample_size(10);

    #[cfg(feature = "parallel")]
    {
        let pool1 = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        group.bench_function("one_thread", |b| {
            b.iter(|| pool1.install(|| pso_minimize(rosenbrock, &config).unwrap()))
        });
        group.bench_function("all_threads", |b| {
            b.iter(|| pso_minimize(rosenbrock, &config).unwrap())
        });
    }
    #[cfg(not(feature = "parallel"))]
    group.bench_function("sequential_build", |b| {
        b.iter(|| pso_minimize(rosenbrock, &config).unwrap())
    });

    group.finish();
}

criterion_group!(benches, bench_vgap_matrix, bench_pso);
criterion_main!(benches);
