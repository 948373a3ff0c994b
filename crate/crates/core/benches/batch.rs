use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pxlap::energy::ReactionTerm;
use pxlap::inequality::{diaz_saa_gap, DEFAULT_RATIO_CAP};
use pxlap::problems::ProblemSpec;
use pxlap::solver::{uniqueness_experiment, SolverOptions};
use pxlap::{AnisotropyModel, EnergyModel, Exec, ExponentField, Mesh, NodeField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn gap_batch(c: &mut Criterion) {
    let m = Mesh::rectangle(0.0, 1.0, 0.0, 1.0, 16, 16).unwrap();
    let p = NodeField::from_fn(&m, |x| 2.0 + x[0] * x[1]).unwrap();
    let model = EnergyModel::new(AnisotropyModel::isotropic(ExponentField::new(p, 1.5).unwrap()));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pairs: Vec<(NodeField, NodeField)> = (0..64)
        .map(|_| {
            let mut field = || {
                let (a, b) = (rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
                NodeField::from_fn(&m, |x| x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]) * (a * x[0] + b * x[1]).exp())
                    .unwrap()
            };
            (field(), field())
        })
        .collect();
    let mut group = c.benchmark_group("gap_batch_64");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| exec.map(&pairs, |(w1, w2)| diaz_saa_gap(w1, w2, &model, DEFAULT_RATIO_CAP).unwrap().gap))
        });
    }
    group.finish();
}

fn multistart(c: &mut Criterion) {
    let m = Mesh::interval(0.0, 1.0, 256).unwrap();
    let spec = ProblemSpec::problem1(
        AnisotropyModel::isotropic(ExponentField::constant(&m, 2.0, 2.0).unwrap()),
        ReactionTerm::power(NodeField::constant(&m, 1.0), NodeField::constant(&m, 1.5)).unwrap(),
    );
    let opts = SolverOptions::default();
    let mut group = c.benchmark_group("multistart_8");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(uniqueness_experiment(&spec, &opts, 7, 3, 1e-6, exec).unwrap().max_distance))
        });
    }
    group.finish();
}

criterion_group!(benches, gap_batch, multistart);
criterion_main!(benches);
