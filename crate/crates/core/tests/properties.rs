mod common;

use common::random_positive;
use proptest::prelude::*;
use pxlap::energy::{phi_line, phi_prime, ReactionTerm};
use pxlap::inequality::{check_ray_convexity, default_theta_grid, diaz_saa_gap, DEFAULT_RATIO_CAP};
use pxlap::problems::ProblemSpec;
use pxlap::solver::{uniqueness_experiment, SolverOptions};
use pxlap::{AnisotropyModel, EnergyModel, Exec, ExponentField, LineFunctional, Mesh, NodeField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn model(p_kind: u8, r: f64, n: usize) -> EnergyModel {
    let m = Mesh::interval(0.0, 1.0, n).unwrap();
    let p = NodeField::from_fn(&m, |x| match p_kind {
        0 => 2.0,
        1 => 2.0 + x[0],
        _ => 2.0 + 0.5 * (std::f64::consts::PI * x[0]).sin(),
    })
    .unwrap();
    EnergyModel::new(AnisotropyModel::isotropic(ExponentField::new(p, r).unwrap()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ray_functional_is_convex(seed in any::<u64>(), p_kind in 0u8..3, r_idx in 0usize..3) {
        let r = [1.0, 1.5, 2.0][r_idx];
        let model = model(p_kind, r, 32);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v1 = random_positive(model.mesh(), &mut rng).map(|w| w.powf(r)).unwrap();
        let v2 = random_positive(model.mesh(), &mut rng).map(|w| w.powf(r)).unwrap();
        for f in [LineFunctional::W, LineFunctional::WA] {
            let rep = check_ray_convexity(&v1, &v2, f, &model, &default_theta_grid()).unwrap();
            prop_assert!(rep.relative_min_slack() >= -1e-10, "{}", rep.relative_min_slack());
        }
    }

    #[test]
    fn gap_is_nonnegative(seed in any::<u64>(), p_kind in 0u8..3, r_idx in 0usize..3) {
        let r = [1.0, 1.5, 2.0][r_idx];
        let model = model(p_kind, r, 32);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w1 = random_positive(model.mesh(), &mut rng);
        let w2 = random_positive(model.mesh(), &mut rng);
        let g = diaz_saa_gap(&w1, &w2, &model, DEFAULT_RATIO_CAP).unwrap();
        prop_assert!(g.relative_gap() >= -1e-10);
        let same = diaz_saa_gap(&w1, &w1, &model, DEFAULT_RATIO_CAP).unwrap();
        prop_assert_eq!(same.gap, 0.0);
    }

    #[test]
    fn phi_prime_is_nondecreasing(seed in any::<u64>(), p_kind in 0u8..3) {
        let model = model(p_kind, 1.5, 32);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v1 = random_positive(model.mesh(), &mut rng).map(|w| w.powf(1.5)).unwrap();
        let v2 = random_positive(model.mesh(), &mut rng).map(|w| w.powf(1.5)).unwrap();
        let d: Vec<f64> = [0.0, 0.25, 0.5, 0.75, 1.0]
            .iter()
            .map(|&t| phi_prime(&v1, &v2, t, LineFunctional::W, &model).unwrap())
            .collect();
        let scale = d.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        prop_assert!(d.windows(2).all(|w| w[1] - w[0] >= -1e-10 * scale));
    }

    #[test]
    fn proportional_pairs_are_affine_when_p_equals_r(seed in any::<u64>(), c in 0.2f64..5.0) {
        let model = model(0, 2.0, 32);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v1 = random_positive(model.mesh(), &mut rng).map(|w| w * w).unwrap();
        let v2 = v1.scale(c).unwrap();
        let a = phi_line(&v1, &v2, 0.0, LineFunctional::W, &model).unwrap();
        let b = phi_line(&v1, &v2, 1.0, LineFunctional::W, &model).unwrap();
        let mid = phi_line(&v1, &v2, 0.3, LineFunctional::W, &model).unwrap();
        prop_assert!((0.7 * a + 0.3 * b - mid).abs() <= 1e-12 * a.abs().max(b.abs()));
    }
}

#[test]
fn multistart_is_identical_across_execution_modes() {
    let m = Mesh::interval(0.0, 1.0, 48).unwrap();
    let spec = ProblemSpec::problem1(
        AnisotropyModel::isotropic(ExponentField::constant(&m, 2.0, 2.0).unwrap()),
        ReactionTerm::power(NodeField::constant(&m, 1.0), NodeField::constant(&m, 1.5)).unwrap(),
    );
    let opts = SolverOptions::default();
    let seq = uniqueness_experiment(&spec, &opts, 3, 7, 1e-6, Exec::Sequential).unwrap();
    let par = uniqueness_experiment(&spec, &opts, 3, 7, 1e-6, Exec::Parallel).unwrap();
    for (a, b) in seq.runs.iter().zip(&par.runs) {
        assert_eq!(a.solution.values(), b.solution.values());
    }
    assert!(seq.passed);
}
