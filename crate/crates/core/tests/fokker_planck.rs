mod common;

use common::{close, instance, sizes};
use proptest::prelude::*;
use rand::Rng;
use twisted_hj::fokker_planck::{
    drift_divergence, drift_divergence_constant, drift_inner, duality_check, duality_for_drift, fp_residual, fp_solve,
    fp_step, slice_inner, stochastic_value, DriftPath,
};
use twisted_hj::forms::{gamma_hat, Cocycle};
use twisted_hj::grid::{ScalarFieldPath, TimeGrid};
use twisted_hj::potential::{cosine_profile, Potential};
use twisted_hj::space::{GraphSpace, ScalarField};
use twisted_hj::testing::random_field;
use twisted_hj::viscous::{solve_viscous_hj_direct, ViscousProblem};
use twisted_hj::Error;

fn density(space: &GraphSpace, rng: &mut impl Rng) -> ScalarField {
    let f = random_field(space.vertex_count(), 0.2, 2.0, rng);
    let mass = space.integrate(&f);
    f / mass
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn divergence_is_adjoint_to_the_pairing((n, extra, seed) in sizes()) {
        let (s, mut rng) = instance(n, extra, seed);
        let y = Cocycle::random(&s, 1.0, &mut rng);
        let rho = random_field(n, 0.1, 2.0, &mut rng);
        let phi = random_field(n, -1.0, 1.0, &mut rng);
        let dphi = Cocycle::exact(&s, &phi).unwrap();
        let lhs = s.inner(&phi, &drift_divergence(&s, &y, &rho));
        let rhs = s.inner(&gamma_hat(&s, &dphi, &y), &rho);
        prop_assert!(close(lhs, rhs, 1e-12));
        // Pairing with constants vanishes, so mass is conserved.
        prop_assert!(s.integrate(&drift_divergence(&s, &y, &rho)).abs() <= 1e-12);
    }

    #[test]
    fn densities_keep_their_mass(
        (n, extra, seed) in sizes(), theta in 0.5..=1.0f64, beta in 0.3..3.0f64,
    ) {
        let (s, mut rng) = instance(n, extra, seed);
        let grid = TimeGrid::from_steps(40, 0.01).unwrap();
        let slices = (0..grid.nodes()).map(|_| Cocycle::random(&s, 1.0, &mut rng)).collect();
        let drift = DriftPath::new(grid, slices).unwrap();
        let nu = density(&s, &mut rng);
        let sol = fp_solve(&s, &nu, &drift, beta, theta).unwrap();
        for rho in sol.rho.values() {
            prop_assert!((s.integrate(rho) - 1.0).abs() <= 1e-10);
        }
        prop_assert!(fp_residual(&s, &sol.rho, &drift, beta, theta) <= 1e-10);
    }

    #[test]
    fn drift_inner_is_a_weighted_inner_product((n, extra, seed) in sizes(), a in -2.0..2.0f64) {
        let (s, mut rng) = instance(n, extra, seed);
        let grid = TimeGrid::from_steps(5, 0.1).unwrap();
        let path = |rng: &mut rand_chacha::ChaCha8Rng| {
            let slices = (0..grid.nodes()).map(|_| Cocycle::random(&s, 1.0, rng)).collect();
            DriftPath::new(grid, slices).unwrap()
        };
        let (x, y, z) = (path(&mut rng), path(&mut rng), path(&mut rng));
        let rho = ScalarFieldPath::new(grid, (0..grid.nodes()).map(|_| density(&s, &mut rng)).collect()).unwrap();
        let xy = drift_inner(&s, &x, &y, &rho).unwrap();
        let yx = drift_inner(&s, &y, &x, &rho).unwrap();
        prop_assert!(close(xy.total, yx.total, 1e-13));
        // Disintegration: the total is the trapezoid sum of the slices.
        let k = grid.steps();
        let trap = grid.dt() * (0.5 * (xy.slices[0] + xy.slices[k]) + xy.slices[1..k].iter().sum::<f64>());
        prop_assert!(close(xy.total, trap, 1e-14));
        for j in 0..grid.nodes() {
            prop_assert!(close(xy.slices[j], slice_inner(&s, x.at(j), y.at(j), rho.at(j)), 1e-15));
        }
        let xx = drift_inner(&s, &x, &x, &rho).unwrap().total;
        let yy = drift_inner(&s, &y, &y, &rho).unwrap().total;
        prop_assert!(xx >= 0.0);
        prop_assert!(xy.total * xy.total <= xx * yy * (1.0 + 1e-12));
        let shifted = x.perturbed(&z, a).unwrap();
        let lhs = drift_inner(&s, &shifted, &y, &rho).unwrap().total;
        let rhs = xy.total + a * drift_inner(&s, &z, &y, &rho).unwrap().total;
        prop_assert!(close(lhs, rhs, 1e-12));
    }

    #[test]
    fn optimal_drift_beats_perturbations((n, extra, seed) in sizes(), eps in 0.2..1.0f64) {
        let (s, mut rng) = instance(n.min(6), extra.min(2), seed);
        let n = s.vertex_count();
        let w = Cocycle::random(&s, 0.5, &mut rng).harmonic_representative(&s).unwrap().0;
        let pot = Potential::Static(random_field(n, -0.5, 0.5, &mut rng));
        let grid = TimeGrid::new(-0.5, 1e-3).unwrap();
        let p = ViscousProblem::new(&s, &w, &pot, 1.0, random_field(n, -0.5, 0.5, &mut rng), grid).unwrap();
        let nu = density(&s, &mut rng);
        let u = solve_viscous_hj_direct(&p).unwrap();
        let best = DriftPath::optimal(&s, &w, &u).unwrap();
        let opt = duality_for_drift(&p, &nu, &u, &best, 1.0).unwrap();
        let eta = DriftPath::constant(grid, &Cocycle::random(&s, 1.0, &mut rng));
        let other = duality_for_drift(&p, &nu, &u, &best.perturbed(&eta, eps).unwrap(), 1.0).unwrap();
        prop_assert!(other.gap >= opt.gap - 1e-9, "{} < {}", other.gap, opt.gap);
        prop_assert!(opt.gap.abs() <= 0.05);
    }
}

#[test]
fn long_runs_conserve_mass() {
    let s = GraphSpace::cycle(10, 1.0).unwrap();
    let mut rng = common::rng(5);
    let drift = Cocycle::random(&s, 2.0, &mut rng);
    let mut rho = density(&s, &mut rng);
    for _ in 0..1000 {
        rho = fp_step(&s, &rho, &drift, &drift, 1e-2, 0.7, 0.5).unwrap();
    }
    assert!((s.integrate(&rho) - 1.0).abs() <= 1e-10);
    assert!(rho.min() > 0.0);
}

#[test]
fn constant_drift_on_the_cycle() {
    let n = 16;
    let s = GraphSpace::cycle(n, 1.0).unwrap();
    let w = Cocycle::constant(&s, 2.0);
    let uniform = ScalarField::from_element(n, 1.0);
    assert!(drift_divergence(&s, &w, &uniform).amax() <= 1e-12);
    let grid = TimeGrid::new(-1.0, 0.05).unwrap();
    let drift = DriftPath::constant(grid, &w);
    let rho = fp_solve(&s, &uniform, &drift, 1.0, 1.0).unwrap().rho;
    assert!(rho.values().iter().all(|r| (r - &uniform).amax() <= 1e-12));
    assert!((drift_inner(&s, &drift, &drift, &rho).unwrap().total - 4.0).abs() <= 1e-12);

    let p = ViscousProblem::new(&s, &w, &Potential::Zero, 1.0, ScalarField::zeros(n), grid).unwrap();
    let u = solve_viscous_hj_direct(&p).unwrap();
    let k = drift_divergence_constant(&s, &w, &u, &rho).unwrap();
    assert!(k.is_finite() && k <= 1e-10);
}

#[test]
fn trivial_scenario_has_zero_value() {
    let s = GraphSpace::cycle(8, 1.0).unwrap();
    let z = Cocycle::zero(&s);
    let grid = TimeGrid::new(-1.0, 0.1).unwrap();
    let p = ViscousProblem::new(&s, &z, &Potential::Zero, 1.0, ScalarField::zeros(8), grid).unwrap();
    let nu = ScalarField::from_element(8, 1.0);
    let rho = fp_solve(&s, &nu, &DriftPath::constant(grid, &z), 1.0, 1.0).unwrap().rho;
    let value = stochastic_value(&p, &rho, &DriftPath::constant(grid, &z), 1.0).unwrap();
    assert_eq!(value.value, 0.0);
    let report = duality_check(&p, &nu, 1.0).unwrap();
    assert!(report.lhs.abs() < 1e-14 && report.gap.abs() < 1e-14);
}

#[test]
fn duality_gap_shrinks_with_the_time_step() {
    let n = 12;
    let s = GraphSpace::cycle(n, 1.0).unwrap();
    let w = Cocycle::constant(&s, 1.0);
    let pot = Potential::Static(cosine_profile(&s, 0.5, 1.0));
    let nu = {
        let f = cosine_profile(&s, 0.5, 1.0).add_scalar(1.0);
        let mass = s.integrate(&f);
        f / mass
    };
    let mut gaps = Vec::new();
    for dt in [1e-2, 1e-3, 1e-4] {
        let grid = TimeGrid::new(-0.5, dt).unwrap();
        let p = ViscousProblem::new(&s, &w, &pot, 1.0, cosine_profile(&s, 0.3, 1.0), grid).unwrap();
        gaps.push(duality_check(&p, &nu, 1.0).unwrap().gap.abs());
    }
    let order = (gaps[0] / gaps[2]).log10() / 2.0;
    assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1] && order >= 0.8, "{gaps:?}");
}

#[test]
fn stochastic_value_rejects_non_solutions() {
    let s = GraphSpace::cycle(6, 1.0).unwrap();
    let w = Cocycle::constant(&s, 1.0);
    let grid = TimeGrid::new(-0.2, 0.1).unwrap();
    let p = ViscousProblem::new(&s, &w, &Potential::Zero, 1.0, ScalarField::zeros(6), grid).unwrap();
    let bumpy = ScalarField::from_fn(6, |i, _| if i == 0 { 2.0 } else { 0.8 });
    let rho = ScalarFieldPath::new(grid, vec![bumpy.clone(), bumpy.clone(), bumpy]).unwrap();
    let err = stochastic_value(&p, &rho, &DriftPath::constant(grid, &w), 1.0).unwrap_err();
    assert!(matches!(err, Error::FpResidual { step: 0, .. }));
    let bad = ScalarField::from_element(6, 2.0);
    assert!(fp_solve(&s, &bad, &DriftPath::constant(grid, &w), 1.0, 1.0).is_err());
}
