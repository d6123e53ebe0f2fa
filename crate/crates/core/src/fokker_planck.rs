//! Drift inner products, the Fokker-Planck equation and the stochastic value.
//!
//! The drift divergence is defined as the exact adjoint of the drift pairing:
//! `D*(Yρ)` is the vertex field with
//! `Σ_x φ(x) D*(Yρ)(x) m(x) = Σ_x Γ̂(dφ, Y)(x) ρ(x) m(x)` for every `φ`,
//! which by summation by parts is
//! `D*(Yρ)(x) = -(1/(2m(x))) Σ_y w(xy) Y(x,y) (ρ(x) + ρ(y))`.
//! Densities evolve forward from `t` to `0` by
//! `∂_s ρ = (1/2β) Δρ + D*(Y_s ρ)`, which conserves mass exactly because
//! `D*` annihilates the pairing with constants.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms::{gamma_hat, Cocycle};
use crate::grid::{ScalarFieldPath, TimeGrid};
use crate::space::{GraphSpace, ScalarField};
use crate::viscous::{solve_viscous_hj_direct, ViscousProblem};

const MASS_TOL: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-8;
const POSITIVITY_TOL: f64 = -1e-9;

/// A cocycle at every node of a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftPath {
    grid: TimeGrid,
    slices: Vec<Cocycle>,
}

impl DriftPath {
    pub fn new(grid: TimeGrid, slices: Vec<Cocycle>) -> Result<Self> {
        if slices.len() != grid.nodes() {
            return Err(Error::DimensionMismatch { expected: grid.nodes(), got: slices.len() });
        }
        Ok(DriftPath { grid, slices })
    }

    /// The same cocycle at every node.
    pub fn constant(grid: TimeGrid, form: &Cocycle) -> Self {
        DriftPath { grid, slices: vec![form.clone(); grid.nodes()] }
    }

    /// `Y_k = ω - du_k`.
    pub fn optimal(space: &GraphSpace, form: &Cocycle, u: &ScalarFieldPath) -> Result<Self> {
        let slices = u
            .values()
            .iter()
            .map(|uk| Ok(form.sub(&Cocycle::exact(space, uk)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(*u.grid(), slices)
    }

    /// `self + ε · other`, node by node.
    pub fn perturbed(&self, other: &DriftPath, eps: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::InvalidArgument("drift paths live on different grids".into()));
        }
        Ok(DriftPath {
            grid: self.grid,
            slices: self.slices.iter().zip(&other.slices).map(|(a, b)| a.add(&b.scale(eps))).collect(),
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn at(&self, k: usize) -> &Cocycle {
        &self.slices[k]
    }
}

/// `Σ_x Γ̂(a, b)(x) ρ(x) m(x)`.
pub fn slice_inner(space: &GraphSpace, a: &Cocycle, b: &Cocycle, rho: &ScalarField) -> f64 {
    space.inner(&gamma_hat(space, a, b), rho)
}

/// Per-node slice pairings and their trapezoid time integral.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriftInner {
    pub slices: Vec<f64>,
    pub total: f64,
}

fn trapezoid(grid: &TimeGrid, slices: &[f64]) -> f64 {
    let k = grid.steps();
    if k == 0 {
        return 0.0;
    }
    let inner: f64 = slices[1..k].iter().sum();
    grid.dt() * (0.5 * slices[0] + inner + 0.5 * slices[k])
}

/// `∫ Σ_x Γ̂(a_s, b_s) ρ_s m ds`, trapezoid rule in time.
pub fn drift_inner(space: &GraphSpace, a: &DriftPath, b: &DriftPath, rho: &ScalarFieldPath) -> Result<DriftInner> {
    if a.grid != b.grid || a.grid != *rho.grid() {
        return Err(Error::InvalidArgument("drift paths and density live on different grids".into()));
    }
    let slices: Vec<f64> = (0..a.grid.nodes())
        .map(|k| slice_inner(space, &a.slices[k], &b.slices[k], rho.at(k)))
        .collect();
    let total = trapezoid(&a.grid, &slices);
    Ok(DriftInner { slices, total })
}

/// `D*(Yρ)(x) = -(1/(2m(x))) Σ_y w(xy) Y(x,y) (ρ(x) + ρ(y))`.
pub fn drift_divergence(space: &GraphSpace, drift: &Cocycle, rho: &ScalarField) -> ScalarField {
    ScalarField::from_fn(space.vertex_count(), |x, _| {
        let s: f64 = space
            .neighbors(x)
            .iter()
            .map(|nb| {
                space.edges()[nb.edge].conductance * nb.sign * drift.edge_values()[nb.edge] * (rho[x] + rho[nb.vertex])
            })
            .sum();
        -s / (2.0 * space.measure()[x])
    })
}

/// Matrix of `ρ ↦ D*(Yρ)`.
pub fn drift_divergence_matrix(space: &GraphSpace, drift: &Cocycle) -> DMatrix<f64> {
    let n = space.vertex_count();
    let mut d = DMatrix::zeros(n, n);
    for x in 0..n {
        let scale = -1.0 / (2.0 * space.measure()[x]);
        for nb in space.neighbors(x) {
            let c = scale * space.edges()[nb.edge].conductance * nb.sign * drift.edge_values()[nb.edge];
            d[(x, x)] += c;
            d[(x, nb.vertex)] += c;
        }
    }
    d
}

fn check_density(space: &GraphSpace, rho: &ScalarField) -> Result<()> {
    space.check_len(rho)?;
    if let Some(x) = rho.iter().position(|&r| !(r > 0.0) || !r.is_finite()) {
        return Err(Error::InvalidArgument(format!("initial density must be positive, vertex {x} has {}", rho[x])));
    }
    let mass = space.integrate(rho);
    if (mass - 1.0).abs() > MASS_TOL {
        return Err(Error::InvalidArgument(format!("initial density has mass {mass}, expected 1")));
    }
    Ok(())
}

/// One step `(I/Δt - (1/2β)Δ - θ D*_{new}) ρ_{k+1} = ρ_k/Δt + (1-θ) D*_{old} ρ_k`.
pub fn fp_step(
    space: &GraphSpace,
    rho: &ScalarField,
    drift_old: &Cocycle,
    drift_new: &Cocycle,
    dt: f64,
    beta: f64,
    theta: f64,
) -> Result<ScalarField> {
    let n = space.vertex_count();
    let lhs = DMatrix::<f64>::identity(n, n) / dt
        - space.laplacian_matrix() / (2.0 * beta)
        - drift_divergence_matrix(space, drift_new) * theta;
    let rhs = rho / dt + drift_divergence(space, drift_old, rho) * (1.0 - theta);
    lhs.lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("Fokker-Planck step".into()))
}

/// Densities on the grid plus positivity monitoring.
#[derive(Clone, Debug)]
pub struct FpSolution {
    pub rho: ScalarFieldPath,
    pub min_density: f64,
    /// Nodes where the density dipped below `-1e-9`.
    pub positivity_losses: Vec<usize>,
}

/// Evolves `ν` forward from the first node under the drift path.
pub fn fp_solve(space: &GraphSpace, nu: &ScalarField, drift: &DriftPath, beta: f64, theta: f64) -> Result<FpSolution> {
    check_density(space, nu)?;
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidArgument(format!("θ must lie in [0, 1], got {theta}")));
    }
    let grid = drift.grid;
    let mut values = Vec::with_capacity(grid.nodes());
    values.push(nu.clone());
    let mut losses = Vec::new();
    let mut min_density = nu.min();
    for k in 0..grid.steps() {
        let next = fp_step(space, &values[k], &drift.slices[k], &drift.slices[k + 1], grid.dt(), beta, theta)?;
        let drift_mass = (space.integrate(&next) - 1.0).abs();
        if drift_mass > MASS_TOL {
            return Err(Error::MassDrift { node: k + 1, drift: drift_mass });
        }
        let low = next.min();
        if low < POSITIVITY_TOL {
            log::warn!("density dropped to {low:e} at node {}; consider a smaller time step", k + 1);
            losses.push(k + 1);
        }
        min_density = min_density.min(low);
        values.push(next);
    }
    Ok(FpSolution { rho: ScalarFieldPath::new(grid, values)?, min_density, positivity_losses: losses })
}

fn step_residuals(space: &GraphSpace, rho: &ScalarFieldPath, drift: &DriftPath, beta: f64, theta: f64) -> Vec<f64> {
    let grid = drift.grid;
    let dt = grid.dt();
    (0..grid.steps())
        .map(|k| {
            let (a, b) = (rho.at(k), rho.at(k + 1));
            let rate = space.laplacian(b) / (2.0 * beta)
                + drift_divergence(space, &drift.slices[k + 1], b) * theta
                + drift_divergence(space, &drift.slices[k], a) * (1.0 - theta);
            (b - a - rate * dt).amax()
        })
        .collect()
}

/// Largest step residual `‖ρ_{k+1} - ρ_k - Δt(...)‖∞` of a candidate pair.
pub fn fp_residual(space: &GraphSpace, rho: &ScalarFieldPath, drift: &DriftPath, beta: f64, theta: f64) -> f64 {
    step_residuals(space, rho, drift, beta, theta).into_iter().fold(0.0, f64::max)
}

/// The terms of the stochastic value of a candidate `(ρ, Y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StochasticValue {
    /// `½⟨Y, Y⟩`.
    pub kinetic: f64,
    /// `⟨ω, Y⟩`.
    pub homological: f64,
    /// `∫ Σ V ρ m`.
    pub potential: f64,
    /// `Σ u₀ ρ(0) m`.
    pub terminal: f64,
    pub value: f64,
}

/// `½⟨Y,Y⟩ - ⟨ω,Y⟩ - ∫ΣVρm + Σu₀ρ(0)m` for a pair solving the discrete equation.
pub fn stochastic_value(
    problem: &ViscousProblem,
    rho: &ScalarFieldPath,
    drift: &DriftPath,
    theta: f64,
) -> Result<StochasticValue> {
    let space = problem.space;
    if drift.grid != problem.grid || *rho.grid() != problem.grid {
        return Err(Error::InvalidArgument("candidate lives on a different grid".into()));
    }
    let residuals = step_residuals(space, rho, drift, problem.beta, theta);
    if let Some(step) = residuals.iter().position(|r| !(*r <= RESIDUAL_TOL)) {
        return Err(Error::FpResidual { step, residual: residuals[step] });
    }
    let omega = DriftPath::constant(drift.grid, problem.form);
    let kinetic = 0.5 * drift_inner(space, drift, drift, rho)?.total;
    let homological = drift_inner(space, &omega, drift, rho)?.total;
    let slices: Vec<f64> = (0..problem.grid.nodes())
        .map(|k| space.inner(&problem.potential.at(problem.grid.time(k), space.vertex_count()), rho.at(k)))
        .collect();
    let potential = trapezoid(&problem.grid, &slices);
    let terminal = space.inner(&problem.final_u, rho.final_value());
    Ok(StochasticValue { kinetic, homological, potential, terminal, value: kinetic - homological - potential + terminal })
}

/// Both sides of the duality for one candidate drift.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DualityReport {
    /// `Σ u(t) ν m`.
    pub lhs: f64,
    /// Stochastic value of the candidate.
    pub rhs: f64,
    /// `rhs - lhs`.
    pub gap: f64,
    pub dt: f64,
    pub vertices: usize,
    pub min_density: f64,
}

/// Duality with the optimal drift `ω - du`, `u` from the direct solver.
pub fn duality_check(problem: &ViscousProblem, nu: &ScalarField, theta: f64) -> Result<DualityReport> {
    let u = solve_viscous_hj_direct(problem)?;
    let drift = DriftPath::optimal(problem.space, problem.form, &u)?;
    duality_for_drift(problem, nu, &u, &drift, theta)
}

/// Duality for an arbitrary candidate drift, given the value `u`.
pub fn duality_for_drift(
    problem: &ViscousProblem,
    nu: &ScalarField,
    u: &ScalarFieldPath,
    drift: &DriftPath,
    theta: f64,
) -> Result<DualityReport> {
    let fp = fp_solve(problem.space, nu, drift, problem.beta, theta)?;
    let value = stochastic_value(problem, &fp.rho, drift, theta)?;
    let lhs = problem.space.inner(u.initial_value(), nu);
    Ok(DualityReport {
        lhs,
        rhs: value.value,
        gap: value.value - lhs,
        dt: problem.grid.dt(),
        vertices: problem.space.vertex_count(),
        min_density: fp.min_density,
    })
}

/// Largest `‖D*((ω - du_k) ρ_k)‖_{L²} / ((1 + ‖u_k‖_{V²∞}) (‖ρ_k‖_{L²} + E(ρ_k)^{1/2}))`
/// along a solution: an empirical constant for the drift-divergence bound.
pub fn drift_divergence_constant(
    space: &GraphSpace,
    form: &Cocycle,
    u: &ScalarFieldPath,
    rho: &ScalarFieldPath,
) -> Result<f64> {
    let drift = DriftPath::optimal(space, form, u)?;
    let mut worst = 0.0_f64;
    for k in 0..u.grid().nodes() {
        let d = drift_divergence(space, drift.at(k), rho.at(k));
        let denom = (1.0 + space.v_norms(u.at(k)).v2) * (space.l2_norm(rho.at(k)) + space.energy(rho.at(k)).sqrt());
        if denom > 0.0 {
            worst = worst.max(space.l2_norm(&d) / denom);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Potential;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn divergence_is_the_adjoint_of_the_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let s = crate::testing::random_space(6, 4, &mut rng);
        let y = Cocycle::random(&s, 1.0, &mut rng);
        let rho = crate::testing::random_field(6, 0.1, 2.0, &mut rng);
        // Dense oracle: the pairing φ ↦ Σ Γ̂(dφ, Y) ρ m is linear; its matrix in
        // the basis of indicators, divided by m, is D*(Yρ).
        for x in 0..6 {
            let mut e = ScalarField::zeros(6);
            e[x] = 1.0;
            let pairing = slice_inner(&s, &Cocycle::exact(&s, &e).unwrap(), &y, &rho);
            let d = drift_divergence(&s, &y, &rho);
            assert!((pairing / s.measure()[x] - d[x]).abs() < 1e-12);
        }
        let m = drift_divergence_matrix(&s, &y);
        assert!((&m * &rho - drift_divergence(&s, &y, &rho)).amax() < 1e-12);
    }

    #[test]
    fn uniform_density_is_stationary_under_constant_drift() {
        let s = GraphSpace::cycle(16, 1.0).unwrap();
        let y = Cocycle::constant(&s, 3.0);
        assert!(drift_divergence(&s, &y, &ScalarField::from_element(16, 1.0)).amax() < 1e-12);
    }

    #[test]
    fn mass_is_conserved_under_random_drifts() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let s = crate::testing::random_space(8, 4, &mut rng);
        let grid = TimeGrid::from_steps(1000, 1e-3).unwrap();
        let slices = (0..grid.nodes()).map(|_| Cocycle::random(&s, 0.5, &mut rng)).collect();
        let drift = DriftPath::new(grid, slices).unwrap();
        let nu = ScalarField::from_element(8, 1.0);
        let fp = fp_solve(&s, &nu, &drift, 1.0, 0.5).unwrap();
        for k in 0..grid.nodes() {
            assert!((s.integrate(fp.rho.at(k)) - 1.0).abs() <= 1e-10);
        }
        assert!(fp_residual(&s, &fp.rho, &drift, 1.0, 0.5) < 1e-10);
    }

    #[test]
    fn constant_drift_inner_product() {
        let s = GraphSpace::cycle(20, 1.0).unwrap();
        let w = Cocycle::constant(&s, 2.0);
        let grid = TimeGrid::new(-1.0, 0.01).unwrap();
        let y = DriftPath::constant(grid, &w);
        let rho = ScalarFieldPath::new(grid, vec![ScalarField::from_element(20, 1.0); grid.nodes()]).unwrap();
        let r = drift_inner(&s, &y, &y, &rho).unwrap();
        assert!((r.total - 4.0).abs() < 1e-10);
        assert!((trapezoid(&grid, &r.slices) - r.total).abs() == 0.0);
    }

    #[test]
    fn trivial_duality() {
        let s = GraphSpace::cycle(8, 1.0).unwrap();
        let z = Cocycle::zero(&s);
        let grid = TimeGrid::new(-0.5, 0.01).unwrap();
        let p = ViscousProblem::new(&s, &z, &Potential::Zero, 1.0, ScalarField::zeros(8), grid).unwrap();
        let r = duality_check(&p, &ScalarField::from_element(8, 1.0), 0.5).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
    }

    #[test]
    fn rejects_bad_initial_density() {
        let s = GraphSpace::cycle(4, 1.0).unwrap();
        let grid = TimeGrid::new(-0.1, 0.1).unwrap();
        let drift = DriftPath::constant(grid, &Cocycle::zero(&s));
        let nu = ScalarField::from_vec(vec![2.0, 2.0, 0.0, 0.0]);
        assert!(fp_solve(&s, &nu, &drift, 1.0, 0.5).is_err());
    }
}
