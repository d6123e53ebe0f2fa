//! Minimizing movement for the time-reversed linear equation on the weighted cover.
//!
//! In forward time `s = -t`, `w(s) = v(-s)` solves `∂_s w = (1/2β)Δw + B w`.
//! Upstairs, with the weight `m̂ = e^{2βφ} m̃`, the drift part of the generator
//! is the weighted Laplacian `(1/2β) e^{-2βφ} div(e^{2βφ} ∇·)`, so the flow is
//! the `L²(m̂)` gradient flow of
//! `F(w) = Σ [(1/4β) Γ(w,w) - (β/4) Γ̂(ω,ω) w² - (β/2) V w²] m̂`.
//! Each implicit step minimizes `(1/2τ) ‖w - w_n‖²_{m̂} + F(w)`. Unknowns live
//! on the fundamental domain; an edge from `(x,0)` to the lift `(y,h)` of a
//! neighbor carries the conductance `w(xy) e^{2βφ_e}`, with `φ_e` the
//! midpoint value `(φ(x,0) + φ(y,h))/2` or the value at the lifted tail of
//! the edge. Dividing the optimality condition at `(x,0)` by `m̂(x,0)` gives
//! the row
//! `(1/τ - βV - (β/2)Γ̂(ω,ω)) w(x) - (1/(2β m(x))) Σ_y w(xy) F_xy (w(y) - w(x)) = w_n(x)/τ`,
//! `F_xy = e^{2β(φ_e - φ(x,0))}`: a row-diagonally dominant M-matrix whenever
//! `1/τ > sup(βV + (β/2)Γ̂(ω,ω))`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{SchrodingerSolution, ViscousProblem};
use crate::cover::CoverWindow;
use crate::error::{Error, Result};
use crate::grid::ScalarFieldPath;
use crate::space::ScalarField;

/// Where along a crossing edge the weight `e^{2βφ}` is sampled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WeightConvention {
    #[default]
    Midpoint,
    /// At the lift of the edge's reference tail.
    Left,
}

/// Minimum-principle record of one step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GradientFlowStep {
    pub inf_before: f64,
    pub inf_after: f64,
    /// `(1 - D₅τ) · inf_before`.
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradientFlowDiagnostics {
    pub tau: f64,
    /// `D₅ = 2β sup|V| + 1e-9`.
    pub d5: f64,
    pub steps: Vec<GradientFlowStep>,
    /// Steps with `inf_after < bound`.
    pub violations: usize,
}

/// Runs the scheme with `τ = Δt` of the problem grid and returns the
/// time-reversed iterates: `v(t_k) = w_{K-k}`.
pub fn gradient_flow_solve(
    problem: &ViscousProblem,
    cover: &CoverWindow,
    convention: WeightConvention,
) -> Result<SchrodingerSolution> {
    let space = problem.space;
    let beta = problem.beta;
    let tau = problem.grid.dt();
    if !problem.potential.is_static() {
        return Err(Error::InvalidArgument("the gradient-flow scheme needs a time-independent potential".into()));
    }
    let sup_v = problem.potential.sup_abs();
    if !(1.0 / (2.0 * tau) > beta * sup_v) {
        return Err(Error::InvalidArgument(format!(
            "step {tau} violates 1/(2τ) > β sup|V| = {}",
            beta * sup_v
        )));
    }
    let growth = problem.growth_bound();
    if !(1.0 / tau > growth) {
        return Err(Error::InvalidArgument(format!(
            "step {tau} violates 1/τ > sup(βV + (β/2)Γ̂(ω,ω)) = {growth}"
        )));
    }
    if (cover.beta() - beta).abs() > 0.0 {
        return Err(Error::InvalidArgument("cover was built for a different β".into()));
    }
    cover.check_reach(space, 1)?;

    let n = space.vertex_count();
    let v_static = problem.potential.at(0.0, n);
    let domain = cover.fundamental_domain();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for x in 0..n {
        let lx = domain[x];
        let phi_x = cover.phi(lx);
        let scale = 1.0 / (2.0 * beta * space.measure()[x]);
        for nb in cover.neighbors(lx) {
            let y = cover.project(nb.vertex);
            let phi_e = match convention {
                WeightConvention::Midpoint => 0.5 * (phi_x + cover.phi(nb.vertex)),
                WeightConvention::Left => {
                    if nb.sign > 0.0 {
                        phi_x
                    } else {
                        cover.phi(nb.vertex)
                    }
                }
            };
            let c = scale * space.edges()[nb.base_edge].conductance * (2.0 * beta * (phi_e - phi_x)).exp();
            a[(x, y)] -= c;
            a[(x, x)] += c;
        }
        a[(x, x)] += 1.0 / tau - beta * v_static[x] - 0.5 * beta * problem.gamma_hat_form()[x];
    }
    let lu = a.lu();
    if !lu.is_invertible() {
        return Err(Error::Singular("minimizing-movement step".into()));
    }

    let d5 = 2.0 * beta * sup_v + 1e-9;
    let k_steps = problem.grid.steps();
    let mut iterates = Vec::with_capacity(k_steps + 1);
    iterates.push(problem.final_v());
    let mut steps = Vec::with_capacity(k_steps);
    let mut violations = 0;
    for _ in 0..k_steps {
        let prev = iterates.last().unwrap();
        let next: ScalarField = lu
            .solve(&(prev / tau))
            .ok_or_else(|| Error::Singular("minimizing-movement step".into()))?;
        let inf_before = prev.min();
        let inf_after = next.min();
        let bound = (1.0 - d5 * tau) * inf_before;
        if inf_after < bound {
            violations += 1;
        }
        steps.push(GradientFlowStep { inf_before, inf_after, bound });
        iterates.push(next);
    }
    iterates.reverse();
    let mut solution = SchrodingerSolution::new(ScalarFieldPath::new(problem.grid, iterates)?)?;
    solution.gradient_flow = Some(GradientFlowDiagnostics { tau, d5, steps, violations });
    Ok(solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::Cocycle;
    use crate::grid::TimeGrid;
    use crate::potential::Potential;
    use crate::space::{GraphSpace, HeatBackend};

    #[test]
    fn zero_form_is_implicit_euler_heat_flow() {
        let s = GraphSpace::cycle(10, 1.0).unwrap();
        let z = Cocycle::zero(&s);
        let u0 = ScalarField::from_fn(10, |i, _| (i as f64).sin());
        let grid = TimeGrid::new(-0.1, 0.01).unwrap();
        let p = ViscousProblem::new(&s, &z, &Potential::Zero, 1.0, u0, grid).unwrap();
        let cover = CoverWindow::build(&s, &z, 1, 1.0).unwrap();
        let sol = gradient_flow_solve(&p, &cover, WeightConvention::Midpoint).unwrap();
        let heat = s
            .heat_flow(&p.final_v(), 0.1, 1.0, HeatBackend::ImplicitEuler { substeps: Some(10) })
            .unwrap();
        assert!((sol.v.initial_value() - heat).amax() < 1e-12);
        assert_eq!(sol.v.final_value(), &p.final_v());
    }

    #[test]
    fn rejects_large_steps() {
        let s = GraphSpace::cycle(6, 1.0).unwrap();
        let z = Cocycle::zero(&s);
        let pot = Potential::Static(ScalarField::from_element(6, 10.0));
        let grid = TimeGrid::new(-0.5, 0.1).unwrap();
        let p = ViscousProblem::new(&s, &z, &pot, 1.0, ScalarField::zeros(6), grid).unwrap();
        let cover = CoverWindow::build(&s, &z, 1, 1.0).unwrap();
        assert!(matches!(
            gradient_flow_solve(&p, &cover, WeightConvention::Midpoint),
            Err(Error::InvalidArgument(_))
        ));
    }
}
