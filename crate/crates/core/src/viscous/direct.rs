//! Direct integration of the viscous equation for `u`.

use super::ViscousProblem;
use crate::error::{Error, Result};
use crate::grid::ScalarFieldPath;
use crate::space::ScalarField;

/// `½ Γ̂(du - ω, du - ω) + V(t)`, edge values `(u(y) - u(x)) - ω(x,y)`.
pub(crate) fn hamiltonian(problem: &ViscousProblem, u: &ScalarField, t: f64) -> ScalarField {
    let space = problem.space;
    ScalarField::from_fn(space.vertex_count(), |x, _| {
        let s: f64 = space
            .neighbors(x)
            .iter()
            .map(|nb| {
                let e = (u[nb.vertex] - u[x]) - nb.sign * problem.form.edge_values()[nb.edge];
                space.edges()[nb.edge].conductance * e * e
            })
            .sum();
        0.5 * s / (2.0 * space.measure()[x]) + problem.potential.value(t, x)
    })
}

/// Semi-implicit backward stepping, implicit in `Δ` and explicit in the
/// Hamiltonian: `(I - (Δt/2β)Δ) u_k = u_{k+1} - Δt H(t_{k+1}, u_{k+1})`.
pub fn solve_viscous_hj_direct(problem: &ViscousProblem) -> Result<ScalarFieldPath> {
    let grid = problem.grid;
    let n = problem.space.vertex_count();
    let dt = grid.dt();
    let lhs = nalgebra::DMatrix::<f64>::identity(n, n) - problem.space.laplacian_matrix() * (dt / (2.0 * problem.beta));
    let lu = lhs.lu();
    let blow_up = 1e12 * (1.0 + problem.final_u.amax());
    let mut values = vec![problem.final_u.clone(); grid.nodes()];
    for k in (0..grid.steps()).rev() {
        let h = hamiltonian(problem, &values[k + 1], grid.time(k + 1));
        let rhs = &values[k + 1] - h * dt;
        let next = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("implicit diffusion step".into()))?;
        if next.iter().any(|x| !x.is_finite() || x.abs() > blow_up) {
            return Err(Error::StepRejected(format!(
                "explicit Hamiltonian blew up at node {k}; reduce the time step"
            )));
        }
        values[k] = next;
    }
    ScalarFieldPath::new(grid, values)
}
