//! Method of lines: the linear system `∂_t v = -A(t) v`, `A = (1/2β)Δ + B_t`,
//! stepped backward from `t = 0`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{SchrodingerSolution, ViscousProblem};
use crate::error::{Error, Result};
use crate::grid::ScalarFieldPath;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ImplicitEuler,
    #[default]
    CrankNicolson,
}

impl Scheme {
    /// Weight of the new time level.
    fn theta(self) -> f64 {
        match self {
            Scheme::ImplicitEuler => 1.0,
            Scheme::CrankNicolson => 0.5,
        }
    }
}

/// Steps `(I - θΔt A_k) v_k = (I + (1-θ)Δt A_{k+1}) v_{k+1}` from `v_K = v₀`.
pub fn mol_solve(problem: &ViscousProblem, scheme: Scheme) -> Result<SchrodingerSolution> {
    let grid = problem.grid;
    let n = problem.space.vertex_count();
    let dt = grid.dt();
    let theta = scheme.theta();
    let id = DMatrix::<f64>::identity(n, n);
    let static_potential = problem.potential.is_static();

    let mut values = vec![problem.final_v(); grid.nodes()];
    let mut cached = None;
    for k in (0..grid.steps()).rev() {
        let rebuild = !static_potential || cached.is_none();
        if rebuild {
            let a_new = problem.generator_matrix(grid.time(k));
            let a_old = if static_potential { a_new.clone() } else { problem.generator_matrix(grid.time(k + 1)) };
            let lhs = &id - &a_new * (theta * dt);
            let rhs = &id + &a_old * ((1.0 - theta) * dt);
            let lu = lhs.lu();
            if !lu.is_invertible() {
                return Err(Error::Singular(format!("method-of-lines step at node {k}")));
            }
            cached = Some((lu, rhs));
        }
        let (lu, rhs) = cached.as_ref().unwrap();
        let next = lu
            .solve(&(rhs * &values[k + 1]))
            .ok_or_else(|| Error::Singular(format!("method-of-lines step at node {k}")))?;
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::StepRejected(format!("non-finite values at node {k}")));
        }
        values[k] = next;
        if !static_potential {
            cached = None;
        }
    }
    SchrodingerSolution::new(ScalarFieldPath::new(grid, values)?)
}
