//! Deterministic value function by backward Bellman recursion over walks.
//!
//! A walk makes one move per time step: stay, or hop along one edge. Moving
//! from `x` to `y` during step `k` costs
//! `d(x,y)² / (2Δt) - ω(x→y) - V(t_k, x) Δt`, and the walk pays `g` at its end.
//! The value `u_k(x)` is the least total cost of a walk started at `x` at time
//! `t_k`. Ties go to the smallest target index, so minimizers are reproducible.

use serde::Serialize;

use crate::cover::CoverWindow;
use crate::error::{Error, Result};
use crate::forms::{Cocycle, VertexPath};
use crate::grid::{ScalarFieldPath, TimeGrid};
use crate::potential::Potential;
use crate::space::{GraphSpace, ScalarField};

/// Data of the action-minimization problem on `[t, 0]`.
#[derive(Clone, Debug)]
pub struct InviscidProblem<'a> {
    pub space: &'a GraphSpace,
    pub form: &'a Cocycle,
    pub potential: &'a Potential,
    pub final_value: ScalarField,
    pub grid: TimeGrid,
}

impl<'a> InviscidProblem<'a> {
    pub fn new(
        space: &'a GraphSpace,
        form: &'a Cocycle,
        potential: &'a Potential,
        final_value: ScalarField,
        grid: TimeGrid,
    ) -> Result<Self> {
        form.check_space(space)?;
        potential.check(space)?;
        space.check_len(&final_value)?;
        if final_value.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("final condition has non-finite values".into()));
        }
        Ok(InviscidProblem { space, form, potential, final_value, grid })
    }

    /// The same problem with another final condition.
    pub fn with_final_value(&self, final_value: ScalarField) -> Result<Self> {
        Self::new(self.space, self.form, self.potential, final_value, self.grid)
    }

    /// Cost of one move `x -> y` (stay if equal), without the potential term.
    fn move_cost(&self, x: usize, y: usize) -> Result<f64> {
        let d = self.space.neighbor_distance(x, y).ok_or(Error::NotAdjacent(x, y))?;
        Ok(d * d / (2.0 * self.grid.dt()) - self.form.value(self.space, x, y)?)
    }
}

/// Values at every node plus the argmin move of every vertex at every step.
#[derive(Clone, Debug)]
pub struct ValueTable {
    pub values: ScalarFieldPath,
    /// `next[k][x]` is the vertex the minimizer from `(t_k, x)` moves to.
    pub next: Vec<Vec<usize>>,
}

impl ValueTable {
    /// Vertex sequence of the minimizing walk from `start` at the first node.
    pub fn minimizer(&self, start: usize) -> Vec<usize> {
        let mut path = vec![start];
        let mut x = start;
        for step in &self.next {
            x = step[x];
            path.push(x);
        }
        path
    }
}

/// Candidate moves per vertex, sorted by target, with their static cost.
struct MoveSet {
    moves: Vec<Vec<(usize, f64)>>,
}

fn bellman(
    moves: &MoveSet,
    grid: TimeGrid,
    potential: impl Fn(f64, usize) -> f64,
    final_value: ScalarField,
) -> Result<ValueTable> {
    let n = moves.moves.len();
    let k_steps = grid.steps();
    let dt = grid.dt();
    let mut values = vec![ScalarField::zeros(n); k_steps + 1];
    let mut next = vec![vec![0; n]; k_steps];
    values[k_steps] = final_value;
    for k in (0..k_steps).rev() {
        let t = grid.time(k);
        let (head, tail) = values.split_at_mut(k + 1);
        let later = &tail[0];
        let now = &mut head[k];
        for x in 0..n {
            let mut best = f64::INFINITY;
            let mut arg = x;
            for &(y, c) in &moves.moves[x] {
                let v = c + later[y];
                if v < best {
                    best = v;
                    arg = y;
                }
            }
            now[x] = best - potential(t, x) * dt;
            next[k][x] = arg;
        }
    }
    Ok(ValueTable { values: ScalarFieldPath::new(grid, values)?, next })
}

fn base_moves(problem: &InviscidProblem) -> Result<MoveSet> {
    let space = problem.space;
    let moves = (0..space.vertex_count())
        .map(|x| {
            let mut list = vec![(x, 0.0)];
            for nb in space.neighbors(x) {
                list.push((nb.vertex, problem.move_cost(x, nb.vertex)?));
            }
            list.sort_by_key(|m| m.0);
            Ok(list)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MoveSet { moves })
}

/// Backward recursion from `u_K = g`.
pub fn solve_value(problem: &InviscidProblem) -> Result<ValueTable> {
    let moves = base_moves(problem)?;
    let pot = problem.potential;
    bellman(&moves, problem.grid, |t, x| pot.value(t, x), problem.final_value.clone())
}

/// Minimizing walk from `start` at the first node.
pub fn extract_minimizer(problem: &InviscidProblem, table: &ValueTable, start: usize) -> Result<VertexPath> {
    if start >= problem.space.vertex_count() {
        return Err(Error::InvalidArgument(format!("no vertex {start}")));
    }
    VertexPath::new(problem.space, table.minimizer(start))
}

/// Discrete action of a walk with one move per step, including the final cost.
pub fn action(problem: &InviscidProblem, path: &VertexPath) -> Result<f64> {
    let v = path.vertices();
    if v.len() != problem.grid.nodes() {
        return Err(Error::DimensionMismatch { expected: problem.grid.nodes(), got: v.len() });
    }
    let dt = problem.grid.dt();
    let mut total = 0.0;
    for k in 0..problem.grid.steps() {
        total += problem.move_cost(v[k], v[k + 1])? - problem.potential.value(problem.grid.time(k), v[k]) * dt;
    }
    Ok(total + problem.final_value[v[v.len() - 1]])
}

/// Outcome of the base-versus-cover comparison.
#[derive(Clone, Debug, Serialize)]
pub struct CoverCheck {
    /// `max_{k,x} |v_k(x,0) + φ(x,0) - u_k(x)|`.
    pub max_discrepancy: f64,
    pub h_max: usize,
}

/// Solves the form-free problem on the cover with final data `g∘σ - φ` and
/// compares `v + φ` on the zero sheet with the base value.
pub fn cover_equivalence_check(problem: &InviscidProblem, cover: &CoverWindow) -> Result<CoverCheck> {
    cover.check_reach(problem.space, problem.grid.steps())?;
    let base = solve_value(problem)?;
    let space = problem.space;
    let dt = problem.grid.dt();
    let moves = (0..cover.lifted_vertex_count())
        .map(|idx| {
            let mut list = vec![(idx, 0.0)];
            for nb in cover.neighbors(idx) {
                let d = space.edge_distances()[nb.base_edge];
                list.push((nb.vertex, d * d / (2.0 * dt)));
            }
            list.sort_by_key(|m| m.0);
            list
        })
        .collect();
    let final_value = ScalarField::from_fn(cover.lifted_vertex_count(), |idx, _| {
        problem.final_value[cover.project(idx)] - cover.phi(idx)
    });
    let pot = problem.potential;
    let lifted = bellman(&MoveSet { moves }, problem.grid, |t, idx| pot.value(t, cover.project(idx)), final_value)?;
    let domain = cover.fundamental_domain();
    let mut worst = 0.0_f64;
    for k in 0..problem.grid.nodes() {
        let u = base.values.at(k);
        let v = lifted.values.at(k);
        for (x, &idx) in domain.iter().enumerate() {
            worst = worst.max((v[idx] + cover.phi(idx) - u[x]).abs());
        }
    }
    Ok(CoverCheck { max_discrepancy: worst, h_max: cover.h_max() })
}

/// Solves both problems and reports whether `u₋ <= u₊ + 1e-12` at every node.
/// The final conditions must satisfy `g₋ <= g₊`.
pub fn comparison_test(lower: &InviscidProblem, upper: &InviscidProblem) -> Result<bool> {
    if lower.grid != upper.grid || lower.form != upper.form || lower.potential != upper.potential {
        return Err(Error::InvalidArgument("comparison needs the same form, potential and grid".into()));
    }
    if let Some(x) = (0..lower.final_value.len()).find(|&x| lower.final_value[x] > upper.final_value[x]) {
        return Err(Error::NotOrdered { vertex: x });
    }
    let a = solve_value(lower)?;
    let b = solve_value(upper)?;
    Ok((0..lower.grid.nodes()).all(|k| {
        a.values.at(k).iter().zip(b.values.at(k).iter()).all(|(l, u)| *l <= u + 1e-12)
    }))
}

/// `max_k max_{x~y, d(x,y) <= radius} |u_k(x) - u_k(y)|`.
pub fn modulus_of_continuity(space: &GraphSpace, values: &ScalarFieldPath, radius: f64) -> f64 {
    let mut worst = 0.0_f64;
    for u in values.values() {
        for (k, e) in space.edges().iter().enumerate() {
            if space.edge_distances()[k] <= radius {
                worst = worst.max((u[e.tail] - u[e.head]).abs());
            }
        }
    }
    worst
}
