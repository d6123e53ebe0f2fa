//! The viscous equation and its Cole-Hopf transform.
//!
//! The value function solves, backward in time,
//! `∂_t u = -(1/2β) Δu + ½ Γ̂(du - ω, du - ω) + V`, `u(0) = u₀`.
//! With `v = e^{-βu}` and `ω` harmonic this becomes the linear equation
//! `∂_t v + (1/2β) Δv + B_t v = 0`, where
//! `B_t v = (β/2) Γ̂(ω,ω) v + Γ̂(ω, dv) + β V(t) v`.
//!
//! Solvers for `v`: [`picard_solve`] (fixed point of the Duhamel formula),
//! [`mol_solve`] (method of lines) and [`gradient_flow_solve`] (minimizing
//! movement on the weighted cover). [`solve_viscous_hj_direct`] integrates
//! the equation for `u` itself.

mod direct;
mod gradient_flow;
mod mol;
mod picard;

pub use direct::solve_viscous_hj_direct;
pub use gradient_flow::{gradient_flow_solve, GradientFlowDiagnostics, GradientFlowStep, WeightConvention};
pub use mol::{mol_solve, Scheme};
pub use picard::{picard_solve, PicardDiagnostics, PicardOptions, WindowReport};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms::{gamma_hat, Cocycle};
use crate::grid::{ScalarFieldPath, TimeGrid};
use crate::potential::Potential;
use crate::space::{GraphSpace, HeatBackend, ScalarField};

/// Tolerance on `max |div ω|` for a form to count as harmonic.
pub const HARMONIC_TOL: f64 = 1e-10;

/// Data of the viscous problem on `[t, 0]`.
#[derive(Clone, Debug)]
pub struct ViscousProblem<'a> {
    pub space: &'a GraphSpace,
    pub form: &'a Cocycle,
    pub potential: &'a Potential,
    pub beta: f64,
    /// Final condition `u₀ = u(0, ·)`.
    pub final_u: ScalarField,
    pub grid: TimeGrid,
    pub heat_backend: HeatBackend,
    gamma_hat_form: ScalarField,
}

impl<'a> ViscousProblem<'a> {
    pub fn new(
        space: &'a GraphSpace,
        form: &'a Cocycle,
        potential: &'a Potential,
        beta: f64,
        final_u: ScalarField,
        grid: TimeGrid,
    ) -> Result<Self> {
        form.check_space(space)?;
        potential.check(space)?;
        space.check_len(&final_u)?;
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
        }
        if final_u.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("final condition has non-finite values".into()));
        }
        let h = form.harmonicity(space, HARMONIC_TOL);
        if !h.harmonic {
            return Err(Error::NotHarmonic { residual: h.max_residual });
        }
        Ok(ViscousProblem {
            space,
            form,
            potential,
            beta,
            final_u,
            grid,
            heat_backend: HeatBackend::Spectral,
            gamma_hat_form: gamma_hat(space, form, form),
        })
    }

    /// Problem whose final condition is given as `v₀ = e^{-βu₀} > 0`.
    pub fn from_final_v(
        space: &'a GraphSpace,
        form: &'a Cocycle,
        potential: &'a Potential,
        beta: f64,
        final_v: &ScalarField,
        grid: TimeGrid,
    ) -> Result<Self> {
        let u = cole_hopf_log_field(final_v, beta).map_err(|(vertex, value)| Error::NonPositive {
            node: grid.steps(),
            vertex,
            value,
        })?;
        Self::new(space, form, potential, beta, u, grid)
    }

    pub fn with_heat_backend(mut self, backend: HeatBackend) -> Self {
        self.heat_backend = backend;
        self
    }

    pub fn final_v(&self) -> ScalarField {
        cole_hopf_exp_field(&self.final_u, self.beta)
    }

    /// `Γ̂(ω, ω)`.
    pub fn gamma_hat_form(&self) -> &ScalarField {
        &self.gamma_hat_form
    }

    /// `sup_{t,x} ((β/2) Γ̂(ω,ω) + β V)`.
    pub fn growth_bound(&self) -> f64 {
        let n = self.space.vertex_count();
        (0..n)
            .map(|x| {
                let v = match self.potential {
                    Potential::Zero => 0.0,
                    Potential::Static(p) => p[x],
                    Potential::Modulated { profile, .. } => profile[x].abs(),
                };
                0.5 * self.beta * self.gamma_hat_form[x] + self.beta * v
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Dense matrix of `B_t`.
    pub fn b_matrix(&self, t: f64) -> DMatrix<f64> {
        let n = self.space.vertex_count();
        let mut b = DMatrix::zeros(n, n);
        for x in 0..n {
            let scale = 1.0 / (2.0 * self.space.measure()[x]);
            for nb in self.space.neighbors(x) {
                let c = scale * self.space.edges()[nb.edge].conductance * nb.sign * self.form.edge_values()[nb.edge];
                b[(x, nb.vertex)] += c;
                b[(x, x)] -= c;
            }
            b[(x, x)] += 0.5 * self.beta * self.gamma_hat_form[x] + self.beta * self.potential.value(t, x);
        }
        b
    }

    /// Dense matrix of the generator `(1/2β) Δ + B_t`.
    pub fn generator_matrix(&self, t: f64) -> DMatrix<f64> {
        self.space.laplacian_matrix() / (2.0 * self.beta) + self.b_matrix(t)
    }
}

/// `B_t(v) = (β/2) Γ̂(ω,ω) v + Γ̂(ω, dv) + β V(t) v`.
pub fn b_operator(problem: &ViscousProblem, v: &ScalarField, t: f64) -> Result<ScalarField> {
    problem.space.check_len(v)?;
    let pair = problem.form.pair_with_gradient(problem.space, v);
    let beta = problem.beta;
    Ok(ScalarField::from_fn(v.len(), |x, _| {
        0.5 * beta * problem.gamma_hat_form[x] * v[x] + pair[x] + beta * problem.potential.value(t, x) * v[x]
    }))
}

/// A solution `v` of the linear equation, with solver diagnostics.
#[derive(Clone, Debug)]
pub struct SchrodingerSolution {
    pub v: ScalarFieldPath,
    pub picard: Option<PicardDiagnostics>,
    pub gradient_flow: Option<GradientFlowDiagnostics>,
}

impl SchrodingerSolution {
    pub(crate) fn new(v: ScalarFieldPath) -> Result<Self> {
        for (k, field) in v.values().iter().enumerate() {
            if let Some((x, &value)) = field.iter().enumerate().find(|(_, &a)| !(a > 0.0)) {
                return Err(Error::NonPositive { node: k, vertex: x, value });
            }
        }
        Ok(SchrodingerSolution { v, picard: None, gradient_flow: None })
    }

    /// `min_{k,x} v_k(x)`.
    pub fn min_value(&self) -> f64 {
        self.v.values().iter().map(|f| f.min()).fold(f64::INFINITY, f64::min)
    }
}

fn cole_hopf_log_field(v: &ScalarField, beta: f64) -> std::result::Result<ScalarField, (usize, f64)> {
    if let Some((x, &value)) = v.iter().enumerate().find(|(_, &a)| !(a > 0.0)) {
        return Err((x, value));
    }
    Ok(v.map(|a| -a.ln() / beta))
}

fn cole_hopf_exp_field(u: &ScalarField, beta: f64) -> ScalarField {
    u.map(|a| (-beta * a).exp())
}

/// `u = -(1/β) log v` at every node.
pub fn cole_hopf_log(v: &ScalarFieldPath, beta: f64) -> Result<ScalarFieldPath> {
    let values = v
        .values()
        .iter()
        .enumerate()
        .map(|(k, f)| cole_hopf_log_field(f, beta).map_err(|(vertex, value)| Error::NonPositive { node: k, vertex, value }))
        .collect::<Result<Vec<_>>>()?;
    ScalarFieldPath::new(*v.grid(), values)
}

/// `v = e^{-βu}` at every node.
pub fn cole_hopf_exp(u: &ScalarFieldPath, beta: f64) -> ScalarFieldPath {
    u.map(|f| cole_hopf_exp_field(f, beta))
}

/// Running envelopes of the a priori bounds, indexed by horizon `-t_k`
/// (from `0` outwards).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Envelopes {
    pub horizon: Vec<f64>,
    /// Running max of `max(‖u‖∞, ‖Γ(u,u)‖∞^{1/2})`.
    pub d1: Vec<f64>,
    /// Running max of `max(sup v, 1/inf v, ‖Γ(v,v)‖∞^{1/2})`.
    pub d2: Vec<f64>,
}

pub fn bound_envelopes(space: &GraphSpace, v: &ScalarFieldPath, beta: f64) -> Result<Envelopes> {
    let u = cole_hopf_log(v, beta)?;
    let grid = v.grid();
    let mut env = Envelopes { horizon: Vec::new(), d1: Vec::new(), d2: Vec::new() };
    let (mut d1, mut d2) = (0.0_f64, 0.0_f64);
    for k in (0..grid.nodes()).rev() {
        let uk = u.at(k);
        let vk = v.at(k);
        d1 = d1.max(uk.amax()).max(space.gamma(uk, uk).amax().sqrt());
        d2 = d2.max(vk.max()).max(1.0 / vk.min()).max(space.gamma(vk, vk).amax().sqrt());
        env.horizon.push(-grid.time(k));
        env.d1.push(d1);
        env.d2.push(d2);
    }
    Ok(env)
}

/// Comparison between the chart form of the generator and its `B` form.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeneratorCheck {
    /// Max entry of the difference between the generator assembled from the
    /// local primitives on vertex stars and the `B`-form generator.
    pub chart_defect: f64,
    /// Max entry of the difference between `e^{-βf}(1/2β)Δ(e^{βf}·) + βV`
    /// and the `B`-form generator; nonzero on graphs (chain-rule defect).
    pub exponential_defect: f64,
}

/// Builds the generator row by row from the local primitive `f` on the star
/// of each vertex (`f(x) = 0`, `f(y) = ω(x,y)`), in both the Leibniz form
/// `(1/2β)Δ + (β/2)Γ(f,f) + Γ(f,·) + βV` and the exponential form
/// `e^{-βf}(1/2β)Δ(e^{βf}·) + βV`, and compares each with the `B`-form matrix.
pub fn generator_consistency(problem: &ViscousProblem, t: f64) -> GeneratorCheck {
    let space = problem.space;
    let beta = problem.beta;
    let n = space.vertex_count();
    let reference = problem.generator_matrix(t);
    let mut chart_defect = 0.0_f64;
    let mut exponential_defect = 0.0_f64;
    for x in 0..n {
        let mut f = ScalarField::zeros(n);
        for nb in space.neighbors(x) {
            f[nb.vertex] = nb.sign * problem.form.edge_values()[nb.edge];
        }
        let gff = space.gamma(&f, &f)[x];
        let vx = problem.potential.value(t, x);
        let mut chart_row = vec![0.0; n];
        let mut exp_row = vec![0.0; n];
        for y in 0..n {
            let mut e = ScalarField::zeros(n);
            e[y] = 1.0;
            let lap = space.laplacian(&e)[x];
            let gfe = space.gamma(&f, &e)[x];
            let diag = if x == y { 1.0 } else { 0.0 };
            chart_row[y] = lap / (2.0 * beta) + 0.5 * beta * gff * diag + gfe + beta * vx * diag;
            let twisted = ScalarField::from_fn(n, |z, _| (beta * f[z]).exp() * e[z]);
            exp_row[y] = (-beta * f[x]).exp() * space.laplacian(&twisted)[x] / (2.0 * beta) + beta * vx * diag;
        }
        for y in 0..n {
            chart_defect = chart_defect.max((chart_row[y] - reference[(x, y)]).abs());
            exponential_defect = exponential_defect.max((exp_row[y] - reference[(x, y)]).abs());
        }
    }
    GeneratorCheck { chart_defect, exponential_defect }
}
