//! Picard iteration on the Duhamel formula, window by window.
//!
//! On a window `[t_a, t_b]` with `v(t_b)` known,
//! `Φ(v)(t_j) = P_{t_b - t_j} v(t_b) + ∫_{t_j}^{t_b} P_{s - t_j} B_s(v_s) ds`,
//! with the integral taken by the product trapezoid rule: `B_s(v_s)` is
//! interpolated linearly between grid nodes and the heat factor is integrated
//! exactly, so stiff modes do not inflate the quadrature error. In the
//! eigenbasis of `Δ` the heat factors are diagonal and the integrals obey a
//! one-step recursion, so one sweep of `Φ` costs one application of `B` per
//! node plus two basis changes.

use nalgebra::DVector;
use serde::Serialize;

use super::{b_operator, SchrodingerSolution, ViscousProblem};
use crate::error::{Error, Result};
use crate::grid::ScalarFieldPath;
use crate::space::ScalarField;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PicardOptions {
    /// Initial window width `T̂`; halved whenever the iteration fails to contract.
    pub window: f64,
    /// Update tolerance, scaled by `max(1, ‖v‖∞)`.
    pub tol: f64,
    pub max_iterations: usize,
    /// Largest accepted ratio between successive update norms.
    pub max_ratio: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions { window: 0.5, tol: 1e-10, max_iterations: 200, max_ratio: 0.5 }
    }
}

/// Convergence record of one window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowReport {
    pub first_node: usize,
    pub last_node: usize,
    pub width: f64,
    pub iterations: usize,
    /// Ratios of successive update norms.
    pub ratios: Vec<f64>,
    /// `‖Φ(v) - v‖` over the window at acceptance.
    pub residual: f64,
}

impl WindowReport {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PicardDiagnostics {
    pub windows: Vec<WindowReport>,
    /// Window width in force at the end of the run.
    pub final_window: f64,
    pub halvings: usize,
}

impl PicardDiagnostics {
    pub fn max_ratio(&self) -> f64 {
        self.windows.iter().map(WindowReport::max_ratio).fold(0.0, f64::max)
    }

    pub fn max_residual(&self) -> f64 {
        self.windows.iter().map(|w| w.residual).fold(0.0, f64::max)
    }
}

/// Solves for `v` by Picard iteration, extending window by window from `t = 0`
/// back to the start of the grid. Heat factors use the spectral backend.
pub fn picard_solve(problem: &ViscousProblem, options: PicardOptions) -> Result<SchrodingerSolution> {
    if !(options.window > 0.0) || options.max_iterations == 0 {
        return Err(Error::InvalidArgument("Picard window and iteration cap must be positive".into()));
    }
    let grid = problem.grid;
    let dt = grid.dt();
    let k_steps = grid.steps();
    let mut values: Vec<Option<ScalarField>> = vec![None; grid.nodes()];
    values[k_steps] = Some(problem.final_v());
    let mut width = options.window;
    let mut halvings = 0;
    let mut reports = Vec::new();
    let mut b = k_steps;
    while b > 0 {
        let steps = ((width / dt + 1e-9).floor() as usize).clamp(1, b);
        let a = b - steps;
        match solve_window(problem, &options, a, b, values[b].as_ref().unwrap()) {
            Ok((fields, report)) => {
                for (j, f) in fields.into_iter().enumerate() {
                    if a + j < b {
                        values[a + j] = Some(f);
                    }
                }
                reports.push(report);
                b = a;
            }
            Err(Error::NoContraction { ratio, .. }) if steps > 1 => {
                log::debug!("Picard window {width} did not contract (ratio {ratio:.3}); halving");
                width *= 0.5;
                halvings += 1;
            }
            Err(e) => return Err(e),
        }
    }
    let v = ScalarFieldPath::new(grid, values.into_iter().map(Option::unwrap).collect())?;
    let mut solution = SchrodingerSolution::new(v)?;
    solution.picard = Some(PicardDiagnostics { windows: reports, final_window: width, halvings });
    Ok(solution)
}

/// Fixed point on nodes `a..=b`, given `v_b`. Returns the fields for `a..=b`.
fn solve_window(
    problem: &ViscousProblem,
    options: &PicardOptions,
    a: usize,
    b: usize,
    vb: &ScalarField,
) -> Result<(Vec<ScalarField>, WindowReport)> {
    let sp = problem.space.spectral();
    let grid = problem.grid;
    let dt = grid.dt();
    let len = b - a + 1;
    let one_step = sp.heat_multipliers(dt, problem.beta);
    // heat[j] = multipliers of P_{t_b - t_{a+j}}.
    let mut heat = vec![one_step.map(|_| 1.0); len];
    for j in (0..len - 1).rev() {
        heat[j] = heat[j + 1].component_mul(&one_step);
    }
    let (w_left, w_right) = product_trapezoid_weights(&sp.eigenvalues, dt, problem.beta);
    let cb = sp.to_modes(vb);
    let homogeneous: Vec<ScalarField> = heat.iter().map(|h| sp.from_modes(&h.component_mul(&cb))).collect();

    let apply = |v: &[ScalarField]| -> Result<Vec<ScalarField>> {
        let bm = (0..len)
            .map(|j| Ok(sp.to_modes(&b_operator(problem, &v[j], grid.time(a + j))?)))
            .collect::<Result<Vec<_>>>()?;
        let mut out = vec![ScalarField::zeros(0); len];
        let mut integral = bm[len - 1].map(|_| 0.0);
        out[len - 1] = vb.clone();
        for j in (0..len - 1).rev() {
            integral = w_left.component_mul(&bm[j]) + w_right.component_mul(&bm[j + 1]) + integral.component_mul(&one_step);
            out[j] = &homogeneous[j] + sp.from_modes(&integral);
        }
        Ok(out)
    };
    let sup_diff = |x: &[ScalarField], y: &[ScalarField]| {
        x.iter().zip(y).map(|(p, q)| (p - q).amax()).fold(0.0, f64::max)
    };

    let mut v = homogeneous.clone();
    let mut ratios = Vec::new();
    let mut previous: Option<f64> = None;
    for iteration in 1..=options.max_iterations {
        let next = apply(&v)?;
        let update = sup_diff(&next, &v);
        let scale = next.iter().map(|f| f.amax()).fold(1.0, f64::max);
        v = next;
        if update <= options.tol * scale {
            let residual = sup_diff(&apply(&v)?, &v);
            let report = WindowReport {
                first_node: a,
                last_node: b,
                width: (b - a) as f64 * dt,
                iterations: iteration,
                ratios,
                residual,
            };
            return Ok((v, report));
        }
        if let Some(p) = previous {
            let ratio = update / p;
            ratios.push(ratio);
            if ratio > options.max_ratio || !ratio.is_finite() {
                return Err(Error::NoContraction { window: (b - a) as f64 * dt, ratio });
            }
        }
        previous = Some(update);
    }
    Err(Error::NotConverged { iterations: options.max_iterations })
}

/// Per-mode weights `(a, b)` with `∫_0^Δt e^{-μσ} ((1 - σ/Δt) f₀ + (σ/Δt) f₁) dσ = a f₀ + b f₁`,
/// `μ = -λ/(2β)` the decay rate of each mode.
fn product_trapezoid_weights(eigenvalues: &DVector<f64>, dt: f64, beta: f64) -> (DVector<f64>, DVector<f64>) {
    let mut left = DVector::zeros(eigenvalues.len());
    let mut right = DVector::zeros(eigenvalues.len());
    for (i, &l) in eigenvalues.iter().enumerate() {
        let z = (-l * dt / (2.0 * beta)).max(0.0);
        // φ₁ = (1 - e^{-z})/z and φ₂ = (1 - (1 + z)e^{-z})/z², by series near 0.
        let (phi1, phi2) = if z < 1e-3 {
            (1.0 - z / 2.0 + z * z / 6.0 - z * z * z / 24.0, 0.5 - z / 3.0 + z * z / 8.0 - z * z * z / 30.0)
        } else {
            let e = (-z).exp();
            ((1.0 - e) / z, (1.0 - (1.0 + z) * e) / (z * z))
        };
        right[i] = dt * phi2;
        left[i] = dt * (phi1 - phi2);
    }
    (left, right)
}
