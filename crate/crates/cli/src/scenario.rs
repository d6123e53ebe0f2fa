//! Turns a [`ScenarioConfig`] into solver inputs.

use twisted_hj::cover::CoverWindow;
use twisted_hj::forms::{ChartForm, Cocycle};
use twisted_hj::grid::TimeGrid;
use twisted_hj::potential::{cosine_profile, Potential};
use twisted_hj::space::{Edge, GraphSpace, HeatBackend, ScalarField};
use twisted_hj::viscous::ViscousProblem;
use twisted_hj::Error;

use crate::config::{FieldKind, FieldSpec, FormKind, FormSpec, HeatKind, ScenarioConfig, SpaceSpec};
use crate::error::CliError;

/// Everything a solver needs, owned.
pub struct Scenario {
    pub space: GraphSpace,
    pub form: Cocycle,
    pub potential: Potential,
    pub final_u: ScalarField,
    pub grid: TimeGrid,
    pub beta: f64,
    pub heat_backend: HeatBackend,
}

impl Scenario {
    pub fn build(config: &ScenarioConfig) -> Result<Self, CliError> {
        Self::build_with(config, &config.space, config.grid.dt)
    }

    /// Same scenario on another space or time step.
    pub fn build_with(config: &ScenarioConfig, space: &SpaceSpec, dt: f64) -> Result<Self, CliError> {
        let space = build_space(space)?;
        let form = build_form(&space, &config.form)?;
        let profile = build_field(&space, &config.potential.profile(), "potential")?;
        let potential = match (config.potential.kind, config.potential.rate) {
            (FieldKind::Zero, _) => Potential::Zero,
            (_, Some(rate)) => Potential::Modulated { profile, rate },
            (_, None) => Potential::Static(profile),
        };
        let final_u = build_field(&space, &config.final_condition, "final")?;
        let grid = build_grid(config.grid.horizon, dt)?;
        let heat_backend = match config.solver.heat_backend {
            HeatKind::Spectral => HeatBackend::Spectral,
            HeatKind::ImplicitEuler => HeatBackend::ImplicitEuler { substeps: None },
        };
        Ok(Scenario { space, form, potential, final_u, grid, beta: config.beta, heat_backend })
    }

    pub fn viscous(&self) -> Result<ViscousProblem<'_>, CliError> {
        let problem = ViscousProblem::new(
            &self.space,
            &self.form,
            &self.potential,
            self.beta,
            self.final_u.clone(),
            self.grid,
        )
        .map_err(|e| match e {
            Error::NotHarmonic { residual } => CliError::Config(format!(
                "form is not harmonic (max |div| = {residual:e}); set form.harmonize = true"
            )),
            other => other.into(),
        })?;
        Ok(problem.with_heat_backend(self.heat_backend))
    }
}

/// Grid on `[-horizon, 0]`; the step is shrunk slightly when it does not divide the horizon.
pub fn build_grid(horizon: f64, dt: f64) -> Result<TimeGrid, CliError> {
    if !(horizon >= 0.0) || !(dt > 0.0) {
        return Err(CliError::Config(format!("grid needs horizon >= 0 and dt > 0, got {horizon} and {dt}")));
    }
    match TimeGrid::new(-horizon, dt) {
        Ok(grid) => Ok(grid),
        Err(_) => {
            let steps = (horizon / dt).ceil() as usize;
            Ok(TimeGrid::from_steps(steps, horizon / steps as f64)?)
        }
    }
}

pub fn build_space(spec: &SpaceSpec) -> Result<GraphSpace, CliError> {
    Ok(match spec {
        SpaceSpec::Cycle { n, length } => GraphSpace::cycle(*n, *length)?,
        SpaceSpec::Path { n, length } => GraphSpace::path(*n, *length)?,
        SpaceSpec::Explicit { measure, edges } => {
            let edges = edges
                .iter()
                .map(|e| Edge { tail: e.tail, head: e.head, length: e.length, conductance: e.conductance })
                .collect();
            GraphSpace::new(measure.clone(), edges)?
        }
    })
}

fn required<T: Copy>(value: Option<T>, what: &str, key: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Config(format!("{what}: missing key `{key}`")))
}

pub fn build_form(space: &GraphSpace, spec: &FormSpec) -> Result<Cocycle, CliError> {
    let mut form = match spec.kind {
        FormKind::Zero => Cocycle::zero(space),
        FormKind::Constant => Cocycle::constant(space, required(spec.c, "form", "c")?),
        FormKind::Edges => {
            let entries: Vec<(usize, usize, f64)> = spec.edges.iter().map(|e| (e.from, e.to, e.value)).collect();
            Cocycle::from_oriented(space, &entries)?
        }
        FormKind::Charts => {
            let charts = spec.charts.iter().map(|c| (c.vertices.clone(), c.values.clone())).collect();
            ChartForm::new(space, charts)?.to_cocycle(space)?
        }
    };
    if spec.harmonize {
        form = form.harmonic_representative(space)?.0;
    }
    if !spec.faces.is_empty() {
        form = form.with_faces(space, spec.faces.clone())?;
    }
    Ok(form)
}

pub fn build_field(space: &GraphSpace, spec: &FieldSpec, what: &str) -> Result<ScalarField, CliError> {
    let n = space.vertex_count();
    Ok(match spec.kind {
        FieldKind::Zero => ScalarField::zeros(n),
        FieldKind::Uniform => ScalarField::from_element(n, 1.0),
        FieldKind::Constant => ScalarField::from_element(n, required(spec.value, what, "value")?),
        FieldKind::Values => {
            let values = spec
                .values
                .clone()
                .ok_or_else(|| CliError::Config(format!("{what}: missing key `values`")))?;
            if values.len() != n {
                return Err(CliError::Config(format!("{what}: {} values for {n} vertices", values.len())));
            }
            ScalarField::from_vec(values)
        }
        FieldKind::Cosine => cosine_profile(
            space,
            required(spec.amplitude, what, "amplitude")?,
            spec.wavenumber.unwrap_or(1.0),
        ),
    })
}

/// A positive density of unit mass; cosine profiles are lifted by `1 + |amplitude|`.
pub fn build_density(space: &GraphSpace, spec: &FieldSpec) -> Result<ScalarField, CliError> {
    let mut f = build_field(space, spec, "density")?;
    if spec.kind == FieldKind::Cosine {
        f = f.add_scalar(1.0 + spec.amplitude.unwrap_or(0.0).abs());
    }
    if f.iter().any(|&x| !(x > 0.0)) {
        return Err(CliError::Config("density: values must be positive".into()));
    }
    let mass = space.integrate(&f);
    Ok(f / mass)
}

/// Builds the cover, doubling the window from `h_max` up to `cap` while
/// `check` reports that a path walks off it.
pub fn cover_with_reach<T>(
    space: &GraphSpace,
    form: &Cocycle,
    beta: f64,
    h_max: usize,
    cap: usize,
    mut check: impl FnMut(&CoverWindow) -> twisted_hj::Result<T>,
) -> Result<(CoverWindow, T), CliError> {
    let mut h = h_max.max(1);
    loop {
        let cover = CoverWindow::build(space, form, h, beta)?;
        match check(&cover) {
            Ok(out) => return Ok((cover, out)),
            Err(Error::WindowExceeded { .. }) if 2 * h <= cap => {
                log::info!("cover window {h} too small, doubling");
                h *= 2;
            }
            Err(e) => return Err(e.into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uneven_steps_are_shrunk_to_fit() {
        let g = build_grid(1.0, 0.3).unwrap();
        assert_eq!(g.steps(), 4);
        assert!((g.dt() - 0.25).abs() < 1e-15);
        assert!(build_grid(1.0, 0.0).is_err());
    }

    #[test]
    fn densities_have_unit_mass() {
        let s = GraphSpace::cycle(10, 1.0).unwrap();
        let spec = FieldSpec { kind: FieldKind::Cosine, amplitude: Some(0.5), ..Default::default() };
        let rho = build_density(&s, &spec).unwrap();
        assert!((s.integrate(&rho) - 1.0).abs() < 1e-14 && rho.min() > 0.0);
    }
}
