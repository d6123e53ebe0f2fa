//! One function per subcommand. Each returns a JSON summary plus the fields to write as CSV.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use twisted_hj::fokker_planck::{
    drift_divergence_constant, duality_check, duality_for_drift, fp_residual, fp_solve, stochastic_value, DriftPath,
};
use twisted_hj::forms::{check_hypotheses, gamma_hat, CycleBasis};
use twisted_hj::grid::ScalarFieldPath;
use twisted_hj::inviscid::{cover_equivalence_check, solve_value, InviscidProblem};
use twisted_hj::viscous::{
    bound_envelopes, cole_hopf_exp, cole_hopf_log, generator_consistency, gradient_flow_solve, mol_solve,
    picard_solve, solve_viscous_hj_direct, PicardOptions, Scheme, SchrodingerSolution, ViscousProblem,
};

use crate::config::{Method, ScenarioConfig, SpaceSpec, Study};
use crate::error::CliError;
use crate::scenario::{build_density, cover_with_reach, Scenario};

pub struct Outcome {
    pub summary: Value,
    pub fields: Vec<(&'static str, ScalarFieldPath)>,
}

fn header(command: &str, config: &ScenarioConfig, s: &Scenario) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("command".into(), json!(command));
    m.insert("scenario".into(), json!(config.name()));
    m.insert("seed".into(), json!(config.seed));
    m.insert("vertices".into(), json!(s.space.vertex_count()));
    m.insert("edges".into(), json!(s.space.edge_count()));
    m.insert("beta".into(), json!(s.beta));
    m.insert("dt".into(), json!(s.grid.dt()));
    m.insert("steps".into(), json!(s.grid.steps()));
    m
}

fn extend(mut m: serde_json::Map<String, Value>, extra: Value) -> Value {
    if let Value::Object(extra) = extra {
        m.extend(extra);
    }
    Value::Object(m)
}

fn range(f: &twisted_hj::space::ScalarField) -> Value {
    json!({ "min": f.min(), "max": f.max() })
}

pub fn solve_inviscid(config: &ScenarioConfig) -> Result<Outcome, CliError> {
    let s = Scenario::build(config)?;
    let problem = InviscidProblem::new(&s.space, &s.form, &s.potential, s.final_u.clone(), s.grid)?;
    let table = solve_value(&problem)?;
    let cover = if config.cover.check {
        let (cover, check) = cover_with_reach(&s.space, &s.form, s.beta, config.cover.h_max, config.cover.h_max_cap, |c| {
            cover_equivalence_check(&problem, c)
        })?;
        json!({ "cover": cover.summary(), "max_discrepancy": check.max_discrepancy })
    } else {
        Value::Null
    };
    let summary = extend(
        header("solve-inviscid", config, &s),
        json!({ "initial_value": range(table.values.initial_value()), "cover_check": cover }),
    );
    Ok(Outcome { summary, fields: vec![("u", table.values)] })
}

fn run_method(config: &ScenarioConfig, problem: &ViscousProblem, method: Method) -> Result<SchrodingerSolution, CliError> {
    let solver = &config.solver;
    Ok(match method {
        Method::Picard => picard_solve(
            problem,
            PicardOptions {
                window: solver.picard_window,
                tol: solver.picard_tol,
                max_iterations: solver.picard_max_iterations,
                max_ratio: solver.picard_max_ratio,
            },
        )?,
        Method::Mol => mol_solve(problem, solver.scheme)?,
        Method::GradientFlow => {
            let (_, sol) = cover_with_reach(
                problem.space,
                problem.form,
                problem.beta,
                config.cover.h_max,
                config.cover.h_max_cap,
                |c| gradient_flow_solve(problem, c, solver.weight_convention),
            )?;
            sol
        }
        Method::DirectHj => {
            let u = solve_viscous_hj_direct(problem)?;
            SchrodingerSolution { v: cole_hopf_exp(&u, problem.beta), picard: None, gradient_flow: None }
        }
    })
}

pub fn solve_viscous(config: &ScenarioConfig, method: Option<Method>) -> Result<Outcome, CliError> {
    let s = Scenario::build(config)?;
    let problem = s.viscous()?;
    let method = method.unwrap_or(config.solver.method);
    let sol = run_method(config, &problem, method)?;
    let u = cole_hopf_log(&sol.v, s.beta)?;
    let env = bound_envelopes(&s.space, &sol.v, s.beta)?;
    let summary = extend(
        header("solve-viscous", config, &s),
        json!({
            "method": format!("{method:?}"),
            "initial_value": range(u.initial_value()),
            "min_v": sol.min_value(),
            "envelopes": { "d1": env.d1.last(), "d2": env.d2.last(), "horizon": env.horizon.last() },
            "generator": generator_consistency(&problem, 0.0),
            "picard": sol.picard,
            "gradient_flow": sol.gradient_flow.as_ref().map(|d| json!({
                "tau": d.tau, "d5": d.d5, "violations": d.violations, "steps": d.steps.len(),
            })),
        }),
    );
    Ok(Outcome { summary, fields: vec![("u", u), ("v", sol.v)] })
}

pub fn solve_fp(config: &ScenarioConfig) -> Result<Outcome, CliError> {
    let s = Scenario::build(config)?;
    let problem = s.viscous()?;
    let nu = build_density(&s.space, &config.density)?;
    let theta = config.solver.theta;
    let u = solve_viscous_hj_direct(&problem)?;
    let drift = DriftPath::optimal(&s.space, &s.form, &u)?;
    let fp = fp_solve(&s.space, &nu, &drift, s.beta, theta)?;
    let value = stochastic_value(&problem, &fp.rho, &drift, theta)?;
    let summary = extend(
        header("solve-fp", config, &s),
        json!({
            "theta": theta,
            "min_density": fp.min_density,
            "positivity_losses": fp.positivity_losses,
            "final_mass": s.space.integrate(fp.rho.final_value()),
            "residual": fp_residual(&s.space, &fp.rho, &drift, s.beta, theta),
            "stochastic_value": value,
            "drift_divergence_constant": drift_divergence_constant(&s.space, &s.form, &u, &fp.rho)?,
        }),
    );
    Ok(Outcome { summary, fields: vec![("rho", fp.rho)] })
}

fn default_dts(config: &ScenarioConfig) -> Vec<f64> {
    if config.convergence.dts.is_empty() {
        vec![config.grid.dt, config.grid.dt / 2.0, config.grid.dt / 4.0]
    } else {
        config.convergence.dts.clone()
    }
}

pub fn duality(config: &ScenarioConfig) -> Result<Outcome, CliError> {
    let s = Scenario::build(config)?;
    let problem = s.viscous()?;
    let nu = build_density(&s.space, &config.density)?;
    let theta = config.solver.theta;
    let u = solve_viscous_hj_direct(&problem)?;
    let drift = DriftPath::optimal(&s.space, &s.form, &u)?;
    let report = duality_for_drift(&problem, &nu, &u, &drift, theta)?;
    let rho = fp_solve(&s.space, &nu, &drift, s.beta, theta)?.rho;
    let mut table = Vec::new();
    if !config.convergence.dts.is_empty() {
        for &dt in &config.convergence.dts {
            let r = Scenario::build_with(config, &config.space, dt)?;
            let nu = build_density(&r.space, &config.density)?;
            let rep = duality_check(&r.viscous()?, &nu, theta)?;
            table.push(json!({ "dt": r.grid.dt(), "gap": rep.gap }));
        }
    }
    let summary = extend(
        header("duality", config, &s),
        json!({
            "lhs": report.lhs,
            "rhs": report.rhs,
            "gap": report.gap,
            "min_density": report.min_density,
            "theta": theta,
            "refinement": table,
        }),
    );
    Ok(Outcome { summary, fields: vec![("rho", rho)] })
}

/// Least-squares slope of `log error` against `log step`.
pub fn fitted_order(steps: &[f64], errors: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = steps
        .iter()
        .zip(errors)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&h, &e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn resized(space: &SpaceSpec, n: usize) -> Result<(SpaceSpec, f64), CliError> {
    match space {
        SpaceSpec::Cycle { length, .. } => Ok((SpaceSpec::Cycle { n, length: *length }, length / n as f64)),
        SpaceSpec::Path { length, .. } if n > 1 => {
            Ok((SpaceSpec::Path { n, length: *length }, length / (n - 1) as f64))
        }
        _ => Err(CliError::Config("mesh refinement needs a builtin cycle or path".into())),
    }
}

pub fn convergence(config: &ScenarioConfig) -> Result<Outcome, CliError> {
    let base = Scenario::build(config)?;
    let cfg = &config.convergence;
    let mut rows = Vec::new();
    let mut steps = Vec::new();
    let mut errors = Vec::new();
    match cfg.study {
        Study::ColeHopf => {
            for &n in &cfg.sizes {
                let (space, h) = resized(&config.space, n)?;
                let s = Scenario::build_with(config, &space, cfg.dt_factor * h * h)?;
                let problem = s.viscous()?;
                let direct = solve_viscous_hj_direct(&problem)?;
                let linear = cole_hopf_log(&mol_solve(&problem, Scheme::CrankNicolson)?.v, s.beta)?;
                let e = direct.max_abs_diff(&linear);
                rows.push(json!({ "n": n, "h": h, "dt": s.grid.dt(), "error": e }));
                steps.push(h);
                errors.push(e);
            }
        }
        Study::Time => {
            let dts = default_dts(config);
            let finest = dts.iter().copied().fold(f64::INFINITY, f64::min) / 4.0;
            let reference = {
                let s = Scenario::build_with(config, &config.space, finest)?;
                let p = s.viscous()?;
                cole_hopf_log(&run_method(config, &p, config.solver.method)?.v, s.beta)?.initial_value().clone()
            };
            for &dt in &dts {
                let s = Scenario::build_with(config, &config.space, dt)?;
                let p = s.viscous()?;
                let u = cole_hopf_log(&run_method(config, &p, config.solver.method)?.v, s.beta)?;
                let e = (u.initial_value() - &reference).amax();
                rows.push(json!({ "dt": s.grid.dt(), "error": e }));
                steps.push(s.grid.dt());
                errors.push(e);
            }
        }
        Study::Duality => {
            for &dt in &default_dts(config) {
                let s = Scenario::build_with(config, &config.space, dt)?;
                let nu = build_density(&s.space, &config.density)?;
                let rep = duality_check(&s.viscous()?, &nu, config.solver.theta)?;
                rows.push(json!({ "dt": s.grid.dt(), "error": rep.gap.abs(), "gap": rep.gap }));
                steps.push(s.grid.dt());
                errors.push(rep.gap.abs());
            }
        }
    }
    let orders: Vec<Option<f64>> = (1..errors.len())
        .map(|i| fitted_order(&steps[i - 1..=i], &errors[i - 1..=i]))
        .collect();
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    let summary = extend(
        header("convergence", config, &base),
        json!({
            "study": format!("{:?}", cfg.study),
            "rows": rows,
            "orders": orders,
            "fitted_order": fitted_order(&steps, &errors),
            "monotone": monotone,
        }),
    );
    Ok(Outcome { summary, fields: Vec::new() })
}

pub fn check_form(config: &ScenarioConfig) -> Result<Outcome, CliError> {
    let s = Scenario::build(config)?;
    let basis = CycleBasis::new(&s.space);
    let periods: Vec<f64> = s.form.periods(&s.space, &basis).iter().copied().collect();
    let harmonicity = s.form.harmonicity(&s.space, 1e-10);
    let summary = extend(
        header("check-form", config, &s),
        json!({
            "rank": basis.rank(),
            "periods": periods,
            "harmonic": harmonicity.harmonic,
            "max_divergence": harmonicity.max_residual,
            "closed": true,
            "faces": s.form.faces().len(),
            "path_bound_constant": s.form.path_bound_constant(&s.space),
            "gamma_hat_linf": gamma_hat(&s.space, &s.form, &s.form).amax(),
        }),
    );
    Ok(Outcome { summary, fields: Vec::new() })
}

pub fn check_hypotheses_cmd(config: &ScenarioConfig) -> Result<Outcome, CliError> {
    let s = Scenario::build(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let report = check_hypotheses(&s.space, &s.form, &s.potential, s.beta, config.hypotheses.probes, &mut rng)?;
    let smoothing = s.space.smoothing_constant(s.grid.dt().max(1e-6), s.beta, config.hypotheses.probes, &mut rng)?;
    let summary = extend(
        header("check-hypotheses", config, &s),
        json!({
            "report": report,
            "harmonic": s.form.is_harmonic(&s.space, 1e-10),
            "smoothing_constant": smoothing,
        }),
    );
    Ok(Outcome { summary, fields: Vec::new() })
}
