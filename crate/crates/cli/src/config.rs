//! Scenario files: one TOML schema shared by every subcommand.
//!
//! Unknown keys are rejected everywhere so a misspelled tolerance fails loudly.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use twisted_hj::viscous::{Scheme, WeightConvention};

use crate::error::CliError;

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Stem of the output files; defaults to the config file stem.
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub beta: f64,
    pub space: SpaceSpec,
    #[serde(default)]
    pub form: FormSpec,
    #[serde(default)]
    pub potential: PotentialSpec,
    /// Final condition `u(0, ·)`.
    #[serde(default, rename = "final")]
    pub final_condition: FieldSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub cover: CoverSpec,
    /// Initial density of the Fokker-Planck runs; normalized to unit mass.
    #[serde(default = "FieldSpec::uniform")]
    pub density: FieldSpec,
    #[serde(default)]
    pub convergence: ConvergenceSpec,
    #[serde(default)]
    pub hypotheses: HypothesesSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpaceSpec {
    Cycle {
        n: usize,
        #[serde(default = "one")]
        length: f64,
    },
    Path {
        n: usize,
        #[serde(default = "one")]
        length: f64,
    },
    Explicit {
        measure: Vec<f64>,
        edges: Vec<EdgeSpec>,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub tail: usize,
    pub head: usize,
    #[serde(default = "one")]
    pub length: f64,
    #[serde(default = "one")]
    pub conductance: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormKind {
    #[default]
    Zero,
    /// `c · ℓ(e)` on every edge.
    Constant,
    /// Oriented edge values; unlisted edges carry `0`.
    Edges,
    /// Local primitives on overlapping vertex sets.
    Charts,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormSpec {
    #[serde(default)]
    pub kind: FormKind,
    pub c: Option<f64>,
    #[serde(default)]
    pub edges: Vec<EdgeValue>,
    #[serde(default)]
    pub charts: Vec<ChartSpec>,
    /// Contractible vertex cycles on which circulation must vanish.
    #[serde(default)]
    pub faces: Vec<Vec<usize>>,
    /// Replace the form by its harmonic representative before solving.
    #[serde(default)]
    pub harmonize: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeValue {
    pub from: usize,
    pub to: usize,
    pub value: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub vertices: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    #[default]
    Zero,
    Constant,
    Values,
    /// `amplitude · cos(2π k x / L)` on a builtin cycle or path.
    Cosine,
    Uniform,
}

/// A vertex field: final conditions, densities.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    #[serde(default)]
    pub kind: FieldKind,
    pub value: Option<f64>,
    pub values: Option<Vec<f64>>,
    pub amplitude: Option<f64>,
    pub wavenumber: Option<f64>,
}

impl FieldSpec {
    fn uniform() -> Self {
        FieldSpec { kind: FieldKind::Uniform, ..Default::default() }
    }
}

/// A potential: a [`FieldSpec`] profile, optionally modulated by `cos(rate · t)`.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    #[serde(default)]
    pub kind: FieldKind,
    pub value: Option<f64>,
    pub values: Option<Vec<f64>>,
    pub amplitude: Option<f64>,
    pub wavenumber: Option<f64>,
    pub rate: Option<f64>,
}

impl PotentialSpec {
    pub fn profile(&self) -> FieldSpec {
        FieldSpec {
            kind: self.kind,
            value: self.value,
            values: self.values.clone(),
            amplitude: self.amplitude,
            wavenumber: self.wavenumber,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Length `T` of the interval `[-T, 0]`.
    pub horizon: f64,
    pub dt: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Picard,
    Mol,
    GradientFlow,
    DirectHj,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeatKind {
    #[default]
    Spectral,
    ImplicitEuler,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub heat_backend: HeatKind,
    #[serde(default = "SolverSpec::window")]
    pub picard_window: f64,
    #[serde(default = "SolverSpec::tol")]
    pub picard_tol: f64,
    #[serde(default = "SolverSpec::iterations")]
    pub picard_max_iterations: usize,
    #[serde(default = "SolverSpec::ratio")]
    pub picard_max_ratio: f64,
    #[serde(default)]
    pub weight_convention: WeightConvention,
    /// Implicitness of the Fokker-Planck θ-scheme.
    #[serde(default = "one")]
    pub theta: f64,
}

impl SolverSpec {
    fn window() -> f64 {
        0.5
    }
    fn tol() -> f64 {
        1e-10
    }
    fn iterations() -> usize {
        200
    }
    fn ratio() -> f64 {
        0.5
    }
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            method: Method::default(),
            scheme: Scheme::default(),
            heat_backend: HeatKind::default(),
            picard_window: Self::window(),
            picard_tol: Self::tol(),
            picard_max_iterations: Self::iterations(),
            picard_max_ratio: Self::ratio(),
            weight_convention: WeightConvention::default(),
            theta: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverSpec {
    /// Starting window half-width.
    #[serde(default = "CoverSpec::h_max")]
    pub h_max: usize,
    /// Largest window the drivers may double up to.
    #[serde(default = "CoverSpec::cap")]
    pub h_max_cap: usize,
    /// Compare the inviscid value with the form-free problem on the cover.
    #[serde(default)]
    pub check: bool,
}

impl CoverSpec {
    fn h_max() -> usize {
        1
    }
    fn cap() -> usize {
        16
    }
}

impl Default for CoverSpec {
    fn default() -> Self {
        CoverSpec { h_max: Self::h_max(), h_max_cap: Self::cap(), check: false }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    /// Direct viscous solver against Cole-Hopf of the linear solver on refined builtin meshes.
    #[default]
    ColeHopf,
    /// Linear solver at decreasing `Δt` against a finer reference.
    Time,
    /// Duality gap at decreasing `Δt`.
    Duality,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSpec {
    #[serde(default)]
    pub study: Study,
    /// Vertex counts of the mesh study.
    #[serde(default = "ConvergenceSpec::sizes")]
    pub sizes: Vec<usize>,
    /// Mesh study step `Δt = dt_factor · h²`.
    #[serde(default = "ConvergenceSpec::factor")]
    pub dt_factor: f64,
    /// Time steps of the time and duality studies; defaults to `dt, dt/2, dt/4`.
    #[serde(default)]
    pub dts: Vec<f64>,
}

impl ConvergenceSpec {
    fn sizes() -> Vec<usize> {
        vec![16, 32, 64]
    }
    fn factor() -> f64 {
        0.25
    }
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        ConvergenceSpec { study: Study::default(), sizes: Self::sizes(), dt_factor: Self::factor(), dts: Vec::new() }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesesSpec {
    #[serde(default = "HypothesesSpec::probes")]
    pub probes: usize,
}

impl HypothesesSpec {
    fn probes() -> usize {
        64
    }
}

impl Default for HypothesesSpec {
    fn default() -> Self {
        HypothesesSpec { probes: Self::probes() }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    #[serde(default = "OutputSpec::csv")]
    pub csv: bool,
}

impl OutputSpec {
    fn csv() -> bool {
        true
    }
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: None, csv: true }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        if config.name.is_none() {
            config.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(config)
    }

    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or("scenario")
    }
}
