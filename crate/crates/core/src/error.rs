use thiserror::Error;

/// Errors raised by the solvers and constructors of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph is not connected ({components} components)")]
    Disconnected { components: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("field has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("vertices {0} and {1} are not adjacent")]
    NotAdjacent(usize, usize),

    #[error("path edge {from}->{to} lies in no chart")]
    ChartGap { from: usize, to: usize },

    #[error("chart {i} and chart {j} differ by a non-constant amount on a component of their overlap")]
    ChartMismatch { i: usize, j: usize },

    #[error("circulation {circulation:e} over contractible cycle {face} exceeds tolerance")]
    NotClosed { face: usize, circulation: f64 },

    #[error("form is not harmonic: max |div| = {residual:e}")]
    NotHarmonic { residual: f64 },

    #[error("lifted path leaves the cover window (|h| > {h_max}); enlarge the window")]
    WindowExceeded { h_max: usize },

    #[error("non-positive value {value:e} at node {node}, vertex {vertex}")]
    NonPositive { node: usize, vertex: usize, value: f64 },

    #[error("Picard updates did not contract on window of width {window:e} (ratio {ratio:.3})")]
    NoContraction { window: f64, ratio: f64 },

    #[error("Picard iteration did not reach tolerance within {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("linear system is singular: {0}")]
    Singular(String),

    #[error("time step rejected: {0}")]
    StepRejected(String),

    #[error("mass drift {drift:e} at node {node}")]
    MassDrift { node: usize, drift: f64 },

    #[error("Fokker-Planck residual {residual:e} at step {step} exceeds tolerance")]
    FpResidual { step: usize, residual: f64 },

    #[error("final conditions are not ordered at vertex {vertex}")]
    NotOrdered { vertex: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Whether the error signals a solver failing to converge rather than bad input.
    pub fn is_convergence_failure(&self) -> bool {
        matches!(
            self,
            Error::NoContraction { .. }
                | Error::NotConverged { .. }
                | Error::StepRejected(_)
                | Error::Singular(_)
                | Error::MassDrift { .. }
                | Error::WindowExceeded { .. }
        )
    }
}
