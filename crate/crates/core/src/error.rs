use thiserror::Error;

/// Errors raised by the laboratory.
///
/// Variants are grouped by the exit-code family the CLI maps them to:
/// validation problems, numerical failures and missing inputs.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("operation requires a {required} grid")]
    UnsupportedBoundary { required: &'static str },

    #[error("no negative eigenvalue: the potential has no bound state")]
    NoBoundState,

    #[error("potential is resonant at zero energy (|W(0)| = {score:.3e}); low-energy resolvent undefined")]
    ResonantPotential { score: f64 },

    #[error("Newton iteration diverged after {iterations} steps (last residual {residual:.3e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("|z| = {modulus} exceeds the branch radius {radius}")]
    BranchRadiusExceeded { modulus: f64, radius: f64 },

    #[error("‖u‖_H1 = {norm} lies outside the small-data radius {radius}")]
    OutsideSmallDataRadius { norm: f64, radius: f64 },

    #[error("ODE integration failed at x = {x}: step size underflow")]
    StepSizeUnderflow { x: f64 },

    #[error("Wronskian vanishes at k = {k} (|W| = {modulus:.3e})")]
    DegenerateWronskian { k: String, modulus: f64 },

    #[error("non-finite value encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("not enough samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("{what} under-resolved: refinement changes the result by {gap:.3e}")]
    UnderResolved { what: &'static str, gap: f64 },

    #[error("singular linear system")]
    Singular,

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LabError {
    /// True for errors caused by the numerics rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            LabError::NewtonDivergence { .. }
                | LabError::StepSizeUnderflow { .. }
                | LabError::DegenerateWronskian { .. }
                | LabError::NonFinite { .. }
                | LabError::UnderResolved { .. }
                | LabError::Singular
                | LabError::NoBoundState
                | LabError::ResonantPotential { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
