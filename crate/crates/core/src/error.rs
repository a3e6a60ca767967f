use thiserror::Error;

/// Failure modes of the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate critical point at x = {location}: |psi''| = {curvature} below floor {floor}")]
    DegenerateCritical {
        location: f64,
        curvature: f64,
        floor: f64,
    },
    #[error("root bracketing ambiguous near x = {near}; refine the scan grid")]
    ScanTooCoarse { near: f64 },
    #[error("tangent fold of tau at x = {location}: |psi''| = {curvature}")]
    TangentRoot { location: f64, curvature: f64 },
    #[error("kick half-width is zero; the transition kernel is singular")]
    EpsilonZero,
    #[error("kick window under-resolved: eps * n = {product} < 4")]
    KernelUnderresolved { product: f64 },
    #[error("power iteration stalled at residual {residual} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("I_1 has {found} components, expected {expected} separated ones")]
    ComponentMerge { found: usize, expected: usize },
    #[error("sink certificate rejected: {0}")]
    TrapViolation(String),
    #[error("kicked orbit left the trap B_nu(z) at step {step}")]
    TrapEscape { step: u64 },
    #[error("admissible parameter set is empty")]
    EmptyAtlas,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl Error {
    /// Short stable identifier used in result files.
    pub fn class(&self) -> &'static str {
        match self {
            Error::DegenerateCritical { .. } => "DegenerateCritical",
            Error::ScanTooCoarse { .. } => "ScanTooCoarse",
            Error::TangentRoot { .. } => "TangentRoot",
            Error::EpsilonZero => "EpsilonZero",
            Error::KernelUnderresolved { .. } => "KernelUnderresolved",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::ComponentMerge { .. } => "ComponentMerge",
            Error::TrapViolation(_) => "TrapViolation",
            Error::TrapEscape { .. } => "TrapEscape",
            Error::EmptyAtlas => "EmptyAtlas",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
