use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid defect: {0}")]
    InvalidDefect(String),

    /// `z - H(kappa)` is numerically singular at some grid point: `z` sits on
    /// the (deformed) discrete spectrum.
    #[error("singular k-point {kpoint:?} at z = {z} (condition estimate {condition:.3e})")]
    SingularKPoint {
        z: Complex64,
        kpoint: Vec<f64>,
        condition: f64,
    },

    #[error("singular matrix at z = {z}")]
    SingularMatrix { z: Complex64 },

    #[error("no convergence after {iterations} iterations (last z = {z}, residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        z: Complex64,
        residual: f64,
    },

    #[error("iterate z = {z} left the trust region of radius {radius} around {start}")]
    DivergedOutsideWindow {
        start: Complex64,
        z: Complex64,
        radius: f64,
    },

    #[error("branch point of the free kernel at z = 0")]
    BranchPoint,

    #[error("resonance is not simple: second singular value {second:.3e} below threshold")]
    DegenerateResonance { second: f64 },

    #[error("defect does not match the expected pattern: {0}")]
    PatternMismatch(String),

    #[error("evaluator mismatch: {0}")]
    Mismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable name used on the diagnostic stream.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidModel(_) => "InvalidModel",
            Error::InvalidParams(_) => "InvalidParams",
            Error::InvalidDefect(_) => "InvalidDefect",
            Error::SingularKPoint { .. } => "SingularKPoint",
            Error::SingularMatrix { .. } => "SingularMatrix",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::DivergedOutsideWindow { .. } => "DivergedOutsideWindow",
            Error::BranchPoint => "BranchPoint",
            Error::DegenerateResonance { .. } => "DegenerateResonance",
            Error::PatternMismatch(_) => "PatternMismatch",
            Error::Mismatch(_) => "Mismatch",
            Error::Parse(_) => "Parse",
            Error::Io(_) => "Io",
        }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularKPoint { .. }
                | Error::SingularMatrix { .. }
                | Error::NoConvergence { .. }
                | Error::DivergedOutsideWindow { .. }
                | Error::BranchPoint
                | Error::DegenerateResonance { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Non-fatal conditions reported alongside results.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// Two bands closer than the degeneracy tolerance at `k`.
    DegenerateBands { k: Vec<f64>, gap: f64 },
    /// A band inside the energy window has (nearly) vanishing group velocity,
    /// or two bands cross inside it; the continuation is unreliable there.
    VanHoveProximity { k: Vec<f64>, band: usize, energy: f64, gradient: f64 },
    /// `|det(1 + i h')|` is nearly zero: reduce the deformation amplitude.
    DeformationTooStrong { k: Vec<f64>, modulus: f64 },
}
