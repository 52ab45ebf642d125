use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("gradient of the defining function vanishes (|D_w rho| = {norm:.3e})")]
    DegenerateGradient { norm: f64 },

    #[error("ray from the fiber anchor along direction #{direction} never crosses the level set")]
    RootFindFailure { direction: usize },

    #[error("center push depth {depth} leaves the fiber at grid index {index} (rho = {value})")]
    PushTooDeep { depth: f64, index: usize, value: f64 },

    #[error("gradient ordering |D rho1| > |D rho2| fails at grid index {index}")]
    GradientOrderViolation { index: usize },

    #[error("dual transform denominator vanishes at sample {index}")]
    VanishingDenominator { index: usize },

    #[error("point {modulus} lies outside the closed unit disk")]
    OutsideDisk { modulus: f64 },

    #[error("direction is not a unit vector (|nu| = {norm})")]
    BadDirection { norm: f64 },

    #[error("defining function returned a non-finite value at z = {z}")]
    NonFinite { z: crate::C64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("scenario schema error: {0}")]
    Schema(String),

    #[error("unknown scenario family `{0}`")]
    UnknownFamily(String),

    #[error("dimension n = {0} is not supported (need n >= 2)")]
    Dimension(usize),

    #[error("declared conjugate symmetry fails: mismatch {mismatch:.3e}")]
    SymmetryMismatch { mismatch: f64 },

    #[error("gamma is within twice the tolerance of the level but the optimizer is not flat (residual {flatness:.3e})")]
    Inconclusive { flatness: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Schema(_)
            | Error::UnknownFamily(_)
            | Error::Dimension(_)
            | Error::SymmetryMismatch { .. }
            | Error::Json(_)
            | Error::BadDirection { .. }
            | Error::OutsideDisk { .. } => 2,
            Error::Io(_) => 1,
            _ => 3,
        }
    }
}
