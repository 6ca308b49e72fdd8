use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    /// Input carries no usable information (e.g. a constant series).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A Toeplitz system or AR recursion hit a reflection coefficient on or
    /// outside the unit circle.
    #[error("not positive definite at order {order}: reflection coefficient {reflection}")]
    NotPositiveDefinite { order: usize, reflection: f64 },

    #[error("numerical degeneracy: {0}")]
    Numerical(String),

    #[error("unsupported polynomial order {0}; supported orders are 0..=3")]
    UnsupportedOrder(usize),

    #[error("bootstrap draw {index} failed twice: {reason}")]
    BootstrapAbort { index: usize, reason: String },

    #[error("likelihood maximisation did not converge (best grid point d={d}, phi={phi})")]
    MleNonConvergence { d: f64, phi: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the CLI: 2 for bad input, 3 for numerical trouble.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_)
            | Error::InvalidDesign(_)
            | Error::UnsupportedOrder(_)
            | Error::Config(_)
            | Error::Io(_) => 2,
            Error::DegenerateInput(_)
            | Error::NotPositiveDefinite { .. }
            | Error::Numerical(_)
            | Error::BootstrapAbort { .. }
            | Error::MleNonConvergence { .. } => 3,
        }
    }
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::InvalidParameter(format!(
            "{what} contains a non-finite value at index {i}"
        ))),
        None => Ok(()),
    }
}
