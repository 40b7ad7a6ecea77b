use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("quadrature failed on axis {axis}: error estimate {estimate:.3e} after {evaluations} evaluations")]
    QuadratureFailure { axis: String, estimate: f64, evaluations: usize },

    #[error("grid too narrow: {0}")]
    GridTooNarrow(String),

    #[error("wavelength {lambda_um} um outside the valid range [{min_um}, {max_um}] of {medium}")]
    OutOfRange { medium: String, lambda_um: f64, min_um: f64, max_um: f64 },

    #[error("phase mismatch vanishes: poling period is infinite")]
    InfinitePeriod,

    #[error("mode {mode} cannot reach full conversion: its coupling is zero")]
    Unreachable { mode: usize },

    #[error("time stepping not converged after {steps} steps: last change {change:.3e}, halving ratio {ratio:.3}")]
    NotConverged { steps: usize, change: f64, ratio: f64 },

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("data file: {0}")]
    Data(String),

    #[error("at detuning ({d_omega_a}, {d_omega_b}): {source}")]
    AtPoint { d_omega_a: f64, d_omega_b: f64, source: Box<Error> },
}

impl Error {
    /// True for failures caused by bad inputs rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::InvalidConfig(_)
            | Error::OutOfRange { .. }
            | Error::Data(_)
            | Error::BasisMismatch(_)
            | Error::GridTooNarrow(_) => true,
            Error::AtPoint { source, .. } => source.is_config_error(),
            _ => false,
        }
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "invalid_config",
            Error::DegenerateModel(_) => "degenerate_model",
            Error::Overflow(_) => "overflow",
            Error::QuadratureFailure { .. } => "quadrature_failure",
            Error::GridTooNarrow(_) => "grid_too_narrow",
            Error::OutOfRange { .. } => "out_of_range",
            Error::InfinitePeriod => "infinite_period",
            Error::Unreachable { .. } => "unreachable",
            Error::NotConverged { .. } => "not_converged",
            Error::BasisMismatch(_) => "basis_mismatch",
            Error::Data(_) => "data",
            Error::AtPoint { source, .. } => source.kind(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
