use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure kinds, grouped by [`ErrorClass`] for reporting.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported lattice geometry: depth {depth} E_R (wells must sit at antinodes, depth < 0)")]
    UnsupportedGeometry { depth: f64 },

    #[error("flat band at zero lattice depth: Wannier functions are ill-defined")]
    FlatBand,

    #[error("Wannier gauge failure: tail/peak ratio {ratio:.3e} at two periods")]
    GaugeFailure { ratio: f64 },

    #[error("quadrature grid too coarse: {points_per_period} points per lattice period (need >= {required})")]
    Resolution {
        points_per_period: usize,
        required: usize,
    },

    #[error("photon cutoff n_max = {n_max} too small for estimated photon number {estimate:.4}")]
    CutoffTooSmall { n_max: usize, estimate: f64 },

    #[error("model validity violated ({param}): {reason}")]
    ModelValidity { param: String, reason: String },

    #[error("Mott state undefined: {atoms} atoms not divisible by {sites} sites")]
    UndefinedMott { atoms: usize, sites: usize },

    #[error("no sign change of the crossing condition in g1d range [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Coarse classification used by the CLI to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Argument,
    Physics,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidArgument(_) => ErrorClass::Argument,
            Error::UnsupportedGeometry { .. }
            | Error::FlatBand
            | Error::CutoffTooSmall { .. }
            | Error::ModelValidity { .. }
            | Error::UndefinedMott { .. }
            | Error::Bracket { .. } => ErrorClass::Physics,
            Error::GaugeFailure { .. } | Error::Resolution { .. } | Error::Numerical(_) => {
                ErrorClass::Numerical
            }
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
