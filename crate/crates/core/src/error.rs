use thiserror::Error;

/// Errors raised while building models or computing spectra.
#[derive(Debug, Error)]
pub enum Error {
    #[error("spin site {site} out of range 1..={n_spins}")]
    SiteOutOfRange { site: usize, n_spins: usize },

    #[error("unsupported Pauli axis {0}; only x and z are real")]
    UnsupportedAxis(char),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension {dim} exceeds the configured limit {limit}")]
    DimensionLimit { dim: usize, limit: usize },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("operator is not exactly symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("parity is broken: {0}")]
    ParityBroken(String),

    #[error("degenerate bifurcation point: tunneling equals the summed Ising couplings")]
    DegenerateKappa,

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error("cutoff sweep not converged: {0}")]
    CutoffNotConverged(String),

    #[error("eigenvalues increased with cutoff at level {level}: {from} -> {to}")]
    NonMonotone { level: usize, from: f64, to: f64 },

    #[error("acceptance criteria failed: {0}")]
    AcceptanceFailed(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable code, used in CLI diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::SiteOutOfRange { .. } => "site_out_of_range",
            Error::UnsupportedAxis(_) => "unsupported_axis",
            Error::InvalidModel(_) => "invalid_model",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::DimensionLimit { .. } => "dimension_limit",
            Error::DimensionMismatch(..) => "dimension_mismatch",
            Error::NotSymmetric { .. } => "not_symmetric",
            Error::ParityBroken(_) => "parity_broken",
            Error::DegenerateKappa => "degenerate_kappa",
            Error::NoConvergence(_) => "no_convergence",
            Error::CutoffNotConverged(_) => "cutoff_not_converged",
            Error::NonMonotone { .. } => "non_monotone",
            Error::AcceptanceFailed(_) => "acceptance_failed",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }

    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotSymmetric { .. }
                | Error::NoConvergence(_)
                | Error::CutoffNotConverged(_)
                | Error::NonMonotone { .. }
                | Error::AcceptanceFailed(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
