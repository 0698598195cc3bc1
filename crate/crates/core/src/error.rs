use thiserror::Error;

/// Errors surfaced by model construction, solvers and integrators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("topology would need {required} nodes, more than the node id type can index")]
    NodeCountOverflow { required: u128 },

    #[error("iteration did not converge after {iterations} steps, last residual {residual:.3e}")]
    NonConvergence { residual: f64, iterations: usize },

    #[error("state diverged at t = {t}")]
    Diverged { t: f64 },

    #[error("self-similar recursion hit a zero coefficient at generation {generation}")]
    ZeroCoefficient { generation: usize },

    #[error("sigma table is not isotropic: dissipation multiplier varies by {spread:.3e} (relative) across test modes")]
    NotIsotropic { spread: f64 },

    #[error("incompatible truncations: field truncation {field} exceeds the supported limit {limit}")]
    IncompatibleTruncation { field: u32, limit: u32 },

    #[error("path stores snapshots at stride {stride}; the log-weight needs the full per-step state history")]
    MissingStateHistory { stride: usize },

    #[error("degenerate test set: every test field is annihilated by the Laplacian")]
    DegenerateTestSet,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
