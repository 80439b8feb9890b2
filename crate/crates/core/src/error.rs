/// Error kinds shared by every module in this crate.
///
/// Integration errors carry the last time the state was still trustworthy so
/// callers can report partial results instead of discarding the whole run.
#[derive(Debug, Clone, thiserror::Error)]
pub enum SimError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The top of the truncated basis holds too much population for the
    /// result to be trusted; rerun with a larger `n_max`.
    #[error("truncation overflow at t = {t}: top-band mass {tail_mass:.3e} exceeds tolerance {tolerance:.3e}")]
    TruncationOverflow {
        t: f64,
        tail_mass: f64,
        tolerance: f64,
    },

    #[error("integration failed at t = {last_good_t}: {reason}")]
    IntegrationFailure { last_good_t: f64, reason: String },

    /// `steady_state` ran out of horizon before the residual dropped below tol.
    #[error("no stationary state within t = {horizon}: residual {residual:.3e} > tol {tol:.3e}")]
    NonStationary {
        horizon: f64,
        residual: f64,
        tol: f64,
    },
}

pub type Result<T> = std::result::Result<T, SimError>;
