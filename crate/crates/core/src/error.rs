use thiserror::Error;

use crate::numerics::LinalgError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("singular constraint: |sin(phase)| = {sin_phase:e} (phase must avoid 0 and pi)")]
    SingularVhc { sin_phase: f64 },
    #[error("normal force {force:e} N below floor; moment arm undefined")]
    DegenerateForce { force: f64 },
    #[error("orbit energy {energy} below reduced potential {potential} at q2 = {q2}")]
    BelowPotential {
        q2: f64,
        energy: f64,
        potential: f64,
    },
    #[error("orbit is not a propeller orbit: {0}")]
    NotPropeller(String),
    #[error("no section crossing before t = {max_time} s")]
    NoCrossing { max_time: f64 },
    #[error("non-finite state at t = {time} s")]
    NonFiniteState { time: f64 },
    #[error("high-gain episode did not settle within {timeout} s (residual {residual:e} rad/s)")]
    EpisodeTimeout { timeout: f64, residual: f64 },
    #[error("a non-decaying mode of the linearized map is unreachable (PBH margin {sigma_min:e})")]
    NotControllable { sigma_min: f64 },
    #[error("gain synthesis failed: {0}")]
    NotStabilizable(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
