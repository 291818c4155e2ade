use alloc::string::String;

use thiserror::Error;

/// Every failure the core can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
    #[error("Schur block swap rejected (residual {residual:e})")]
    ReorderFailed { residual: f64 },
    #[error("resolvent jwI - A is singular at w = {omega}")]
    ResolventSingular { omega: f64 },
    #[error("feedthrough is not invertible (condition number {cond:e})")]
    NotInvertible { cond: f64 },
    #[error("algebraic loop: I - D22*Dk is singular")]
    AlgebraicLoop,
    #[error("Hamiltonian has eigenvalues on the imaginary axis; no stabilizing solution")]
    NoStabilizingSolution,
    #[error("stable subspace basis is ill-conditioned (condition number {cond:e})")]
    IllConditioned { cond: f64 },
    #[error("system is not Hurwitz")]
    NotHurwitz,
    #[error("structural: {0}")]
    Structural(String),
    #[error("no feasible H-infinity level found below {cap}")]
    Unstabilizable { cap: f64 },
    #[error("infeasible design: {0}")]
    InfeasibleDesign(String),
    #[error("simulation diverged after t = {t}")]
    Divergence { t: f64 },
    #[error("triggering function reached {f:e} at t = {t} before an event was detected")]
    ThresholdViolation { t: f64, f: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = core::result::Result<T, Error>;
