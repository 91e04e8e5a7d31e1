use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Grid construction rejected (point count, parity, extent).
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// Two fields that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// An operation requires a periodic grid.
    #[error("{0} requires a periodic grid")]
    PeriodicRequired(&'static str),

    /// Parameter outside the documented preconditions.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A sampled or computed value is not finite.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Solution norm exploded during time stepping.
    #[error("blow-up detected at s = {s:.6e}: norm grew {ratio:.3e}x over the initial value")]
    BlowUp { s: f64, ratio: f64 },

    /// Potential support reaches the edge of the declared scattering window.
    #[error("scattering window violation: {0}")]
    WindowViolation(String),

    /// Adaptive ODE integration could not proceed.
    #[error("ODE integration failure: {0}")]
    OdeFailure(String),

    /// |a|^2 - |b|^2 = 1 failed beyond tolerance, signalling integrator inaccuracy.
    #[error("Wronskian identity violated at k = {k}: |a|^2 - |b|^2 - 1 = {defect:.3e}")]
    WronskianViolation { k: f64, defect: f64 },

    /// Unitary propagation lost unitarity beyond the abort threshold.
    #[error("unitarity lost at s = {s:.6e}: ||U*U - I|| = {defect:.3e}")]
    UnitarityLoss { s: f64, defect: f64 },

    /// Eigensolver did not reach the requested residual.
    #[error("eigensolver failure: residual {residual:.3e} exceeds {bound:.3e}")]
    EigenFailure { residual: f64, bound: f64 },

    /// Interpolation argument left the valid coordinate window.
    #[error("coordinate {q} outside the valid window [{lo}, {hi}]")]
    OutOfWindow { q: f64, lo: f64, hi: f64 },
}
