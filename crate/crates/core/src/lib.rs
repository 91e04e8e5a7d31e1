//! Numerical laboratory for isospectral Schrödinger flows.
//!
//! The library evolves 1D potentials under the KdV equation, builds the
//! associated Hamiltonians and flow generators as dense matrices, and checks
//! at the operator and scattering level that the evolved Hamiltonians are
//! unitarily equivalent while the scattering phases (and hence the physics
//! tied to the position representation) keep moving.
//!
//! Units: ħ = 1, 2m = 1 throughout, so the Hamiltonian is exactly
//! `-d²/dq² + V(q)`.

pub mod error;
pub mod fourier;
pub mod grid;
pub mod kdv;
pub mod lax;
pub mod scattering;
pub mod schrodinger;
pub mod tensor;

pub use error::Error;
pub use grid::{BoundaryKind, Field, Grid};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
