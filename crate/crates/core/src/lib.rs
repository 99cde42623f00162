//! Simulation and analysis of the bichromatic σ_z spin-dependent force on
//! trapped-ion qubits.
//!
//! Conventions used throughout:
//!
//! * Hamiltonians are H/ħ in rad/s; times are in seconds.
//! * Composite index = `spin * fock_dim + n`. Ion 0 is the most significant
//!   spin bit and bit value 0 means ↑ (σ_z = +1), so two-ion states are
//!   ordered ↑↑, ↑↓, ↓↑, ↓↓.
//! * σ_φ = cos φ σ_x + sin φ σ_y and a rotation by θ about φ is
//!   exp(−iθσ_φ/2).

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod analysis_fit;
pub mod error;
pub mod experiments;
pub mod hamiltonians;
pub mod linalg;
pub mod propagator;

pub use error::{Error, Result};
