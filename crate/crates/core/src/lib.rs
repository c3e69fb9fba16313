//! Differentiable Lindblad dynamics for discovering and verifying autonomous
//! error-correcting encodings of a lossy oscillator coupled to an ancilla.

pub mod adjoint;
pub mod ansatz;
pub mod circuit;
pub mod codes;
pub mod config;
pub mod dressed;
pub mod error;
pub mod hilbert;
pub mod lindblad;
pub mod objective;
pub mod optimizer;
pub mod record;

pub use error::{Error, Result};
