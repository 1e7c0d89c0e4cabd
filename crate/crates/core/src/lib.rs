//! Numerical toolkit for stationary Poisson-chaos sequences.
//!
//! The crate simulates `X_u = I_1(ψ_u)` driven by one Poisson configuration,
//! computes truncated chaos functionals exactly, evaluates the diagram
//! formula over grouped set partitions and checks the functional
//! Breuer–Major central limit behaviour by Monte Carlo.

pub mod error;
pub mod chaos;
pub mod kernels;
pub mod process;
pub mod spectral;
pub mod diagram;
pub mod harness;

pub use error::{PclError, Result};
