//! Numerical kernels for the fractional viscous Hamilton–Jacobi equation
//! `u_t + (-Δ)^s u = |∇u|^p` on a bounded interval with zero exterior data.

pub mod barrier;
pub mod error;
pub mod evolve;
pub mod fraclap;
pub mod grid;
pub mod quad;
pub mod regularize;
pub mod spectral;
pub mod table;

pub use error::{Error, Result};
pub use fraclap::{normalization_constant, FracLapOperator};
pub use grid::{Domain, Grid, GridFunction};
