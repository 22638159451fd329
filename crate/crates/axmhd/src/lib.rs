//! Numerical laboratory for axisymmetric incompressible MHD without swirl and with
//! vertical-only viscosity, in the variables Γ = ω_θ/r and Π = b_θ/r.

pub mod checkpoint;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod field3d;
pub mod grid;
pub mod losing;
pub mod lp;
pub mod norms;
pub mod records;
pub mod solver;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
