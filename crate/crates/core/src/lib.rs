//! Galerkin simulator and verification harness for regularized compressible
//! viscous flow in a periodic channel with friction walls.

pub mod artifact;
pub mod config;
pub mod constitutive;
pub mod density;
pub mod diagnostics;
pub mod error;
pub mod limit_lab;
pub mod geometry;
pub mod momentum;
pub mod simulation;

pub use error::{Error, Result};
