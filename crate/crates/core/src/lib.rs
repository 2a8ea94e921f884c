//! Numerical laboratory for multilinear oscillatory integrals over a
//! hypersurface `M = {ρ = 0}` in R^(2d).

pub mod bump;
pub mod cli;
pub mod config;
pub mod decay;
pub mod error;
pub mod field;
pub mod instance;
pub mod jet;
pub mod kernel;
pub mod manifest;
pub mod nondegeneracy;
pub mod packet;
pub mod selftest;
pub mod signal_io;
pub mod stationary;
pub mod surface;
pub mod tiling;
pub mod transform;
pub mod window;

pub use error::{Error, Result};
