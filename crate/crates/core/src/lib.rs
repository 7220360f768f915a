//! Meshfree Poisson solvers built on radial basis function partition of
//! unity methods.

pub mod dd;
pub mod error;
pub mod geometry;
pub mod kernels;
pub mod nodes;
pub mod partition;
pub mod problems;
pub mod sampling;
pub mod spatial;
pub mod system;

pub use error::{PumError, Result};
