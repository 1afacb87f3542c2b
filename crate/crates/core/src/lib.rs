//! Numerics for theta series of even positive-definite lattices and the
//! trace functions of the associated vertex algebras: characters, Siegel
//! theta sums on the upper half-space, modular S/T data, sublattice
//! branching, and a verification harness that checks the transformation
//! identities numerically.

pub mod branching;
pub mod chars;
pub mod cli;
pub mod error;
pub mod io;
pub mod kernels;
pub mod lattice;
mod linalg;
pub mod modular;
pub mod qseries;
pub mod verify;

pub use error::{Error, Result};
