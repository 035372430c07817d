//! Multi-mode variational dynamics for attractive bosons in one dimension,
//! an exact two-boson reference solution, and convergence diagnostics built
//! on the interaction-independent center-of-mass motion.

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod exact2;
pub mod fock;
pub mod mctdhb;
pub mod model;
pub mod observables;

pub use error::{Error, Result};
