//! Lie-algebraic error-generator models of qubit-register decoherence,
//! decoherence-free subspace discovery and dense Lindblad dynamics.

pub mod dfs;
pub mod error;
pub mod gates;
pub mod lie;
pub mod lindblad;
mod linalg;
pub mod models;
pub mod operator;
pub mod perturbation;
pub mod sampling;

pub use error::{Error, Result};
pub use faer::c64;
