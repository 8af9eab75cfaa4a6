//! Compile matrix product states with open or periodic boundaries into quantum circuits,
//! and check the results by exact statevector simulation.

pub mod compiler;
pub mod error;
pub mod json;
pub mod models;
pub mod mps;
pub mod simulator;
pub mod tensor;

pub use error::{Error, Result};
