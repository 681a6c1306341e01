//! Noise-assisted simulation of open quantum systems on emulated noisy devices.
//!
//! The crate builds Trotterized circuits, characterizes the stochastic Pauli
//! noise a device applies per layer, reshapes that noise with partial
//! probabilistic error cancellation and reset channels, and checks the result
//! against a classical Lindblad solver.

pub mod channels;
pub mod characterization;
pub mod emulator;
pub mod error;
pub mod gate;
pub mod hamiltonian;
pub mod linalg;
pub mod lindblad;
pub mod pauli;
pub mod pec;
pub mod trotter;

pub use error::{Error, Result};
