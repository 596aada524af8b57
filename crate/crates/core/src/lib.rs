//! Search and analysis of fixed data-encoding circuits for patch-wise
//! quantum convolutional feature extraction.
//!
//! A circuit in [`circuit`] maps a `k x k` pixel patch to `k^2` Pauli-Z
//! expectations via the exact statevector [`simulator`]. [`features`] slides
//! it over images, [`trainer`] fits a small classical head on the result, and
//! [`mcts`] searches over circuit edits using the validation AUC as reward.
//! [`metrics`] holds the training-free diagnostics (entanglement, Fourier
//! spectra, effective rank) and their correlation analyses.

pub mod circuit;
pub mod data;
pub mod error;
pub mod features;
pub mod mcts;
pub mod metrics;
pub mod simulator;
pub mod trainer;

pub use circuit::{Action, EncodingCircuit, Gate, GateKind};
pub use data::{Dataset, Split};
pub use error::{Error, Result};
