//! Library for training feedforward networks of physical stochastic
//! neurons: binary activation switches whose firing probability is set by
//! the physics of a detector, a transistor, or a single-photon circuit.

pub mod data;
pub mod error;
pub mod estimators;
pub mod neuron;
pub mod oracles;
pub mod rng;

pub use error::{Error, Result};
