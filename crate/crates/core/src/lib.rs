//! Two-photon polarization states with hidden-mode distinguishability, and
//! tomography of the block-structured visible density matrix.

pub mod cli;
pub mod error;
pub mod hilbert;
pub mod io;
pub mod measurement;
pub mod metrics;
mod optim;
pub mod polarization;
pub mod tomography;

pub use error::{Error, Result};
