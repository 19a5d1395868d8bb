//! Finite-dimensional decoherent-histories engine.

pub mod acceptance;
pub mod cli;
pub mod cosmo;
pub mod ensembles;
pub mod error;
pub mod histories;
pub mod io;
pub mod openquantum;
pub mod oscillator;
pub mod qops;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
