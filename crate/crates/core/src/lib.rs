//! Quantum de Finetti bounds for one-way LOCC measurements, symmetric
//! extension tests for separability, and sum-of-squares relaxations of
//! product-state optimization.

pub mod definetti;
pub mod entropy;
pub mod error;
pub mod extension;
pub mod io;
pub mod linalg;
pub mod measurement;
pub mod rng;
pub mod sos;
pub mod state;
pub mod sweeps;
pub mod symmetry;

pub use entropy::EntropyValue;
pub use error::{Error, Result};
pub use linalg::{CMat, CVec, C64};
pub use state::{DensityOperator, Ensemble, Repair};
