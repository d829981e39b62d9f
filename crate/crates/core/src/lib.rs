//! Offline policy learning in tabular MDPs through marginalized importance
//! weights.
//!
//! The crate covers exact planning on finite models, offline data generation,
//! hypothesis classes, the empirical and population Lagrangians (plain,
//! behavior-regularized, and augmented with an occupancy-validity penalty),
//! saddle-point solvers, and closed-form oracles used to verify them.
//!
//! Everything is `no_std` with `alloc`.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod classes;
pub mod data;
pub mod error;
pub mod instances;
pub mod linalg;
pub mod model;
pub mod objectives;
pub mod oracles;
pub mod solvers;
pub mod table;

pub use error::{Error, Result};
