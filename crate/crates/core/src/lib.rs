//! Numerical core for the electrically driven rotor qubit: spectra, analytic
//! estimates, pulse propagation, gate calibration and the two-rotor model.

pub mod algebra;
pub mod analytic;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod gate_lab;
pub mod rotor;
pub mod search;
pub mod spectral;
pub mod two_qubit;

pub use error::{Result, RotorError};
pub use exec::Execution;
