//! Numerical laboratory for two-dimensional steady periodic gravity water
//! waves with vorticity.

pub mod blowup;
pub mod config;
pub mod error;
pub mod field;
pub mod inteq;
pub mod laminar;
pub mod pressure;
pub mod quad;
pub mod report;
pub mod vorticity;
pub mod wavegen;

pub use error::{Error, Result};
pub use vorticity::VorticityFn;
