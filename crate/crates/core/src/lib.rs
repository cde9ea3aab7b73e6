//! Hierarchical-equations-of-motion generators for spin systems coupled to
//! damped bosonic modes, with symmetry-resolved spectral analysis of
//! dissipative phase transitions.

pub mod cli;
pub mod convergence;
pub mod dpt;
pub mod embedding;
pub mod error;
pub mod heom;
pub mod hierarchy;
pub mod matrix;
pub mod model;
pub mod operators;
pub mod spectra;
pub mod symmetry;

pub use error::{Error, Result};
