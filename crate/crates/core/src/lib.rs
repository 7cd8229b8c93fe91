//! Numerical verification of Fock–Carleson measures and weighted composition
//! operators on Fock–Sobolev spaces over ℂⁿ.

pub mod carleson;
pub mod cli;
pub mod compop;
pub mod divergence;
pub mod error;
pub mod geometry;
pub mod measures;
pub mod funcspace;
pub mod quadrature;
pub mod suite;

pub use error::{FockError, Result};
