//! Numerics for perturbed two-dimensional magnetic operators in the Laguerre basis.
//!
//! The crate evaluates the magnetic Laguerre functions ψ_{n,m}, the radial
//! scaling sums built from them, weighted matrix elements of potentials and
//! planar regions, Dixmier-trace approximants, twisted convolution kernels and
//! traces per unit volume.

pub mod elements;
pub mod dixmier;
pub mod error;
pub mod hull;
pub mod laguerre;
pub mod magnetic;
pub mod numerics;
pub mod regions;
pub mod scaling;
pub mod tuv;

pub use error::{Error, Result};
pub use laguerre::{BasisIndex, MagneticParams};
