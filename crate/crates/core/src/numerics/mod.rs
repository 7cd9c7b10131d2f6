//! Small numerical toolkit shared by the rest of the crate.

pub mod gamma;
pub mod quad;
pub mod sum;

pub use gamma::{digamma, ln_gamma, ln_factorial};
pub use quad::{composite_nodes, gauss_kronrod, gauss_legendre, GaussLegendre, QuadratureConfig};
pub use sum::{pairwise_sum, pairwise_sum_by, par_sum_by};

use num_complex::Complex64;

/// A value together with an error or spread estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
}

impl Estimate {
    pub fn exact(value: Complex64) -> Self {
        Self { value, error: 0.0 }
    }
}
