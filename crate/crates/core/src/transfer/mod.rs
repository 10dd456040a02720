//! Discretized transfer operators: Ulam matrices, invariant densities,
//! contraction estimates and asymptotic variances.

pub mod density;
pub mod doeblin_fortet;
pub mod ulam;
pub mod variance;

pub use density::{centering_constant, invariant_density, ulam_measure, CenteringConstant, Density};
pub use doeblin_fortet::{doeblin_fortet_estimate, DoeblinFortet};
pub use ulam::{ulam_matrix, CsrMatrix, UlamOperator, ULAM_CONVENTION};
pub use variance::{green_kubo_variance, VarianceEstimate, VarianceMode, VarianceParams};
