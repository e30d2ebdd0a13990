//! Boundary-constrained covariance on a masked 2D grid.
//!
//! The covariance is expanded in the lowest Dirichlet eigenfunctions of the
//! domain Laplacian, weighted by the spectral density of a 2D squared
//! exponential. Every eigenfunction vanishes on the outer edge and on hole
//! perimeters, so the resulting GP prior does too.

mod basis;
mod domain;
mod eigen;

pub use basis::{build_basis, eval_constrained, wrap_as_kernel, ReducedRankBasis};
pub use domain::GridDomain;

/// Spectral density of the squared-exponential kernel in two dimensions.
pub fn se_spectral_density_2d(signal_variance: f64, length_scale: f64, omega: f64) -> f64 {
    let l2 = length_scale * length_scale;
    signal_variance * 2.0 * std::f64::consts::PI * l2 * (-0.5 * l2 * omega * omega).exp()
}
