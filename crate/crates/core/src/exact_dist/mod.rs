//! Reference distributions used as oracles for fitting, error measurement
//! and coupled sampling.

mod gamma;
mod gaussian;
mod ncchi2;

pub use gamma::{gamma_kernel, gamma_pq};
pub use gaussian::{
    gaussian_inv_cdf, gaussian_tail_moment_recursive, half_normal_mean, norm_cdf, norm_isf,
    norm_pdf, norm_ppf, norm_sf, GaussianRef, GAUSSIAN_Z_LIMIT,
};
pub use ncchi2::{cir_transition_params, ncchi2_cdf, ncchi2_inv_cdf, CirTransition, NcChi2Ref};

use crate::error::Result;

/// A continuous distribution with enough structure to integrate functions of
/// its quantile by the substitution `u = F(x)`.
///
/// Integration runs over an auxiliary variable `s` with `x = to_x(s)`; the
/// map is chosen so that `pdf(x) dx/ds` is bounded.
pub trait ContinuousDist: Sync {
    fn cdf(&self, x: f64) -> f64;
    fn sf(&self, x: f64) -> f64;
    fn pdf(&self, x: f64) -> f64;
    fn cdf_sf_pdf(&self, x: f64) -> (f64, f64, f64) {
        (self.cdf(x), self.sf(x), self.pdf(x))
    }
    fn quantile(&self, u: f64) -> Result<f64>;
    /// Inverse survival function `F⁻¹(1-v)`.
    fn isf(&self, v: f64) -> Result<f64>;
    /// Returns `(x, dx/ds)`.
    fn to_x(&self, s: f64) -> (f64, f64);
    fn from_x(&self, x: f64) -> f64;
    /// Range of `s` outside which the probability mass is negligible.
    fn s_bounds(&self) -> (f64, f64);
}
