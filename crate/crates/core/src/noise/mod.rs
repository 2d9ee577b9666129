//! Noise families used to calibrate answers, with exact density and pmf
//! accessors so that indistinguishability ratios can be checked analytically.
//!
//! Every sampler is an inverse transform of uniforms drawn from an explicit
//! [`RandomSource`], so a seed fixes the whole draw sequence.

mod admissible;
mod discrete;
mod laplace;
mod rng;

pub use admissible::{normalizing_constant, AdmissibleNoiseParams, AdmissibleShape};
pub use discrete::DiscreteLaplaceParams;
pub use laplace::LaplaceParams;
pub use rng::RandomSource;

/// Worst-case ratio between the output distributions of `z + N` and
/// `z' + N` when `|z − z'| = shift`.
pub trait ShiftRatioBound {
    fn density_ratio_bound(&self, shift: f64) -> f64;
}

/// Free-function form of [`ShiftRatioBound::density_ratio_bound`].
pub fn density_ratio_bound<P: ShiftRatioBound + ?Sized>(params: &P, shift: f64) -> f64 {
    params.density_ratio_bound(shift)
}
