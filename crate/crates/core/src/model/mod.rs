//! The forward model: kernels, peak signature, matrix background, expected
//! intensity and the observation likelihoods.

pub mod kernel;
pub mod likelihood;
pub mod special;
pub mod state;
pub mod truncated_gamma;

pub use kernel::{
    fwhm, kernel_deriv, kernel_eval, resolution_from_width, width_from_resolution, KernelKind,
};
pub use likelihood::{log_likelihood, LikelihoodKind};
pub use special::{exp_integral_e1, solve_bracketed};
pub use state::{
    background_eval, mean_intensity, signature_eval, BackgroundParams, ModelState, PeakParams,
};
pub use truncated_gamma::{trunc_gamma_logpdf, trunc_gamma_mean, trunc_gamma_sample, TruncatedGamma};
