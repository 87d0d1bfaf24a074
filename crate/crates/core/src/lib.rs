//! Lévy adaptive regression kernel (LARK) models for MALDI-TOF mass spectra.
//!
//! A spectrum is modelled as a thermal floor plus an exponentially decaying
//! matrix background plus a random number of peak kernels. The posterior over
//! peak count, locations, abundances and resolutions is explored with a
//! reversible-jump sampler; peaks are then read off either the single
//! highest-posterior draw or the down-crossings of the model-averaged
//! derivative.
//!
//! Module map:
//!
//! * [`spectrum`]: loading, standardizing, averaging and calibrating spectra.
//! * [`model`]: kernels, resolution algebra, mean intensity, likelihoods and
//!   the special functions behind the abundance prior.
//! * [`priors`]: data-driven hyperparameter elicitation and the joint prior.
//! * [`sampler`]: the reversible-jump chain and its initializer.
//! * [`peaks`]: posterior summaries, peak identification and truth matching.
//! * [`simulate`]: forward-model spectrum generator with known truth.
//! * [`cli`]: the command implementations behind the `lark` binary.

pub mod cli;
pub mod config;
pub mod error;
pub mod model;
pub mod nnls;
pub mod peaks;
pub mod priors;
pub mod sampler;
pub mod simulate;
pub mod spectrum;

pub use error::{Error, Result};
