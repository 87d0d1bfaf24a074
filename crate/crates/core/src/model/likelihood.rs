//! Observation models: gamma with mean μ and precision φ, and Gaussian with
//! mean μ and precision φ = 1/σ².

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use statrs::function::gamma::ln_gamma;

use super::kernel::KernelKind;
use super::state::{mean_intensity, ModelState};
use crate::error::{Error, Result};
use crate::spectrum::Spectrum;

/// Relative offset added to intensities before gamma-likelihood evaluation,
/// as a fraction of the spectrum mean. Standardized spectra always contain
/// an exact zero, which lies outside the gamma support.
pub const GAMMA_ZERO_OFFSET: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LikelihoodKind {
    GammaObs,
    /// `sample_precision = false` holds φ = 1/σ² fixed.
    GaussianObs { sample_precision: bool },
}

impl LikelihoodKind {
    pub fn samples_precision(self) -> bool {
        match self {
            LikelihoodKind::GammaObs => true,
            LikelihoodKind::GaussianObs { sample_precision } => sample_precision,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LikelihoodKind::GammaObs => "gamma",
            LikelihoodKind::GaussianObs { .. } => "normal",
        }
    }
}

impl fmt::Display for LikelihoodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LikelihoodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gamma" => Ok(LikelihoodKind::GammaObs),
            "normal" | "gaussian" => Ok(LikelihoodKind::GaussianObs {
                sample_precision: false,
            }),
            other => Err(Error::invalid(format!("unknown likelihood `{other}`"))),
        }
    }
}

/// Observations prepared for repeated likelihood evaluation.
#[derive(Debug, Clone)]
pub struct Observations {
    pub kind: LikelihoodKind,
    pub y: Vec<f64>,
    /// `ln y` (offset applied) for the gamma model; empty otherwise.
    ln_y: Vec<f64>,
}

impl Observations {
    pub fn new(kind: LikelihoodKind, spec: &Spectrum) -> Self {
        match kind {
            LikelihoodKind::GammaObs => {
                let delta = GAMMA_ZERO_OFFSET * spec.mean_intensity();
                let y: Vec<f64> = spec.intensity.iter().map(|v| v + delta).collect();
                let ln_y = y.iter().map(|v| v.ln()).collect();
                Self { kind, y, ln_y }
            }
            LikelihoodKind::GaussianObs { .. } => Self {
                kind,
                y: spec.intensity.clone(),
                ln_y: Vec::new(),
            },
        }
    }

    /// Log likelihood given the expected intensity at each grid point.
    pub fn log_likelihood(&self, mu: &[f64], phi: f64) -> f64 {
        debug_assert_eq!(mu.len(), self.y.len());
        let c = self.precision_constants(phi);
        let mut sum = 0.0;
        for (i, &m) in mu.iter().enumerate() {
            sum += self.term(i, m, phi, c);
        }
        sum
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Per-point constant that depends on φ only: `ln φ` for the gamma model,
    /// `-ln(2π/φ)/2` for the Gaussian one.
    #[inline]
    pub(crate) fn precision_constants(&self, phi: f64) -> f64 {
        match self.kind {
            LikelihoodKind::GammaObs => phi.ln(),
            LikelihoodKind::GaussianObs { .. } => -0.5 * (2.0 * PI / phi).ln(),
        }
    }

    /// Contribution of grid point `i`; `c` comes from `precision_constants`.
    #[inline]
    pub(crate) fn term(&self, i: usize, mu: f64, phi: f64, c: f64) -> f64 {
        let y = self.y[i];
        match self.kind {
            LikelihoodKind::GammaObs => {
                if !(mu > 0.0) {
                    return f64::NEG_INFINITY;
                }
                let a = phi * mu;
                a * c - ln_gamma(a) + (a - 1.0) * self.ln_y[i] - phi * y
            }
            LikelihoodKind::GaussianObs { .. } => {
                let r = y - mu;
                c - 0.5 * phi * r * r
            }
        }
    }
}

/// Log likelihood of `spec` under `state`.
///
/// Returns an error when the result is not finite (for example μ ≤ 0 under
/// the gamma model), which signals an invalid state.
pub fn log_likelihood(
    state: &ModelState,
    kind: KernelKind,
    lk: LikelihoodKind,
    spec: &Spectrum,
) -> Result<f64> {
    let obs = Observations::new(lk, spec);
    let xi_a = spec.range.0;
    let mu: Vec<f64> = spec
        .tof
        .iter()
        .map(|&t| mean_intensity(state, kind, t, xi_a))
        .collect();
    let ll = obs.log_likelihood(&mu, state.phi);
    if ll.is_finite() {
        Ok(ll)
    } else {
        Err(Error::invalid(format!("non-finite log likelihood ({ll})")))
    }
}
