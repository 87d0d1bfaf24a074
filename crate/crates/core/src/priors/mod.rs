//! Hyperparameters, the joint prior density and ancestral prior sampling.

mod elicit;

pub use elicit::{
    elicit_abundance, elicit_background, elicit_phi, elicit_scale, elicit_signal_fraction,
    robust_sigma, solve_lambda_eps, BackgroundEstimate, MIN_DETECTABLE_FRACTION,
};

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Geometric, LogNormal};
use statrs::function::gamma::ln_gamma;

use crate::config::KeyValueFile;
use crate::error::{Error, Result};
use crate::model::{BackgroundParams, ModelState, PeakParams, TruncatedGamma};

/// Default prior variance of log ρ_j around log R.
pub const DEFAULT_SIGMA2_RHO: f64 = 0.1225;
/// Default prior variance of log R.
pub const DEFAULT_SIGMA2_R: f64 = 0.49;
/// Default prior variance of log ω₀.
pub const DEFAULT_SIGMA2_OMEGA0: f64 = 0.25;
/// Shape of the precision prior, giving a coefficient of variation of 2.
pub const DEFAULT_A_PHI: f64 = 0.25;

/// All prior constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters {
    /// Prior mean number of peaks ν_J.
    pub nu_j: f64,
    /// Abundance rate λ.
    pub lambda: f64,
    /// Abundance truncation ε.
    pub eps: f64,
    /// TOF window `[t0, t1]` in µs.
    pub t0: f64,
    pub t1: f64,
    pub sigma2_rho: f64,
    pub mu_r: f64,
    pub sigma2_r: f64,
    pub a_phi: f64,
    pub b_phi: f64,
    pub a_s: f64,
    pub b_s: f64,
    pub lambda0: f64,
    pub omega0_hat: f64,
    pub sigma2_omega0: f64,
    pub gamma_fixed: f64,
}

/// Config keys in the order they are written.
pub const HYPERPARAMETER_KEYS: [&str; 16] = [
    "nu_J",
    "lambda",
    "eps",
    "T0",
    "T1",
    "sigma2_rho",
    "mu_R",
    "sigma2_R",
    "a_phi",
    "b_phi",
    "a_s",
    "b_s",
    "lambda0",
    "omega0_hat",
    "sigma2_omega0",
    "gamma_fixed",
];

impl Hyperparameters {
    pub fn delta_t(&self) -> f64 {
        self.t1 - self.t0
    }

    pub fn validate(&self) -> Result<()> {
        let fields = self.values();
        for (key, v) in HYPERPARAMETER_KEYS.iter().zip(fields) {
            let ok = match *key {
                "T0" => v.is_finite(),
                _ => v > 0.0 && v.is_finite(),
            };
            if !ok {
                return Err(Error::Config(format!("`{key}` must be positive and finite (got {v})")));
            }
        }
        if !(self.t0 < self.t1) {
            return Err(Error::Config(format!(
                "TOF window is empty: T0={} >= T1={}",
                self.t0, self.t1
            )));
        }
        Ok(())
    }

    fn values(&self) -> [f64; 16] {
        [
            self.nu_j,
            self.lambda,
            self.eps,
            self.t0,
            self.t1,
            self.sigma2_rho,
            self.mu_r,
            self.sigma2_r,
            self.a_phi,
            self.b_phi,
            self.a_s,
            self.b_s,
            self.lambda0,
            self.omega0_hat,
            self.sigma2_omega0,
            self.gamma_fixed,
        ]
    }

    pub fn from_config(kv: &KeyValueFile) -> Result<Self> {
        let g = |k: &str| kv.require_f64(k);
        let h = Self {
            nu_j: g("nu_J")?,
            lambda: g("lambda")?,
            eps: g("eps")?,
            t0: g("T0")?,
            t1: g("T1")?,
            sigma2_rho: g("sigma2_rho")?,
            mu_r: g("mu_R")?,
            sigma2_r: g("sigma2_R")?,
            a_phi: g("a_phi")?,
            b_phi: g("b_phi")?,
            a_s: g("a_s")?,
            b_s: g("b_s")?,
            lambda0: g("lambda0")?,
            omega0_hat: g("omega0_hat")?,
            sigma2_omega0: g("sigma2_omega0")?,
            gamma_fixed: g("gamma_fixed")?,
        };
        h.validate()?;
        Ok(h)
    }

    /// Writes every field into `kv`, tagging each with `provenance(key)`.
    pub fn write_config(&self, kv: &mut KeyValueFile, provenance: impl Fn(&str) -> String) {
        for (key, v) in HYPERPARAMETER_KEYS.iter().zip(self.values()) {
            kv.set(key, v, Some(&provenance(key)));
        }
    }
}

fn ln_lognormal(x: f64, ln_center: f64, var: f64) -> f64 {
    if !(x > 0.0) || !x.is_finite() {
        return f64::NEG_INFINITY;
    }
    let lx = x.ln();
    let d = lx - ln_center;
    -lx - 0.5 * (2.0 * PI * var).ln() - d * d / (2.0 * var)
}

/// The joint prior with its normalizing constants precomputed.
#[derive(Debug, Clone)]
pub struct JointPrior {
    pub h: Hyperparameters,
    abundance: TruncatedGamma,
    bg_abundance: TruncatedGamma,
    ln_p_stop: f64,
    ln_p_continue: f64,
    ln_beta_norm: f64,
    ln_gamma_norm: f64,
}

impl JointPrior {
    pub fn new(h: &Hyperparameters) -> Result<Self> {
        h.validate()?;
        let nu = h.nu_j;
        Ok(Self {
            h: h.clone(),
            abundance: TruncatedGamma::new(h.lambda, h.eps)?,
            bg_abundance: TruncatedGamma::new(h.lambda0, h.eps)?,
            ln_p_stop: -(1.0 + nu).ln(),
            ln_p_continue: nu.ln() - (1.0 + nu).ln(),
            ln_beta_norm: ln_gamma(h.a_s) + ln_gamma(h.b_s) - ln_gamma(h.a_s + h.b_s),
            ln_gamma_norm: h.a_phi * h.b_phi.ln() - ln_gamma(h.a_phi),
        })
    }

    pub fn abundance(&self) -> &TruncatedGamma {
        &self.abundance
    }

    pub fn bg_abundance(&self) -> &TruncatedGamma {
        &self.bg_abundance
    }

    /// `ln P[J = j]` for the geometric law with mean ν_J.
    pub fn ln_count(&self, j: usize) -> f64 {
        self.ln_p_stop + j as f64 * self.ln_p_continue
    }

    /// `ln(ν/(1+ν))`, the log ratio `P[J=j+1]/P[J=j]`.
    pub fn ln_count_ratio(&self) -> f64 {
        self.ln_p_continue
    }

    /// Joint log density of one triplet given the experiment resolution.
    pub fn ln_peak(&self, p: &PeakParams, big_r: f64) -> f64 {
        if !(p.tau >= self.h.t0 && p.tau <= self.h.t1) {
            return f64::NEG_INFINITY;
        }
        -self.h.delta_t().ln()
            + ln_lognormal(p.rho, big_r.ln(), self.h.sigma2_rho)
            + self.abundance.ln_pdf(p.eta)
    }

    pub fn ln_resolution(&self, big_r: f64) -> f64 {
        ln_lognormal(big_r, self.h.mu_r.ln(), self.h.sigma2_r)
    }

    pub fn ln_signal_fraction(&self, s: f64) -> f64 {
        if !(s > 0.0 && s < 1.0) {
            return f64::NEG_INFINITY;
        }
        (self.h.a_s - 1.0) * s.ln() + (self.h.b_s - 1.0) * (-s).ln_1p() - self.ln_beta_norm
    }

    pub fn ln_precision(&self, phi: f64) -> f64 {
        if !(phi > 0.0) || !phi.is_finite() {
            return f64::NEG_INFINITY;
        }
        self.ln_gamma_norm + (self.h.a_phi - 1.0) * phi.ln() - self.h.b_phi * phi
    }

    pub fn ln_background(&self, bg: &BackgroundParams) -> f64 {
        ln_lognormal(bg.omega0, self.h.omega0_hat.ln(), self.h.sigma2_omega0)
            + self.bg_abundance.ln_pdf(bg.eta0)
    }

    /// Sum of every prior component; `-inf` outside the support.
    pub fn log_prior(&self, state: &ModelState) -> f64 {
        let mut lp = self.ln_count(state.peaks.len())
            + self.ln_resolution(state.big_r)
            + self.ln_signal_fraction(state.s)
            + self.ln_precision(state.phi)
            + self.ln_background(&state.bg);
        for p in &state.peaks {
            lp += self.ln_peak(p, state.big_r);
        }
        if lp.is_nan() {
            f64::NEG_INFINITY
        } else {
            lp
        }
    }

    pub fn sample_peak<R: Rng + ?Sized>(&self, rng: &mut R, big_r: f64) -> PeakParams {
        let tau = rng.random_range(self.h.t0..self.h.t1);
        let rho = LogNormal::new(big_r.ln(), self.h.sigma2_rho.sqrt())
            .expect("valid log-normal")
            .sample(rng);
        let eta = self.abundance.sample(rng);
        PeakParams { tau, rho, eta }
    }

    /// Ancestral draw of a complete state.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ModelState {
        let h = &self.h;
        let j = Geometric::new(1.0 / (1.0 + h.nu_j))
            .expect("valid geometric")
            .sample(rng) as usize;
        let big_r = LogNormal::new(h.mu_r.ln(), h.sigma2_r.sqrt())
            .expect("valid log-normal")
            .sample(rng);
        let peaks = (0..j).map(|_| self.sample_peak(rng, big_r)).collect();
        let s = Beta::new(h.a_s, h.b_s).expect("valid beta").sample(rng);
        let phi = Gamma::new(h.a_phi, 1.0 / h.b_phi)
            .expect("valid gamma")
            .sample(rng);
        let omega0 = LogNormal::new(h.omega0_hat.ln(), h.sigma2_omega0.sqrt())
            .expect("valid log-normal")
            .sample(rng);
        let eta0 = self.bg_abundance.sample(rng);
        ModelState {
            gamma: h.gamma_fixed,
            s,
            peaks,
            bg: BackgroundParams { omega0, eta0 },
            phi,
            big_r,
        }
    }
}

pub fn log_prior(state: &ModelState, h: &Hyperparameters) -> Result<f64> {
    Ok(JointPrior::new(h)?.log_prior(state))
}

pub fn sample_prior<R: Rng + ?Sized>(rng: &mut R, h: &Hyperparameters) -> Result<ModelState> {
    Ok(JointPrior::new(h)?.sample(rng))
}
