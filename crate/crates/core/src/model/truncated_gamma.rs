//! Left-truncated gamma law with shape zero,
//! density `η^{-1} e^{-λη} / E1(λε)` on `η > ε`.

use rand::Rng;

use super::special::scaled_e1;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedGamma {
    lambda: f64,
    eps: f64,
    ln_norm: f64,
}

/// `ln E1(x)` without underflow for large `x`.
pub(crate) fn ln_e1(x: f64) -> f64 {
    scaled_e1(x).ln() - x - x.ln()
}

impl TruncatedGamma {
    pub fn new(lambda: f64, eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::invalid(format!(
                "shape-zero truncated gamma needs eps > 0 (got {eps})"
            )));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("rate must be positive (got {lambda})")));
        }
        Ok(Self {
            lambda,
            eps,
            ln_norm: ln_e1(lambda * eps),
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn ln_pdf(&self, eta: f64) -> f64 {
        if eta > self.eps && eta.is_finite() {
            -eta.ln() - self.lambda * eta - self.ln_norm
        } else {
            f64::NEG_INFINITY
        }
    }

    /// `1 / (λ e^{λε} E1(λε))`.
    pub fn mean(&self) -> f64 {
        self.eps / scaled_e1(self.lambda * self.eps)
    }

    /// `1 - E1(λη) / E1(λε)`.
    pub fn cdf(&self, eta: f64) -> f64 {
        if eta <= self.eps {
            0.0
        } else {
            -(ln_e1(self.lambda * eta) - self.ln_norm).exp_m1()
        }
    }

    /// Inverse CDF at `p ∈ [0, 1)`.
    pub fn quantile(&self, p: f64) -> f64 {
        // Solve ln E1(x) = ln(1-p) + ln E1(λε) for x = λη >= λε.
        let target = (-p).ln_1p() + self.ln_norm;
        let lo = self.lambda * self.eps;
        if p <= 0.0 {
            return self.eps;
        }
        let h = |x: f64| ln_e1(x) - target;
        let mut a = lo;
        let mut b = (2.0 * lo).max(1.0);
        while h(b) > 0.0 {
            a = b;
            b *= 2.0;
        }
        // Newton on ln E1 with bisection fallback; d/dx ln E1(x) = -1 / (x e^x E1(x)).
        let mut x = 0.5 * (a + b);
        for _ in 0..100 {
            let hx = h(x);
            if hx > 0.0 {
                a = x;
            } else {
                b = x;
            }
            let deriv = -1.0 / scaled_e1(x);
            let mut next = x - hx / deriv;
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            if (next - x).abs() <= 1e-15 * x {
                x = next;
                break;
            }
            x = next;
        }
        (x / self.lambda).max(self.eps)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let p: f64 = rng.random();
        let eta = self.quantile(p);
        if eta > self.eps {
            eta
        } else {
            self.eps.next_up()
        }
    }
}

/// Log density of the shape-zero truncated gamma; `-inf` off support.
pub fn trunc_gamma_logpdf(eta: f64, lambda: f64, eps: f64) -> Result<f64> {
    Ok(TruncatedGamma::new(lambda, eps)?.ln_pdf(eta))
}

pub fn trunc_gamma_mean(lambda: f64, eps: f64) -> Result<f64> {
    Ok(TruncatedGamma::new(lambda, eps)?.mean())
}

pub fn trunc_gamma_sample<R: Rng + ?Sized>(rng: &mut R, lambda: f64, eps: f64) -> Result<f64> {
    Ok(TruncatedGamma::new(lambda, eps)?.sample(rng))
}
