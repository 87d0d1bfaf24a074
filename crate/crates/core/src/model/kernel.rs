//! Peak kernels and the width/resolution algebra.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// `sqrt(ln 4)`.
const SQRT_LN4: f64 = 1.177_410_022_515_474_7;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Beyond this many widths the Gaussian kernel underflows to exactly zero.
pub(crate) const GAUSSIAN_SUPPORT_WIDTHS: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Gaussian,
    /// Also known as Lorentzian.
    Cauchy,
}

impl KernelKind {
    /// Ratio FWHM / ω.
    pub fn fwhm_factor(self) -> f64 {
        match self {
            KernelKind::Gaussian => 2.0 * SQRT_LN4,
            KernelKind::Cauchy => 2.0,
        }
    }

    pub fn eval(self, t: f64, tau: f64, omega: f64) -> f64 {
        let d = t - tau;
        match self {
            KernelKind::Gaussian => {
                let z = d / omega;
                INV_SQRT_2PI / omega * (-0.5 * z * z).exp()
            }
            KernelKind::Cauchy => omega / (PI * (omega * omega + d * d)),
        }
    }

    pub fn deriv(self, t: f64, tau: f64, omega: f64) -> f64 {
        let d = t - tau;
        match self {
            KernelKind::Gaussian => -d / (omega * omega) * self.eval(t, tau, omega),
            KernelKind::Cauchy => {
                let q = omega * omega + d * d;
                -2.0 * omega * d / (PI * q * q)
            }
        }
    }

    /// Kernel height at its centre.
    pub fn peak_height(self, omega: f64) -> f64 {
        self.eval(0.0, 0.0, omega)
    }

    /// Half-width beyond which the kernel is exactly zero in f64, if any.
    pub(crate) fn support_radius(self, omega: f64) -> Option<f64> {
        match self {
            KernelKind::Gaussian => Some(GAUSSIAN_SUPPORT_WIDTHS * omega),
            KernelKind::Cauchy => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Gaussian => "gaussian",
            KernelKind::Cauchy => "cauchy",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(KernelKind::Gaussian),
            "cauchy" | "lorentzian" => Ok(KernelKind::Cauchy),
            other => Err(Error::invalid(format!("unknown kernel `{other}`"))),
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive (got {v})")))
    }
}

/// ω from location and resolution, `ω = τ / (ρ · FWHM/ω)`.
pub fn width_from_resolution(kind: KernelKind, tau: f64, rho: f64) -> Result<f64> {
    check_positive("tau", tau)?;
    check_positive("rho", rho)?;
    Ok(width_unchecked(kind, tau, rho))
}

#[inline]
pub(crate) fn width_unchecked(kind: KernelKind, tau: f64, rho: f64) -> f64 {
    tau / (kind.fwhm_factor() * rho)
}

pub fn resolution_from_width(kind: KernelKind, tau: f64, omega: f64) -> Result<f64> {
    check_positive("tau", tau)?;
    check_positive("omega", omega)?;
    Ok(tau / fwhm(kind, omega)?)
}

/// Full width at half maximum.
pub fn fwhm(kind: KernelKind, omega: f64) -> Result<f64> {
    check_positive("omega", omega)?;
    Ok(kind.fwhm_factor() * omega)
}

pub fn kernel_eval(kind: KernelKind, t: f64, tau: f64, omega: f64) -> Result<f64> {
    check_positive("omega", omega)?;
    Ok(kind.eval(t, tau, omega))
}

pub fn kernel_deriv(kind: KernelKind, t: f64, tau: f64, omega: f64) -> Result<f64> {
    check_positive("omega", omega)?;
    Ok(kind.deriv(t, tau, omega))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    const KINDS: [KernelKind; 2] = [KernelKind::Gaussian, KernelKind::Cauchy];

    #[test]
    fn sqrt_ln4_constant() {
        assert_relative_eq!(SQRT_LN4, (2.0 * LN_2).sqrt(), max_relative = 1e-16);
    }

    #[test]
    fn width_examples() {
        let w = width_from_resolution(KernelKind::Cauchy, 120.0, 200.0).unwrap();
        assert_relative_eq!(w, 0.3, max_relative = 1e-15);
        // 0.3 / sqrt(ln 4), from an independent high-precision evaluation.
        let w = width_from_resolution(KernelKind::Gaussian, 120.0, 200.0).unwrap();
        assert_relative_eq!(w, 0.254_796_540_086_405_7, max_relative = 1e-12);
        for k in KINDS {
            let a = width_from_resolution(k, 50.0, 100.0).unwrap();
            let b = width_from_resolution(k, 50.0, 200.0).unwrap();
            assert_relative_eq!(b, a / 2.0, max_relative = 1e-15);
        }
        assert!(width_from_resolution(KernelKind::Cauchy, 0.0, 1.0).is_err());
        assert!(width_from_resolution(KernelKind::Cauchy, 1.0, -1.0).is_err());
    }

    #[test]
    fn fwhm_is_half_height_width() {
        assert_eq!(fwhm(KernelKind::Cauchy, 1.0).unwrap(), 2.0);
        let k = KernelKind::Cauchy;
        assert_relative_eq!(k.eval(1.0, 0.0, 1.0), k.eval(0.0, 0.0, 1.0) / 2.0, max_relative = 1e-15);
        assert_relative_eq!(k.eval(-1.0, 0.0, 1.0), k.eval(0.0, 0.0, 1.0) / 2.0, max_relative = 1e-15);

        // Gaussian: solve k(x) = k(0)/2 by bisection as the oracle.
        let g = KernelKind::Gaussian;
        let half = g.eval(0.0, 0.0, 1.0) / 2.0;
        let (mut lo, mut hi) = (0.0, 5.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g.eval(mid, 0.0, 1.0) > half {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 2.0 * 0.5 * (lo + hi);
        assert_relative_eq!(fwhm(g, 1.0).unwrap(), oracle, max_relative = 1e-12);
        assert_relative_eq!(oracle, 2.354_820_045_030_949, max_relative = 1e-12);
    }

    #[test]
    fn centre_heights() {
        let w = 0.7;
        assert_relative_eq!(KernelKind::Gaussian.eval(3.0, 3.0, w), 1.0 / ((2.0 * PI).sqrt() * w), max_relative = 1e-15);
        assert_relative_eq!(KernelKind::Cauchy.eval(3.0, 3.0, w), 1.0 / (PI * w), max_relative = 1e-15);
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn kernels_integrate_to_one() {
        let (tau, w, half) = (10.0, 0.5, 200.0);
        let g = simpson(|t| KernelKind::Gaussian.eval(t, tau, w), tau - half, tau + half, 400_000);
        assert!((g - 1.0).abs() < 1e-6, "{g}");
        let c = simpson(|t| KernelKind::Cauchy.eval(t, tau, w), tau - half, tau + half, 400_000);
        assert!((c - 1.0).abs() < 2.0 / (PI * half / w), "{c}");
    }

    #[test]
    fn derivative_examples() {
        for k in KINDS {
            assert_eq!(k.deriv(2.0, 2.0, 0.3), 0.0);
            assert!(k.deriv(1.9, 2.0, 0.3) > 0.0);
            assert!(k.deriv(2.1, 2.0, 0.3) < 0.0);
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        for k in KINDS {
            let (tau, w) = (50.0, 0.2);
            for i in -500..=500 {
                let t = tau + 5.0 * w * i as f64 / 500.0;
                if (t - tau).abs() < 1e-8 {
                    continue;
                }
                let h = 1e-4 * w;
                let fd = (k.eval(t + h, tau, w) - k.eval(t - h, tau, w)) / (2.0 * h);
                let an = k.deriv(t, tau, w);
                assert!(((fd - an) / an).abs() < 1e-6, "{k} t={t}: {fd} vs {an}");
            }
        }
    }

    proptest! {
        #[test]
        fn resolution_identity(tau in 1e-2f64..1e3, rho in 1.0f64..5e3) {
            for k in KINDS {
                let w = width_from_resolution(k, tau, rho).unwrap();
                let dt = fwhm(k, w).unwrap();
                prop_assert!(((tau / dt) - rho).abs() <= 1e-12 * rho);
                let back = resolution_from_width(k, tau, w).unwrap();
                prop_assert!((back - rho).abs() <= 1e-12 * rho);
            }
        }
    }
}
