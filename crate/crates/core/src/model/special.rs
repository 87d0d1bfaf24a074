//! Exponential integral and a bracketed scalar root finder.

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Exponential integral `E1(x) = ∫_x^∞ e^{-z}/z dz` for `x > 0`.
///
/// Power series for `x <= 1`, modified Lentz continued fraction above.
pub fn exp_integral_e1(x: f64) -> Result<f64> {
    if !(x > 0.0) || x.is_nan() {
        return Err(Error::invalid(format!("E1 needs x > 0 (got {x})")));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(e1(x))
}

/// Panicking form for callers that have already validated `x > 0`.
pub(crate) fn e1(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x <= 1.0 {
        e1_series(x)
    } else {
        e1_continued_fraction(x)
    }
}

fn e1_series(x: f64) -> f64 {
    // E1(x) = -γ - ln x - Σ_{k>=1} (-x)^k / (k k!)
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= -x / kf;
        let contrib = term / kf;
        sum += contrib;
        if contrib.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

fn e1_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..1000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-x).exp()
}

/// `x e^x E1(x)`, evaluated without overflow for large `x`.
pub(crate) fn scaled_e1(x: f64) -> f64 {
    if x <= 1.0 {
        x * x.exp() * e1_series(x)
    } else {
        // The continued fraction already carries the e^{-x}; drop it.
        x * e1_continued_fraction(x) * x.exp()
    }
}

/// Brent's method on a sign-changing bracket `[a, b]`.
pub fn solve_bracketed<F>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::invalid(format!(
            "root is not bracketed by [{a}, {b}] (f = {fa}, {fb})"
        )));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..300 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = d;
            }
        } else {
            d = m;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Err(Error::invalid("root solve did not converge"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_values() {
        // scipy.special.exp1
        assert_relative_eq!(exp_integral_e1(1e-5).unwrap(), 10.935719800043696, max_relative = 1e-13);
        assert_relative_eq!(exp_integral_e1(0.33).unwrap(), 0.8361011614550026, max_relative = 1e-13);
        assert_relative_eq!(exp_integral_e1(1.0).unwrap(), 0.21938393439552062, max_relative = 1e-13);
        assert_relative_eq!(exp_integral_e1(2.5).unwrap(), 0.024914917870269736, max_relative = 1e-13);
        assert_relative_eq!(exp_integral_e1(43.0).unwrap(), 4.809496556950017e-21, max_relative = 1e-13);
    }

    #[test]
    fn rejects_non_positive() {
        assert!(exp_integral_e1(0.0).is_err());
        assert!(exp_integral_e1(-1.0).is_err());
    }

    #[test]
    fn asymptotic_leading_term() {
        let x = 50.0;
        let v = exp_integral_e1(x).unwrap() * x * x.exp();
        assert!((v - 1.0).abs() < 0.02, "{v}");
        assert_relative_eq!(scaled_e1(x), v, max_relative = 1e-12);
    }

    #[test]
    fn branches_agree_at_switch() {
        let below = e1_series(1.0);
        let above = e1_continued_fraction(1.0);
        assert_relative_eq!(below, above, max_relative = 1e-13);
    }

    #[test]
    fn brent_finds_cubic_root() {
        let r = solve_bracketed(|x| x * x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert_relative_eq!(r, 2f64.cbrt(), max_relative = 1e-12);
        assert!(solve_bracketed(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }
}
