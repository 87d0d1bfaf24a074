//! Data-driven construction of the hyperparameters.

use crate::error::{Error, Result};
use crate::model::likelihood::GAMMA_ZERO_OFFSET;
use crate::model::special::{scaled_e1, solve_bracketed};
use crate::model::truncated_gamma::ln_e1;
use crate::spectrum::{Calibration, Spectrum};

/// Smallest distinguishable peak as a fraction of the mean abundance.
pub const MIN_DETECTABLE_FRACTION: f64 = 0.075;

/// Prior shape for φ; gives a coefficient of variation of 2.
const A_PHI: f64 = 0.25;

/// Precision prior from block means regressed on block variances.
pub fn elicit_phi(spec: &Spectrum, block_width: f64) -> Result<(f64, f64)> {
    if !(block_width > 0.0) {
        return Err(Error::invalid(format!("block width must be positive, got {block_width}")));
    }
    let start = spec.tof[0];
    let mut blocks: Vec<Vec<f64>> = Vec::new();
    for (&t, &y) in spec.tof.iter().zip(&spec.intensity) {
        let b = ((t - start) / block_width).floor() as usize;
        if blocks.len() <= b {
            blocks.resize_with(b + 1, Vec::new);
        }
        blocks[b].push(y);
    }
    let (mut sxy, mut sxx, mut used) = (0.0, 0.0, 0usize);
    for b in blocks.iter().filter(|b| b.len() >= 2) {
        let n = b.len() as f64;
        let m = b.iter().sum::<f64>() / n;
        let v = b.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (n - 1.0);
        sxy += m * v;
        sxx += v * v;
        used += 1;
    }
    if used < 3 {
        return Err(Error::Elicitation {
            key: "b_phi",
            reason: format!("need at least 3 blocks of {block_width} us with 2+ points, found {used}"),
        });
    }
    let slope = sxy / sxx;
    if !(slope > 0.0 && slope.is_finite()) {
        return Err(Error::Elicitation {
            key: "b_phi",
            reason: format!("block means do not grow with block variances (slope {slope})"),
        });
    }
    Ok((A_PHI, A_PHI / slope))
}

/// Overall scale γ = Ȳ.
pub fn elicit_scale(spec: &Spectrum) -> f64 {
    spec.mean_intensity()
}

/// Root of x·eˣ·E1(x) = 0.075.
pub fn solve_lambda_eps() -> f64 {
    solve_bracketed(|x| scaled_e1(x) - MIN_DETECTABLE_FRACTION, 1e-12, 1.0, 1e-14)
        .expect("x e^x E1(x) - 0.075 changes sign on (0, 1)")
}

pub fn elicit_abundance(nu_j: f64, t0: f64, t1: f64) -> Result<(f64, f64)> {
    if !(t1 > t0) {
        return Err(Error::invalid(format!("TOF window is empty: [{t0}, {t1}]")));
    }
    if !(nu_j > 0.0 && nu_j.is_finite()) {
        return Err(Error::invalid(format!("nu_J must be positive, got {nu_j}")));
    }
    let eps = MIN_DETECTABLE_FRACTION * (t1 - t0) / nu_j;
    Ok((solve_lambda_eps() / eps, eps))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundEstimate {
    pub omega0_hat: f64,
    pub eta0_hat: f64,
    pub lambda0: f64,
}

/// Fits log y = log(η₀/ω₀) − (t − ξ_a)/ω₀ over the m/z window, then picks
/// λ₀ so the truncated-gamma prior mean of η₀ equals η̂₀.
pub fn elicit_background(
    spec: &Spectrum,
    mz_window: (f64, f64),
    calib: &Calibration,
    eps: f64,
) -> Result<BackgroundEstimate> {
    let lo = calib.mz_to_tof(mz_window.0)?;
    let hi = calib.mz_to_tof(mz_window.1)?;
    let delta = GAMMA_ZERO_OFFSET * spec.mean_intensity();
    let xi_a = spec.range.0;
    let pts: Vec<(f64, f64)> = spec
        .tof
        .iter()
        .zip(&spec.intensity)
        .filter(|(&t, _)| t >= lo && t <= hi)
        .map(|(&t, &y)| (t - xi_a, (y + delta).ln()))
        .filter(|(_, ly)| ly.is_finite())
        .collect();
    if pts.len() < 2 {
        return Err(Error::Elicitation {
            key: "omega0_hat",
            reason: format!(
                "background window m/z [{}, {}] maps to TOF [{lo:.4}, {hi:.4}] with {} usable points",
                mz_window.0,
                mz_window.1,
                pts.len()
            ),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    if !(slope < 0.0 && slope.is_finite()) {
        return Err(Error::Elicitation {
            key: "omega0_hat",
            reason: format!("log intensity does not decay over the background window (slope {slope})"),
        });
    }
    let omega0_hat = -1.0 / slope;
    let intercept = my - slope * mx;
    let eta0_hat = omega0_hat * intercept.exp();
    let lambda0 = solve_lambda0(eta0_hat, eps)?;
    Ok(BackgroundEstimate {
        omega0_hat,
        eta0_hat,
        lambda0,
    })
}

/// λ₀ with truncated-gamma mean ε/(x eˣ E1(x)) = η̂₀, x = λ₀ε.
fn solve_lambda0(eta0_hat: f64, eps: f64) -> Result<f64> {
    if !(eta0_hat > eps) {
        return Err(Error::Elicitation {
            key: "lambda0",
            reason: format!("background abundance {eta0_hat} does not exceed eps = {eps}"),
        });
    }
    let target = eps / eta0_hat;
    // scaled_e1 increases from 0 to 1; solve in u = ln x so tiny x stay well scaled.
    let f = |u: f64| {
        let x = u.exp();
        // ln(x e^x E1(x)) using the log form keeps precision at small x.
        (u + x + ln_e1(x)) - target.ln()
    };
    let (mut a, mut b) = (-60.0f64, 5.0f64);
    while f(b) < 0.0 {
        b += 5.0;
        if b > 700.0 {
            return Err(Error::Elicitation {
                key: "lambda0",
                reason: format!("no rate matches background abundance {eta0_hat}"),
            });
        }
    }
    while f(a) > 0.0 {
        a -= 60.0;
        if a < -700.0 {
            return Err(Error::Elicitation {
                key: "lambda0",
                reason: format!("no rate matches background abundance {eta0_hat}"),
            });
        }
    }
    let u = solve_bracketed(f, a, b, 1e-14)?;
    Ok(u.exp() / eps)
}

/// Beta(a_s, 1) prior with mean 1 − Ȳ^N/Ȳ.
pub fn elicit_signal_fraction(spec: &Spectrum, noise_region: (f64, f64)) -> Result<(f64, f64)> {
    let y_bar = spec.mean_intensity();
    let y_noise = spec.mean_over(noise_region.0, noise_region.1).ok_or_else(|| Error::Elicitation {
        key: "a_s",
        reason: format!(
            "noise region [{}, {}] contains no grid points",
            noise_region.0, noise_region.1
        ),
    })?;
    if !(y_bar > 0.0) {
        return Err(Error::Elicitation {
            key: "a_s",
            reason: "overall mean intensity is zero".into(),
        });
    }
    let r = y_noise / y_bar;
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Elicitation {
            key: "a_s",
            reason: format!("noise-to-overall mean ratio {r} is outside (0, 1)"),
        });
    }
    Ok(((1.0 - r) / r, 1.0))
}

/// Noise sd from the median absolute Haar detail coefficient.
pub fn robust_sigma(y: &[f64]) -> Result<f64> {
    let mut d: Vec<f64> = y
        .chunks_exact(2)
        .map(|c| ((c[1] - c[0]) / std::f64::consts::SQRT_2).abs())
        .collect();
    if d.is_empty() {
        return Err(Error::invalid("need at least two points to estimate the noise level"));
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let med = if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    };
    Ok(med / 0.674_489_750_196_081_7)
}
