//! Shared statistics helpers for the integration tests.
#![allow(dead_code)]

use lark::priors::{elicit_abundance, Hyperparameters};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Integrated autocorrelation time with Sokal's adaptive window (c = 5).
pub fn integrated_autocorr_time(x: &[f64]) -> f64 {
    let n = x.len();
    let m = x.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = x.iter().map(|v| v - m).collect();
    let c0 = d.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for lag in 1..n / 2 {
        let ck = d[..n - lag]
            .iter()
            .zip(&d[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64;
        tau += 2.0 * ck / c0;
        if lag as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

pub fn thin_by<T: Copy>(x: &[T], stride: usize) -> Vec<T> {
    x.iter().step_by(stride.max(1)).copied().collect()
}

/// Asymptotic Kolmogorov p-value with Stephens' small-sample correction.
pub fn ks_pvalue(sample: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i as f64 + 1.0) / n - f);
    }
    let sn = n.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut p = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    (d, p.clamp(0.0, 1.0))
}

pub fn ks_normal(sample: &[f64], mean: f64, sd: f64) -> (f64, f64) {
    let n = Normal::new(mean, sd).unwrap();
    ks_pvalue(sample, |x| n.cdf(x))
}

/// Pearson χ² goodness of fit of integer data to a pmf, pooling the upper
/// tail so every cell has expected count at least 5. Returns (stat, df, p).
pub fn chi2_discrete(data: &[usize], pmf: impl Fn(usize) -> f64) -> (f64, usize, f64) {
    let n = data.len() as f64;
    let max = *data.iter().max().unwrap_or(&0);
    let mut counts = vec![0usize; max + 1];
    for &v in data {
        counts[v] += 1;
    }
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp, mut cum) = (0.0, 0.0, 0.0);
    let mut j = 0;
    loop {
        let p = pmf(j);
        obs += *counts.get(j).unwrap_or(&0) as f64;
        exp += n * p;
        cum += p;
        let tail = n * (1.0 - cum);
        j += 1;
        if exp >= 5.0 && tail >= 5.0 {
            cells.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        } else if tail < 5.0 {
            // Pool everything from here into the last cell.
            let rest: usize = counts.iter().skip(j).sum();
            cells.push((obs + rest as f64, exp + tail));
            break;
        }
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let df = cells.len() - 1;
    let p = 1.0 - ChiSquared::new(df as f64).unwrap().cdf(stat);
    (stat, df, p)
}

/// Hyperparameters shaped like the calibration-spectrum column with ν_J = 20.
pub fn blank_hyper() -> Hyperparameters {
    let (t0, t1) = (5.58, 217.14);
    let (lambda, eps) = elicit_abundance(20.0, t0, t1).unwrap();
    Hyperparameters {
        nu_j: 20.0,
        lambda,
        eps,
        t0,
        t1,
        sigma2_rho: 0.1225,
        mu_r: 100.0,
        sigma2_r: 0.49,
        a_phi: 0.25,
        b_phi: 1.0,
        a_s: 5.0,
        b_s: 1.0,
        lambda0: 0.0009,
        omega0_hat: 171.68,
        sigma2_omega0: 0.25,
        gamma_fixed: 1.0,
    }
}
