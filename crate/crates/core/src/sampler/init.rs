//! Deterministic starting state near a posterior mode.

use crate::model::kernel::GAUSSIAN_SUPPORT_WIDTHS;
use crate::model::{BackgroundParams, KernelKind, LikelihoodKind, ModelState, PeakParams, TruncatedGamma};
use crate::nnls::{nnls, BandColumn};
use crate::priors::{robust_sigma, Hyperparameters};
use crate::spectrum::Spectrum;

/// Cauchy design columns are cut at this many widths (relative height 1e-6).
const CAUCHY_DESIGN_WIDTHS: f64 = 1000.0;

/// Builds the initial state: background and fractions from the
/// hyperparameters, peaks at maxima of the smoothed residual with
/// abundances from nonnegative least squares.
pub fn init_mode_seek(
    spec: &Spectrum,
    h: &Hyperparameters,
    kind: KernelKind,
    lk: LikelihoodKind,
) -> ModelState {
    let gamma = h.gamma_fixed;
    let s0 = h.a_s / (h.a_s + h.b_s);
    let eta0 = TruncatedGamma::new(h.lambda0, h.eps)
        .map(|tg| tg.mean())
        .unwrap_or(2.0 * h.eps);
    let bg = BackgroundParams {
        omega0: h.omega0_hat,
        eta0,
    };
    let prior_phi = h.a_phi / h.b_phi;
    let phi = if lk.samples_precision() {
        prior_phi
    } else {
        match robust_sigma(&spec.intensity) {
            Ok(sd) if sd > 0.0 => 1.0 / (sd * sd),
            _ => prior_phi,
        }
    };
    let mut state = ModelState {
        gamma,
        s: s0,
        peaks: Vec::new(),
        bg,
        phi,
        big_r: h.mu_r,
    };

    let xi_a = spec.range.0;
    let tof = &spec.tof;
    let resid: Vec<f64> = tof
        .iter()
        .zip(&spec.intensity)
        .map(|(&t, &y)| y - gamma * (1.0 - s0) - gamma * s0 * bg.eval(t, xi_a))
        .collect();

    let mut sorted_t = tof.clone();
    sorted_t.sort_by(f64::total_cmp);
    let fwhm_med = sorted_t[sorted_t.len() / 2] / h.mu_r;
    let half = ((fwhm_med / spec.median_step()) / 2.0).round().max(0.0) as usize;
    let smooth = moving_average(&resid, half);

    let n = tof.len();
    let mut cands: Vec<(usize, f64)> = Vec::new();
    for i in 1..n.saturating_sub(1) {
        let t = tof[i];
        if t < h.t0 || t > h.t1 {
            continue;
        }
        if !(smooth[i] > smooth[i - 1] && smooth[i] >= smooth[i + 1]) {
            continue;
        }
        let omega = PeakParams::new(t, h.mu_r, 1.0).width(kind);
        if smooth[i] > gamma * s0 * h.eps * kind.peak_height(omega) {
            cands.push((i, smooth[i]));
        }
    }
    cands.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    cands.truncate((3.0 * h.nu_j).floor() as usize);
    cands.sort_by_key(|c| c.0);

    let columns: Vec<BandColumn> = cands
        .iter()
        .map(|&(i, _)| {
            let p = PeakParams::new(tof[i], h.mu_r, 1.0);
            let omega = p.width(kind);
            let r = match kind {
                KernelKind::Gaussian => GAUSSIAN_SUPPORT_WIDTHS * omega,
                KernelKind::Cauchy => CAUCHY_DESIGN_WIDTHS * omega,
            };
            let lo = tof.partition_point(|&t| t < p.tau - r);
            let hi = tof.partition_point(|&t| t <= p.tau + r);
            BandColumn {
                start: lo,
                values: tof[lo..hi]
                    .iter()
                    .map(|&t| gamma * s0 * p.eval(kind, t))
                    .collect(),
            }
        })
        .collect();
    let eta = nnls(&columns, &resid, 1e-10, 500);
    state.peaks = cands
        .iter()
        .zip(eta)
        .filter(|(_, e)| *e > h.eps)
        .map(|(&(i, _), e)| PeakParams::new(tof[i], h.mu_r, e))
        .collect();
    state
}

/// Centered moving average with `2·half + 1` points, shrunk at the edges.
fn moving_average(y: &[f64], half: usize) -> Vec<f64> {
    let n = y.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in y {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::mean_intensity;
    use crate::priors::tests::lung_hyper;

    fn window_hyper(t0: f64, t1: f64) -> Hyperparameters {
        let mut h = lung_hyper();
        h.t0 = t0;
        h.t1 = t1;
        h.nu_j = 20.0;
        let (l, e) = crate::priors::elicit_abundance(20.0, t0, t1).unwrap();
        h.lambda = l;
        h.eps = e;
        h
    }

    #[test]
    fn recovers_single_noiseless_peak() {
        let mut h = window_hyper(20.0, 80.0);
        h.mu_r = 300.0;
        h.gamma_fixed = 10.0;
        h.a_s = 1.0;
        h.b_s = 1.0;
        h.omega0_hat = 10.0;
        h.lambda0 = 0.05;
        let tof: Vec<f64> = (0..3000).map(|i| 20.0 + i as f64 * 0.02).collect();
        let truth_state = {
            let mut st = init_mode_seek(
                &Spectrum::new(tof.clone(), vec![0.0; tof.len()]).unwrap(),
                &h,
                KernelKind::Gaussian,
                LikelihoodKind::GammaObs,
            );
            st.peaks = vec![PeakParams::new(50.013, 300.0, 5.0)];
            st
        };
        let y: Vec<f64> = tof
            .iter()
            .map(|&t| mean_intensity(&truth_state, KernelKind::Gaussian, t, 20.0))
            .collect();
        let spec = Spectrum::new(tof, y).unwrap();
        let st = init_mode_seek(&spec, &h, KernelKind::Gaussian, LikelihoodKind::GammaObs);
        assert_eq!(st.peaks.len(), 1, "{:?}", st.peaks);
        assert!((st.peaks[0].tau - 50.013).abs() <= 0.02);
        assert!((st.peaks[0].eta / 5.0 - 1.0).abs() < 0.1, "{:?}", st.peaks);
    }

    #[test]
    fn flat_spectrum_has_no_peaks() {
        let h = window_hyper(20.0, 80.0);
        let tof: Vec<f64> = (0..1000).map(|i| 20.0 + i as f64 * 0.06).collect();
        let spec = Spectrum::new(tof, vec![1.0; 1000]).unwrap();
        let a = init_mode_seek(&spec, &h, KernelKind::Cauchy, LikelihoodKind::GammaObs);
        assert!(a.peaks.is_empty());
        let b = init_mode_seek(&spec, &h, KernelKind::Cauchy, LikelihoodKind::GammaObs);
        assert_eq!(a, b);
    }
}
