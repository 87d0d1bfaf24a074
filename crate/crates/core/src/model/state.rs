use super::kernel::{width_unchecked, KernelKind};

/// One peak: TOF location, resolution and abundance. The kernel width is
/// derived from `(tau, rho)` and never stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakParams {
    pub tau: f64,
    pub rho: f64,
    pub eta: f64,
}

impl PeakParams {
    pub fn new(tau: f64, rho: f64, eta: f64) -> Self {
        Self { tau, rho, eta }
    }

    pub fn width(&self, kind: KernelKind) -> f64 {
        width_unchecked(kind, self.tau, self.rho)
    }

    /// FWHM `τ / ρ`, independent of kernel shape.
    pub fn fwhm(&self) -> f64 {
        self.tau / self.rho
    }

    pub fn eval(&self, kind: KernelKind, t: f64) -> f64 {
        self.eta * kind.eval(t, self.tau, self.width(kind))
    }

    pub fn deriv(&self, kind: KernelKind, t: f64) -> f64 {
        self.eta * kind.deriv(t, self.tau, self.width(kind))
    }
}

/// Exponentially decaying matrix background.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundParams {
    /// Decay time ω₀ in µs.
    pub omega0: f64,
    /// Integrated intensity η₀.
    pub eta0: f64,
}

impl BackgroundParams {
    pub fn eval(&self, t: f64, xi_a: f64) -> f64 {
        if t > xi_a {
            self.eta0 / self.omega0 * (-(t - xi_a) / self.omega0).exp()
        } else {
            0.0
        }
    }

    pub fn deriv(&self, t: f64, xi_a: f64) -> f64 {
        -self.eval(t, xi_a) / self.omega0
    }
}

/// Full parameter vector of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    /// Overall scale γ, held at the data mean.
    pub gamma: f64,
    /// Signal fraction s ∈ [0, 1].
    pub s: f64,
    pub peaks: Vec<PeakParams>,
    pub bg: BackgroundParams,
    /// Precision: φ for the gamma likelihood, 1/σ² for the Gaussian one.
    pub phi: f64,
    /// Experiment-level resolution R.
    pub big_r: f64,
}

impl ModelState {
    pub fn n_peaks(&self) -> usize {
        self.peaks.len()
    }

    /// Checks positivity and range constraints of every component.
    pub fn is_valid(&self) -> bool {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        pos(self.gamma)
            && (0.0..=1.0).contains(&self.s)
            && pos(self.bg.omega0)
            && pos(self.bg.eta0)
            && pos(self.phi)
            && pos(self.big_r)
            && self
                .peaks
                .iter()
                .all(|p| pos(p.tau) && pos(p.rho) && pos(p.eta))
    }

    pub fn total_abundance(&self) -> f64 {
        self.peaks.iter().map(|p| p.eta).sum()
    }

    /// `γ{(1-s) + s[f + b]}` from precomputed signature and background values.
    #[inline]
    pub fn combine(&self, signature: f64, background: f64) -> f64 {
        self.gamma * ((1.0 - self.s) + self.s * (signature + background))
    }
}

/// `f(t) = Σ_j η_j k(t; τ_j, ω_j)`.
pub fn signature_eval(state: &ModelState, kind: KernelKind, t: f64) -> f64 {
    state.peaks.iter().map(|p| p.eval(kind, t)).sum()
}

/// `(η₀/ω₀) exp{-(t-ξ_a)/ω₀}` for `t > ξ_a`, zero otherwise.
pub fn background_eval(bg: &BackgroundParams, t: f64, xi_a: f64) -> f64 {
    bg.eval(t, xi_a)
}

/// Expected intensity μ(t).
pub fn mean_intensity(state: &ModelState, kind: KernelKind, t: f64, xi_a: f64) -> f64 {
    state.combine(signature_eval(state, kind, t), state.bg.eval(t, xi_a))
}

/// dμ/dt.
pub fn mean_intensity_deriv(state: &ModelState, kind: KernelKind, t: f64, xi_a: f64) -> f64 {
    let df: f64 = state.peaks.iter().map(|p| p.deriv(kind, t)).sum();
    state.gamma * state.s * (df + state.bg.deriv(t, xi_a))
}
