use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::init::init_mode_seek;
use super::split_merge::{
    count_mergeable, merge_peaks, mergeable_pairs, split_log_jacobian, split_peak, SplitAux,
};
use super::{ChainConfig, Draw, MoveKind, MoveStats, PosteriorSamples};
use crate::error::{Error, Result};
use crate::model::likelihood::Observations;
use crate::model::{BackgroundParams, KernelKind, LikelihoodKind, ModelState, PeakParams};
use crate::priors::{Hyperparameters, JointPrior};
use crate::spectrum::Spectrum;

/// Runs a chain from the mode-seeking start.
pub fn run_chain(
    spec: &Spectrum,
    h: &Hyperparameters,
    kind: KernelKind,
    lk: LikelihoodKind,
    cfg: &ChainConfig,
) -> Result<PosteriorSamples> {
    cfg.validate()?;
    let init = init_mode_seek(spec, h, kind, lk);
    let mut engine = Engine::new(spec, h, kind, lk, cfg, init)?;
    engine.run()
}

struct Engine<'a> {
    tof: &'a [f64],
    xi_a: f64,
    kind: KernelKind,
    lk: LikelihoodKind,
    obs: Observations,
    prior: JointPrior,
    cfg: &'a ChainConfig,
    rng: ChaCha8Rng,
    state: ModelState,
    enabled: bool,
    /// Cached signature f, background b and per-point log-likelihood terms.
    sig: Vec<f64>,
    bgv: Vec<f64>,
    terms: Vec<f64>,
    ll: f64,
    buf_sig: Vec<f64>,
    buf_bg: Vec<f64>,
    buf_terms: Vec<f64>,
    tau_step: f64,
    merge_c: f64,
    split_sd: f64,
    stats: MoveStats,
}

impl<'a> Engine<'a> {
    fn new(
        spec: &'a Spectrum,
        h: &Hyperparameters,
        kind: KernelKind,
        lk: LikelihoodKind,
        cfg: &'a ChainConfig,
        init: ModelState,
    ) -> Result<Self> {
        let prior = JointPrior::new(h)?;
        let n = spec.len();
        let t_mid = 0.5 * (h.t0 + h.t1);
        let mut e = Self {
            tof: &spec.tof,
            xi_a: spec.range.0,
            kind,
            lk,
            obs: Observations::new(lk, spec),
            prior,
            cfg,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            state: init,
            enabled: cfg.likelihood_enabled,
            sig: vec![0.0; n],
            bgv: vec![0.0; n],
            terms: vec![0.0; n],
            ll: 0.0,
            buf_sig: Vec::with_capacity(n),
            buf_bg: vec![0.0; n],
            buf_terms: Vec::with_capacity(n),
            tau_step: cfg.rw_scales.tau * t_mid / h.mu_r,
            merge_c: 2.0 / h.mu_r,
            split_sd: h.sigma2_rho.sqrt(),
            stats: MoveStats::default(),
        };
        e.full_recompute(0)?;
        let lp = e.prior.log_prior(&e.state);
        if !lp.is_finite() {
            return Err(Error::Sampler {
                iteration: 0,
                message: format!("initial state has log prior {lp}"),
            });
        }
        Ok(e)
    }

    fn run(&mut self) -> Result<PosteriorSamples> {
        let cfg = self.cfg;
        let cum: Vec<f64> = cfg
            .move_probs
            .as_array()
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        let mut draws = Vec::with_capacity((cfg.n_iter - cfg.n_burn) / cfg.thin + 1);
        for it in 1..=cfg.n_iter {
            let u: f64 = self.rng.random();
            let mut k = cum.iter().position(|&c| u < c).unwrap_or(5);
            // Skip zero-probability moves picked through rounding at the top end.
            while cfg.move_probs.as_array()[k] == 0.0 && k > 0 {
                k -= 1;
            }
            let m = MoveKind::ALL[k];
            let accepted = match m {
                MoveKind::Birth => self.birth(),
                MoveKind::Death => self.death(),
                MoveKind::Update => self.update(),
                MoveKind::Split => self.split(),
                MoveKind::Merge => self.merge(),
                MoveKind::Fixed => self.fixed_sweep(),
            };
            self.stats.record(m, accepted);
            if cfg.recompute_every > 0 && it % cfg.recompute_every == 0 {
                self.full_recompute(it)?;
            }
            if it > cfg.n_burn && (it - cfg.n_burn) % cfg.thin == 0 {
                draws.push(self.snapshot(it)?);
            }
        }
        Ok(PosteriorSamples {
            draws,
            move_stats: self.stats.clone(),
            xi_a: self.xi_a,
        })
    }

    fn snapshot(&self, it: usize) -> Result<Draw> {
        let ll: f64 = if self.enabled {
            self.terms.iter().sum()
        } else {
            0.0
        };
        let lp = ll + self.prior.log_prior(&self.state);
        if !lp.is_finite() {
            return Err(Error::Sampler {
                iteration: it,
                message: format!("non-finite log posterior {lp}"),
            });
        }
        Ok(Draw {
            iteration: it,
            state: self.state.clone(),
            log_posterior: lp,
        })
    }

    fn full_recompute(&mut self, it: usize) -> Result<()> {
        if !self.enabled {
            return Ok(());
        }
        self.sig.iter_mut().for_each(|v| *v = 0.0);
        for p in &self.state.peaks {
            let (lo, hi) = peak_range(self.tof, self.kind, p);
            for i in lo..hi {
                self.sig[i] += p.eval(self.kind, self.tof[i]);
            }
        }
        for (b, &t) in self.bgv.iter_mut().zip(self.tof) {
            *b = self.state.bg.eval(t, self.xi_a);
        }
        let c = self.obs.precision_constants(self.state.phi);
        let mut ll = 0.0;
        for i in 0..self.tof.len() {
            let mu = self.state.combine(self.sig[i], self.bgv[i]);
            self.terms[i] = self.obs.term(i, mu, self.state.phi, c);
            ll += self.terms[i];
        }
        if !ll.is_finite() {
            return Err(Error::Sampler {
                iteration: it,
                message: format!("non-finite log likelihood {ll}"),
            });
        }
        self.ll = ll;
        Ok(())
    }

    fn accept(&mut self, log_a: f64) -> bool {
        let u: f64 = self.rng.random();
        u.ln() < log_a
    }

    fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    fn ln_move_ratio(&self, num: MoveKind, den: MoveKind) -> f64 {
        self.cfg.move_probs.get(num).ln() - self.cfg.move_probs.get(den).ln()
    }

    /// Log-likelihood change from removing `removed` and adding `added`;
    /// the new cached values are left in the buffers for `commit_peaks`.
    fn eval_peaks(&mut self, removed: &[PeakParams], added: &[PeakParams]) -> (usize, usize, f64) {
        if !self.enabled {
            return (0, 0, 0.0);
        }
        let (mut lo, mut hi) = (usize::MAX, 0);
        for p in removed.iter().chain(added) {
            let (a, b) = peak_range(self.tof, self.kind, p);
            if a < b {
                lo = lo.min(a);
                hi = hi.max(b);
            }
        }
        if lo >= hi {
            return (0, 0, 0.0);
        }
        self.buf_sig.clear();
        self.buf_terms.clear();
        let c = self.obs.precision_constants(self.state.phi);
        let mut delta = 0.0;
        for i in lo..hi {
            let t = self.tof[i];
            let mut f = self.sig[i];
            for p in removed {
                f -= p.eval(self.kind, t);
            }
            for p in added {
                f += p.eval(self.kind, t);
            }
            let mu = self.state.combine(f, self.bgv[i]);
            let term = self.obs.term(i, mu, self.state.phi, c);
            delta += term - self.terms[i];
            self.buf_sig.push(f);
            self.buf_terms.push(term);
        }
        (lo, hi, delta)
    }

    fn commit_peaks(&mut self, lo: usize, hi: usize, delta: f64) {
        if lo >= hi {
            return;
        }
        self.sig[lo..hi].copy_from_slice(&self.buf_sig);
        self.terms[lo..hi].copy_from_slice(&self.buf_terms);
        self.ll += delta;
    }

    /// Log likelihood with new global parameters; `new_bg` selects the
    /// background held in `buf_bg`. Terms are left in `buf_terms`.
    fn eval_global(&mut self, s: f64, phi: f64, new_bg: bool) -> f64 {
        if !self.enabled {
            return 0.0;
        }
        let c = self.obs.precision_constants(phi);
        let g = self.state.gamma;
        let bgv = if new_bg { &self.buf_bg } else { &self.bgv };
        self.buf_terms.clear();
        let mut ll = 0.0;
        for i in 0..self.tof.len() {
            let mu = g * ((1.0 - s) + s * (self.sig[i] + bgv[i]));
            let term = self.obs.term(i, mu, phi, c);
            ll += term;
            self.buf_terms.push(term);
        }
        ll
    }

    fn commit_global(&mut self, ll: f64, new_bg: bool) {
        if !self.enabled {
            return;
        }
        std::mem::swap(&mut self.terms, &mut self.buf_terms);
        if new_bg {
            std::mem::swap(&mut self.bgv, &mut self.buf_bg);
        }
        self.ll = ll;
    }

    fn birth(&mut self) -> bool {
        let p = self.prior.sample_peak(&mut self.rng, self.state.big_r);
        let (lo, hi, dll) = self.eval_peaks(&[], &[p]);
        // Prior and proposal densities of the new triplet cancel.
        let log_a = dll + self.prior.ln_count_ratio() + self.ln_move_ratio(MoveKind::Death, MoveKind::Birth);
        if self.accept(log_a) {
            self.commit_peaks(lo, hi, dll);
            self.state.peaks.push(p);
            true
        } else {
            false
        }
    }

    fn death(&mut self) -> bool {
        let j = self.state.peaks.len();
        if j == 0 {
            return false;
        }
        let k = self.rng.random_range(0..j);
        let p = self.state.peaks[k];
        let (lo, hi, dll) = self.eval_peaks(&[p], &[]);
        let log_a = dll - self.prior.ln_count_ratio() + self.ln_move_ratio(MoveKind::Birth, MoveKind::Death);
        if self.accept(log_a) {
            self.commit_peaks(lo, hi, dll);
            self.state.peaks.swap_remove(k);
            true
        } else {
            false
        }
    }

    fn update(&mut self) -> bool {
        let j = self.state.peaks.len();
        if j == 0 {
            return false;
        }
        let k = self.rng.random_range(0..j);
        let old = self.state.peaks[k];
        let rw = self.cfg.rw_scales;
        let (z1, z2, z3) = (self.normal(), self.normal(), self.normal());
        let new = PeakParams::new(
            old.tau + self.tau_step * z1,
            old.rho * (rw.log_rho * z2).exp(),
            old.eta * (rw.log_eta * z3).exp(),
        );
        let r = self.state.big_r;
        let dprior = self.prior.ln_peak(&new, r) - self.prior.ln_peak(&old, r);
        if dprior == f64::NEG_INFINITY {
            self.accept(f64::NEG_INFINITY);
            return false;
        }
        let jac = (new.rho / old.rho).ln() + (new.eta / old.eta).ln();
        let (lo, hi, dll) = self.eval_peaks(&[old], &[new]);
        if self.accept(dll + dprior + jac) {
            self.commit_peaks(lo, hi, dll);
            self.state.peaks[k] = new;
            true
        } else {
            false
        }
    }

    fn ln_split_aux_density(&self, u3: f64) -> f64 {
        ln_normal_pdf(u3, self.split_sd)
    }

    fn split(&mut self) -> bool {
        let j = self.state.peaks.len();
        if j == 0 {
            return false;
        }
        let k = self.rng.random_range(0..j);
        let parent = self.state.peaks[k];
        let u1: f64 = self.rng.random();
        let u2: f64 = self.rng.random();
        let u3 = self.split_sd * self.normal();
        if u1 == 0.0 || u2 == 0.0 {
            self.accept(f64::NEG_INFINITY);
            return false;
        }
        let c = self.merge_c;
        let (l, r) = split_peak(&parent, SplitAux { u1, u2, u3 }, c);
        let big_r = self.state.big_r;
        let dprior = self.prior.ln_count_ratio() + self.prior.ln_peak(&l, big_r)
            + self.prior.ln_peak(&r, big_r)
            - self.prior.ln_peak(&parent, big_r);
        if dprior == f64::NEG_INFINITY {
            self.accept(f64::NEG_INFINITY);
            return false;
        }
        let mut proposed = self.state.peaks.clone();
        proposed.swap_remove(k);
        proposed.push(l);
        proposed.push(r);
        let m_after = count_mergeable(&proposed, c);
        let jf = j as f64;
        let (lo, hi, dll) = self.eval_peaks(&[parent], &[l, r]);
        let log_a = dll + dprior + self.ln_move_ratio(MoveKind::Merge, MoveKind::Split)
            + (jf * (jf + 1.0)).ln()
            - (m_after as f64).ln()
            - self.ln_split_aux_density(u3)
            + split_log_jacobian(&parent, &l, &r, c);
        if self.accept(log_a) {
            self.commit_peaks(lo, hi, dll);
            self.state.peaks = proposed;
            true
        } else {
            false
        }
    }

    fn merge(&mut self) -> bool {
        let j = self.state.peaks.len();
        if j < 2 {
            return false;
        }
        let c = self.merge_c;
        let pairs = mergeable_pairs(&self.state.peaks, c);
        if pairs.is_empty() {
            self.accept(f64::NEG_INFINITY);
            return false;
        }
        let (a, b) = pairs[self.rng.random_range(0..pairs.len())];
        let (pa, pb) = (self.state.peaks[a], self.state.peaks[b]);
        let (parent, aux) = merge_peaks(&pa, &pb, c);
        let (l, r) = if pa.tau <= pb.tau { (pa, pb) } else { (pb, pa) };
        let big_r = self.state.big_r;
        let dprior = -self.prior.ln_count_ratio() - self.prior.ln_peak(&l, big_r)
            - self.prior.ln_peak(&r, big_r)
            + self.prior.ln_peak(&parent, big_r);
        if dprior == f64::NEG_INFINITY {
            self.accept(f64::NEG_INFINITY);
            return false;
        }
        let jm = (j - 1) as f64;
        let (lo, hi, dll) = self.eval_peaks(&[pa, pb], &[parent]);
        let log_a = dll + dprior + self.ln_move_ratio(MoveKind::Split, MoveKind::Merge)
            - (jm * (jm + 1.0)).ln()
            + (pairs.len() as f64).ln()
            + self.ln_split_aux_density(aux.u3)
            - split_log_jacobian(&parent, &l, &r, c);
        if self.accept(log_a) {
            self.commit_peaks(lo, hi, dll);
            let (hi_idx, lo_idx) = (a.max(b), a.min(b));
            self.state.peaks.swap_remove(hi_idx);
            self.state.peaks.swap_remove(lo_idx);
            self.state.peaks.push(parent);
            true
        } else {
            false
        }
    }

    /// One MH step per global parameter; accepted if any component moved.
    fn fixed_sweep(&mut self) -> bool {
        let rw = self.cfg.rw_scales;
        let mut any = false;

        // s on the logit scale.
        let s = self.state.s;
        let logit = (s / (1.0 - s)).ln() + rw.logit_s * self.normal();
        let s_new = 1.0 / (1.0 + (-logit).exp());
        let ok = if s_new > 0.0 && s_new < 1.0 {
            let ll = self.eval_global(s_new, self.state.phi, false);
            let log_a = ll - self.ll + self.prior.ln_signal_fraction(s_new)
                - self.prior.ln_signal_fraction(s)
                + (s_new * (1.0 - s_new)).ln()
                - (s * (1.0 - s)).ln();
            if self.accept(log_a) {
                self.commit_global(ll, false);
                self.state.s = s_new;
                true
            } else {
                false
            }
        } else {
            self.accept(f64::NEG_INFINITY)
        };
        self.record_fixed(0, ok);
        any |= ok;

        if self.lk.samples_precision() {
            let phi = self.state.phi;
            let phi_new = phi * (rw.log_phi * self.normal()).exp();
            let ll = self.eval_global(self.state.s, phi_new, false);
            let log_a = ll - self.ll + self.prior.ln_precision(phi_new) - self.prior.ln_precision(phi)
                + (phi_new / phi).ln();
            let ok = self.accept(log_a);
            if ok {
                self.commit_global(ll, false);
                self.state.phi = phi_new;
            }
            self.record_fixed(1, ok);
            any |= ok;
        }

        // R enters the prior only.
        let r = self.state.big_r;
        let r_new = r * (rw.log_r * self.normal()).exp();
        let lp = |e: &Self, rr: f64| {
            e.prior.ln_resolution(rr)
                + e.state.peaks.iter().map(|p| e.prior.ln_peak(p, rr)).sum::<f64>()
        };
        let log_a = lp(self, r_new) - lp(self, r) + (r_new / r).ln();
        let ok = self.accept(log_a);
        if ok {
            self.state.big_r = r_new;
        }
        self.record_fixed(2, ok);
        any |= ok;

        let bg = self.state.bg;
        let omega_new = bg.omega0 * (rw.log_omega0 * self.normal()).exp();
        let ok = self.try_background(BackgroundParams {
            omega0: omega_new,
            eta0: bg.eta0,
        });
        self.record_fixed(3, ok);
        any |= ok;

        let bg = self.state.bg;
        let eta0_new = bg.eta0 * (rw.log_eta0 * self.normal()).exp();
        let ok = self.try_background(BackgroundParams {
            omega0: bg.omega0,
            eta0: eta0_new,
        });
        self.record_fixed(4, ok);
        any |= ok;

        any
    }

    /// MH step to a new background; log-scale Jacobians for both fields.
    fn try_background(&mut self, new: BackgroundParams) -> bool {
        let old = self.state.bg;
        let dprior = self.prior.ln_background(&new) - self.prior.ln_background(&old);
        if dprior == f64::NEG_INFINITY {
            self.accept(f64::NEG_INFINITY);
            return false;
        }
        let jac = (new.omega0 / old.omega0).ln() + (new.eta0 / old.eta0).ln();
        let mut ll = 0.0;
        if self.enabled {
            for (b, &t) in self.buf_bg.iter_mut().zip(self.tof) {
                *b = new.eval(t, self.xi_a);
            }
            ll = self.eval_global(self.state.s, self.state.phi, true);
        }
        let log_a = ll - self.ll + dprior + jac;
        if self.accept(log_a) {
            self.commit_global(ll, true);
            self.state.bg = new;
            true
        } else {
            false
        }
    }

    fn record_fixed(&mut self, k: usize, ok: bool) {
        self.stats.fixed_proposed[k] += 1;
        self.stats.fixed_accepted[k] += ok as u64;
    }
}

fn ln_normal_pdf(x: f64, sd: f64) -> f64 {
    let z = x / sd;
    -0.5 * z * z - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Grid index range where a peak is nonzero in floating point.
fn peak_range(tof: &[f64], kind: KernelKind, p: &PeakParams) -> (usize, usize) {
    match kind.support_radius(p.width(kind)) {
        Some(r) => (
            tof.partition_point(|&t| t < p.tau - r),
            tof.partition_point(|&t| t <= p.tau + r),
        ),
        None => (0, tof.len()),
    }
}
