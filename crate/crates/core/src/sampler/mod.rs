//! Reversible-jump MCMC over the peak configuration and the global
//! parameters.

mod chain;
mod init;
mod io;
mod split_merge;

pub use chain::run_chain;
pub use init::init_mode_seek;
pub use io::{parse_samples, read_samples, samples_to_text, write_samples};
pub use split_merge::{
    count_mergeable, merge_peaks, mergeable, mergeable_pairs, split_log_jacobian, split_peak,
    SplitAux,
};

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::ModelState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MoveKind {
    Birth,
    Death,
    Update,
    Split,
    Merge,
    Fixed,
}

impl MoveKind {
    pub const ALL: [MoveKind; 6] = [
        MoveKind::Birth,
        MoveKind::Death,
        MoveKind::Update,
        MoveKind::Split,
        MoveKind::Merge,
        MoveKind::Fixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MoveKind::Birth => "birth",
            MoveKind::Death => "death",
            MoveKind::Update => "update",
            MoveKind::Split => "split",
            MoveKind::Merge => "merge",
            MoveKind::Fixed => "fixed",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveProbs {
    pub birth: f64,
    pub death: f64,
    pub update: f64,
    pub split: f64,
    pub merge: f64,
    pub fixed: f64,
}

impl Default for MoveProbs {
    fn default() -> Self {
        Self {
            birth: 0.1,
            death: 0.1,
            update: 0.3,
            split: 0.1,
            merge: 0.1,
            fixed: 0.3,
        }
    }
}

impl MoveProbs {
    pub fn as_array(&self) -> [f64; 6] {
        [self.birth, self.death, self.update, self.split, self.merge, self.fixed]
    }

    pub fn get(&self, m: MoveKind) -> f64 {
        self.as_array()[m.index()]
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.as_array();
        if p.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config(format!("move probabilities must be nonnegative: {p:?}")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("move probabilities sum to {sum}, not 1")));
        }
        Ok(())
    }
}

/// Random-walk step sizes. All act on transformed coordinates except `tau`,
/// which multiplies the FWHM at the prior resolution centre evaluated at
/// the middle of the window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RwScales {
    pub tau: f64,
    pub log_rho: f64,
    pub log_eta: f64,
    pub logit_s: f64,
    pub log_phi: f64,
    pub log_r: f64,
    pub log_omega0: f64,
    pub log_eta0: f64,
}

impl Default for RwScales {
    fn default() -> Self {
        Self {
            tau: 0.1,
            log_rho: 0.1,
            log_eta: 0.1,
            logit_s: 0.1,
            log_phi: 0.1,
            log_r: 0.1,
            log_omega0: 0.1,
            log_eta0: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub n_iter: usize,
    pub n_burn: usize,
    pub thin: usize,
    pub seed: u64,
    pub move_probs: MoveProbs,
    pub rw_scales: RwScales,
    /// When false the likelihood is dropped and the chain targets the prior.
    pub likelihood_enabled: bool,
    /// Full recompute of the cached intensity every this many iterations.
    pub recompute_every: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            n_iter: 10_000,
            n_burn: 5_000,
            thin: 1,
            seed: 0,
            move_probs: MoveProbs::default(),
            rw_scales: RwScales::default(),
            likelihood_enabled: true,
            recompute_every: 1000,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_burn >= self.n_iter {
            return Err(Error::Config(format!(
                "burn-in ({}) must be smaller than the iteration count ({})",
                self.n_burn, self.n_iter
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        self.move_probs.validate()
    }
}

/// Names of the fixed-dimension components, in sweep order.
pub const FIXED_COMPONENTS: [&str; 5] = ["s", "phi", "R", "omega0", "eta0"];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MoveStats {
    pub proposed: [u64; 6],
    pub accepted: [u64; 6],
    /// Per-component counts inside fixed-dimension sweeps.
    pub fixed_proposed: [u64; 5],
    pub fixed_accepted: [u64; 5],
}

impl MoveStats {
    pub fn total_proposed(&self) -> u64 {
        self.proposed.iter().sum()
    }

    pub(crate) fn record(&mut self, m: MoveKind, accepted: bool) {
        self.proposed[m.index()] += 1;
        self.accepted[m.index()] += accepted as u64;
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("move,proposed,accepted,rate\n");
        let mut row = |name: &str, p: u64, a: u64| {
            let rate = if p > 0 { a as f64 / p as f64 } else { 0.0 };
            let _ = writeln!(out, "{name},{p},{a},{rate:.4}");
        };
        for m in MoveKind::ALL {
            row(m.name(), self.proposed[m.index()], self.accepted[m.index()]);
        }
        for (k, name) in FIXED_COMPONENTS.iter().enumerate() {
            row(
                &format!("fixed:{name}"),
                self.fixed_proposed[k],
                self.fixed_accepted[k],
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub iteration: usize,
    pub state: ModelState,
    pub log_posterior: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    pub draws: Vec<Draw>,
    pub move_stats: MoveStats,
    /// Left edge of the data window, where the background starts.
    pub xi_a: f64,
}

impl PosteriorSamples {
    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }
}
