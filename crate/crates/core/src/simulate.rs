//! Synthetic spectra drawn from the forward model with known truth.
//!
//! Each replicate uses its own ChaCha stream (stream index = replicate
//! index + 1) under the run seed, so replicates can be produced in any order
//! and the set is fixed by the seed alone.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::config::KeyValueFile;
use crate::error::{Error, Result};
use crate::model::{mean_intensity, BackgroundParams, KernelKind, ModelState, PeakParams};
use crate::spectrum::{mean_spectrum, Calibration, Spectrum};

/// Where a true peak sits: directly in TOF, or as a mass mapped through the
/// calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PeakLocation {
    Tof(f64),
    Mz(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruePeak {
    pub location: PeakLocation,
    pub rho: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// Gamma with mean μ and precision φ (variance μ/φ).
    Gamma { phi: f64 },
    /// Additive Gaussian with standard deviation σ, floored at zero.
    Gaussian { sigma: f64 },
}

/// Uniform TOF grid `lo, lo + step, ...` up to `hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TofGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl TofGrid {
    pub fn n_points(&self) -> usize {
        ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points()).map(|i| self.lo + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthSpec {
    pub peaks: Vec<TruePeak>,
    pub background: Option<BackgroundParams>,
    pub s: f64,
    pub gamma: f64,
    pub noise: NoiseModel,
    pub grid: TofGrid,
    pub n_replicates: usize,
    pub calib: Calibration,
}

impl TruthSpec {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !(pos(self.grid.step) && self.grid.lo.is_finite() && self.grid.hi > self.grid.lo) {
            return Err(Error::invalid(format!(
                "grid needs lo < hi and step > 0 (got {:?})",
                self.grid
            )));
        }
        if !(0.0..=1.0).contains(&self.s) || !pos(self.gamma) {
            return Err(Error::invalid("truth needs 0 <= s <= 1 and gamma > 0"));
        }
        if self.n_replicates == 0 {
            return Err(Error::invalid("at least one replicate is required"));
        }
        match self.noise {
            NoiseModel::Gamma { phi } if !pos(phi) => {
                return Err(Error::invalid("gamma noise needs phi > 0"))
            }
            NoiseModel::Gaussian { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                return Err(Error::invalid("Gaussian noise needs sigma >= 0"))
            }
            _ => {}
        }
        if let Some(bg) = self.background {
            if !(pos(bg.omega0) && pos(bg.eta0)) {
                return Err(Error::invalid("background needs omega0 > 0 and eta0 > 0"));
            }
        }
        for p in &self.peaks {
            if !(pos(p.rho) && pos(p.eta)) {
                return Err(Error::invalid(format!("peak {p:?} needs rho > 0 and eta > 0")));
            }
            self.peak_tof(p)?;
        }
        Ok(())
    }

    fn peak_tof(&self, p: &TruePeak) -> Result<f64> {
        match p.location {
            PeakLocation::Tof(t) if t > 0.0 && t.is_finite() => Ok(t),
            PeakLocation::Tof(t) => Err(Error::invalid(format!("peak TOF {t} must be positive"))),
            PeakLocation::Mz(m) => self.calib.mz_to_tof(m),
        }
    }

    /// The model state whose mean intensity generates the data. φ and R are
    /// placeholders; they do not enter μ.
    pub fn to_state(&self) -> Result<ModelState> {
        let peaks = self
            .peaks
            .iter()
            .map(|p| Ok(PeakParams::new(self.peak_tof(p)?, p.rho, p.eta)))
            .collect::<Result<Vec<_>>>()?;
        let bg = self.background.unwrap_or(BackgroundParams {
            omega0: 1.0,
            eta0: 0.0,
        });
        Ok(ModelState {
            gamma: self.gamma,
            s: self.s,
            peaks,
            bg,
            phi: 1.0,
            big_r: 1.0,
        })
    }

    /// Noise-free expected intensity on the grid.
    pub fn mean_curve(&self, kind: KernelKind) -> Result<Vec<f64>> {
        let state = self.to_state()?;
        Ok(self
            .grid
            .points()
            .iter()
            .map(|&t| mean_intensity(&state, kind, t, self.grid.lo))
            .collect())
    }

    /// True peak masses in Da/e, in the order the peaks were given.
    pub fn true_masses(&self) -> Result<Vec<f64>> {
        self.peaks
            .iter()
            .map(|p| match p.location {
                PeakLocation::Mz(m) => Ok(m),
                PeakLocation::Tof(t) => self.calib.tof_to_mz(t),
            })
            .collect()
    }
}

/// Everything needed to regenerate a simulation, plus what happened in it.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRecord {
    pub truth: TruthSpec,
    pub kernel: KernelKind,
    pub seed: u64,
    /// Gaussian draws clipped to zero, over all replicates.
    pub n_floored: usize,
    pub n_values: usize,
}

impl TruthRecord {
    pub fn floored_fraction(&self) -> f64 {
        if self.n_values == 0 {
            0.0
        } else {
            self.n_floored as f64 / self.n_values as f64
        }
    }

    pub fn to_config(&self) -> KeyValueFile {
        let t = &self.truth;
        let mut kv = KeyValueFile::new();
        kv.push("kernel", self.kernel.name(), None);
        kv.push("seed", self.seed, None);
        kv.push("gamma", t.gamma, None);
        kv.push("s", t.s, None);
        match t.noise {
            NoiseModel::Gamma { phi } => {
                kv.push("noise", "gamma", None);
                kv.push("phi", phi, None);
            }
            NoiseModel::Gaussian { sigma } => {
                kv.push("noise", "normal", None);
                kv.push("sigma", sigma, None);
            }
        }
        kv.push("grid_lo", t.grid.lo, None);
        kv.push("grid_hi", t.grid.hi, None);
        kv.push("grid_step", t.grid.step, None);
        kv.push("n_replicates", t.n_replicates, None);
        kv.push("calib_u", t.calib.u, None);
        kv.push("calib_t0", t.calib.t0, None);
        if let Some(bg) = t.background {
            kv.push("omega0", bg.omega0, None);
            kv.push("eta0", bg.eta0, None);
        }
        for p in &t.peaks {
            let (unit, loc) = match p.location {
                PeakLocation::Tof(v) => ("tof", v),
                PeakLocation::Mz(v) => ("mz", v),
            };
            kv.push("peak", format!("{unit} {loc} {} {}", p.rho, p.eta), Some("location rho eta"));
        }
        kv.push("n_floored", self.n_floored, None);
        kv.push("n_values", self.n_values, None);
        kv
    }

    /// Reads a record. Only `kernel`, the noise, grid, calibration and peak
    /// keys are required; the rest default to a fresh, unrun simulation.
    pub fn from_config(kv: &KeyValueFile) -> Result<Self> {
        let kernel = kv.get_parsed::<KernelKind>("kernel")?.unwrap_or(KernelKind::Gaussian);
        let noise = match kv.get("noise").unwrap_or("normal") {
            "gamma" => NoiseModel::Gamma {
                phi: kv.require_f64("phi")?,
            },
            "normal" | "gaussian" => NoiseModel::Gaussian {
                sigma: kv.require_f64("sigma")?,
            },
            other => {
                return Err(Error::Config(format!(
                    "`noise` must be gamma or normal, got `{other}`"
                )))
            }
        };
        let background = match (kv.get_f64("omega0")?, kv.get_f64("eta0")?) {
            (Some(omega0), Some(eta0)) => Some(BackgroundParams { omega0, eta0 }),
            (None, None) => None,
            _ => return Err(Error::Config("`omega0` and `eta0` must be given together".into())),
        };
        let peaks = kv
            .get_all("peak")
            .map(parse_peak)
            .collect::<Result<Vec<_>>>()?;
        let truth = TruthSpec {
            peaks,
            background,
            s: kv.require_f64("s")?,
            gamma: kv.get_f64("gamma")?.unwrap_or(1.0),
            noise,
            grid: TofGrid {
                lo: kv.require_f64("grid_lo")?,
                hi: kv.require_f64("grid_hi")?,
                step: kv.require_f64("grid_step")?,
            },
            n_replicates: kv.get_parsed("n_replicates")?.unwrap_or(1),
            calib: Calibration::new(kv.require_f64("calib_u")?, kv.get_f64("calib_t0")?.unwrap_or(0.0))?,
        };
        truth.validate()?;
        Ok(Self {
            truth,
            kernel,
            seed: kv.get_parsed("seed")?.unwrap_or(0),
            n_floored: kv.get_parsed("n_floored")?.unwrap_or(0),
            n_values: kv.get_parsed("n_values")?.unwrap_or(0),
        })
    }

    pub fn write(&self, path: &Path, header: &str) -> Result<()> {
        self.to_config().write(path, header)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_config(&KeyValueFile::read(path)?)
    }
}

fn parse_peak(v: &str) -> Result<TruePeak> {
    let f: Vec<&str> = v.split_whitespace().collect();
    let bad = || Error::Config(format!("`peak` expects `tof|mz <location> <rho> <eta>`, got `{v}`"));
    if f.len() != 4 {
        return Err(bad());
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
    let loc = num(f[1])?;
    let location = match f[0] {
        "tof" => PeakLocation::Tof(loc),
        "mz" => PeakLocation::Mz(loc),
        _ => return Err(bad()),
    };
    Ok(TruePeak {
        location,
        rho: num(f[2])?,
        eta: num(f[3])?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub replicates: Vec<Spectrum>,
    pub record: TruthRecord,
}

/// Draws `truth.n_replicates` noisy spectra around the exact mean curve.
pub fn generate_spectrum(truth: &TruthSpec, kind: KernelKind, seed: u64) -> Result<Simulation> {
    truth.validate()?;
    let mu = truth.mean_curve(kind)?;
    let tof = truth.grid.points();
    let mut n_floored = 0;
    let mut replicates = Vec::with_capacity(truth.n_replicates);
    for r in 0..truth.n_replicates {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64 + 1);
        let (y, floored) = draw_replicate(&mu, truth.noise, &mut rng)?;
        n_floored += floored;
        replicates.push(Spectrum::new(tof.clone(), y)?);
    }
    Ok(Simulation {
        replicates,
        record: TruthRecord {
            truth: truth.clone(),
            kernel: kind,
            seed,
            n_floored,
            n_values: mu.len() * truth.n_replicates,
        },
    })
}

fn draw_replicate<R: Rng>(mu: &[f64], noise: NoiseModel, rng: &mut R) -> Result<(Vec<f64>, usize)> {
    let mut floored = 0;
    let y = match noise {
        NoiseModel::Gaussian { sigma } => mu
            .iter()
            .map(|&m| {
                let z: f64 = StandardNormal.sample(rng);
                let v = m + sigma * z;
                if v < 0.0 {
                    floored += 1;
                    0.0
                } else {
                    v
                }
            })
            .collect(),
        NoiseModel::Gamma { phi } => mu
            .iter()
            .map(|&m| {
                let g = Gamma::new(phi * m, 1.0 / phi)
                    .map_err(|e| Error::invalid(format!("gamma noise at mean {m}: {e}")))?;
                Ok(g.sample(rng))
            })
            .collect::<Result<Vec<f64>>>()?,
    };
    Ok((y, floored))
}

pub fn mean_of_replicates(sim: &Simulation) -> Result<Spectrum> {
    mean_spectrum(&sim.replicates)
}

/// Random truth for the small-scale detection study: Gaussian peaks at a
/// common resolution with log-uniform signal-to-noise, on an exponential
/// background, observed with Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct DeskScaleDesign {
    pub grid: TofGrid,
    pub calib: Calibration,
    pub n_peaks: usize,
    /// Peak TOFs are drawn uniformly in this interval.
    pub peak_window: (f64, f64),
    pub min_separation: f64,
    pub rho: f64,
    /// Per-peak height over the noise SD of the mean spectrum.
    pub snr_range: (f64, f64),
    /// Noise SD of the mean spectrum, in units of the height of an η = 1
    /// peak at the window centre.
    pub noise_height: f64,
    pub gamma: f64,
    pub s: f64,
    pub background: BackgroundParams,
    pub n_replicates: usize,
}

impl Default for DeskScaleDesign {
    fn default() -> Self {
        Self {
            grid: TofGrid {
                lo: 20.0,
                hi: 80.0,
                step: 0.03,
            },
            calib: Calibration { u: 5.0, t0: 0.0 },
            n_peaks: 15,
            peak_window: (27.0, 75.0),
            min_separation: 1.5,
            rho: 300.0,
            snr_range: (3.0, 50.0),
            noise_height: 0.2,
            gamma: 100.0,
            s: 0.05,
            background: BackgroundParams {
                omega0: 10.0,
                eta0: 20.0,
            },
            n_replicates: 10,
        }
    }
}

impl DeskScaleDesign {
    /// Noise SD of a single replicate.
    pub fn replicate_sigma(&self) -> f64 {
        self.mean_sigma() * (self.n_replicates as f64).sqrt()
    }

    pub fn mean_sigma(&self) -> f64 {
        let mid = 0.5 * (self.grid.lo + self.grid.hi);
        let omega = PeakParams::new(mid, self.rho, 1.0).width(KernelKind::Gaussian);
        self.noise_height * self.gamma * self.s * KernelKind::Gaussian.peak_height(omega)
    }

    pub fn draw(&self, seed: u64) -> TruthSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = self.peak_window;
        let mut taus: Vec<f64> = Vec::with_capacity(self.n_peaks);
        while taus.len() < self.n_peaks {
            let t = rng.random_range(a..b);
            if taus.iter().all(|u| (u - t).abs() >= self.min_separation) {
                taus.push(t);
            }
        }
        taus.sort_by(f64::total_cmp);
        let (lo, hi) = (self.snr_range.0.ln(), self.snr_range.1.ln());
        let sigma_mean = self.mean_sigma();
        let peaks = taus
            .into_iter()
            .map(|tau| {
                let snr = rng.random_range(lo..hi).exp();
                let omega = PeakParams::new(tau, self.rho, 1.0).width(KernelKind::Gaussian);
                let unit_height = self.gamma * self.s * KernelKind::Gaussian.peak_height(omega);
                TruePeak {
                    location: PeakLocation::Tof(tau),
                    rho: self.rho,
                    eta: snr * sigma_mean / unit_height,
                }
            })
            .collect();
        TruthSpec {
            peaks,
            background: Some(self.background),
            s: self.s,
            gamma: self.gamma,
            noise: NoiseModel::Gaussian {
                sigma: self.replicate_sigma(),
            },
            grid: self.grid,
            n_replicates: self.n_replicates,
            calib: self.calib,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_truth(noise: NoiseModel, n: usize) -> TruthSpec {
        TruthSpec {
            peaks: vec![
                TruePeak {
                    location: PeakLocation::Tof(30.0),
                    rho: 200.0,
                    eta: 2.0,
                },
                TruePeak {
                    location: PeakLocation::Mz(5.0 * 40.0 * 40.0),
                    rho: 150.0,
                    eta: 1.0,
                },
            ],
            background: Some(BackgroundParams {
                omega0: 8.0,
                eta0: 30.0,
            }),
            s: 0.3,
            gamma: 10.0,
            noise,
            grid: TofGrid {
                lo: 25.0,
                hi: 45.0,
                step: 0.1,
            },
            n_replicates: n,
            calib: Calibration::new(5.0, 0.0).unwrap(),
        }
    }

    #[test]
    fn zero_sigma_reproduces_mean() {
        let t = small_truth(NoiseModel::Gaussian { sigma: 0.0 }, 2);
        let sim = generate_spectrum(&t, KernelKind::Cauchy, 3).unwrap();
        let mu = t.mean_curve(KernelKind::Cauchy).unwrap();
        assert_eq!(sim.replicates[0].intensity, mu);
        assert_eq!(sim.replicates[1].intensity, mu);
        assert_eq!(sim.record.n_floored, 0);
        assert_eq!(t.grid.n_points(), 201);
    }

    #[test]
    fn gamma_replicates_average_to_mean() {
        let n = 10_000;
        let mut t = small_truth(NoiseModel::Gamma { phi: 2.0 }, n);
        t.grid = TofGrid {
            lo: 29.0,
            hi: 31.0,
            step: 0.25,
        };
        let sim = generate_spectrum(&t, KernelKind::Gaussian, 11).unwrap();
        let mu = t.mean_curve(KernelKind::Gaussian).unwrap();
        for (i, &m) in mu.iter().enumerate() {
            let v: Vec<f64> = sim.replicates.iter().map(|s| s.intensity[i]).collect();
            let mean = v.iter().sum::<f64>() / n as f64;
            let se = (m / 2.0 / n as f64).sqrt();
            assert!((mean - m).abs() < 3.0 * se, "point {i}: {mean} vs {m} (se {se})");
        }
    }

    #[test]
    fn seed_fixes_replicates() {
        let t = small_truth(NoiseModel::Gaussian { sigma: 0.5 }, 3);
        let a = generate_spectrum(&t, KernelKind::Gaussian, 5).unwrap();
        let b = generate_spectrum(&t, KernelKind::Gaussian, 5).unwrap();
        let c = generate_spectrum(&t, KernelKind::Gaussian, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.replicates, c.replicates);
        assert_ne!(a.replicates[0], a.replicates[1]);
    }

    #[test]
    fn single_replicate_mean_is_itself() {
        let t = small_truth(NoiseModel::Gaussian { sigma: 0.5 }, 1);
        let sim = generate_spectrum(&t, KernelKind::Gaussian, 1).unwrap();
        assert_eq!(mean_of_replicates(&sim).unwrap(), sim.replicates[0]);
    }

    #[test]
    fn mean_spectrum_sd_shrinks_with_replicates() {
        // Flat mean far from zero so no flooring occurs. A single 100-point
        // SD estimate has ~7% relative error, so the ratio to σ/√n is pooled
        // over independent seeds.
        let sigma = 2.0;
        let n = 25;
        let t = TruthSpec {
            peaks: vec![],
            background: None,
            s: 0.0,
            gamma: 100.0,
            noise: NoiseModel::Gaussian { sigma },
            grid: TofGrid {
                lo: 10.0,
                hi: 10.99,
                step: 0.01,
            },
            n_replicates: n,
            calib: Calibration::new(1.0, 0.0).unwrap(),
        };
        assert_eq!(t.grid.n_points(), 100);
        let expect = sigma / (n as f64).sqrt();
        let runs = 40;
        let mut var = 0.0;
        for seed in 0..runs {
            let sim = generate_spectrum(&t, KernelKind::Gaussian, seed).unwrap();
            let m = mean_of_replicates(&sim).unwrap();
            var += m.intensity.iter().map(|y| (y - 100.0).powi(2)).sum::<f64>() / 100.0;
        }
        let sd = (var / runs as f64).sqrt();
        assert!((sd / expect - 1.0).abs() < 0.05, "{sd} vs {expect}");
    }

    #[test]
    fn record_round_trips_exactly() {
        let t = small_truth(NoiseModel::Gaussian { sigma: 0.1 / 3.0 }, 4);
        let sim = generate_spectrum(&t, KernelKind::Cauchy, 99).unwrap();
        let text = sim.record.to_config().to_text("truth");
        let back = TruthRecord::from_config(&KeyValueFile::parse(&text).unwrap()).unwrap();
        assert_eq!(back, sim.record);
        assert_eq!(back.truth.true_masses().unwrap()[1], 8000.0);
    }

    #[test]
    fn desk_design_is_separated_and_rarely_floored() {
        let d = DeskScaleDesign::default();
        let t = d.draw(4);
        assert_eq!(t.peaks.len(), 15);
        let taus: Vec<f64> = t.to_state().unwrap().peaks.iter().map(|p| p.tau).collect();
        assert!(taus.windows(2).all(|w| w[1] - w[0] >= d.min_separation));
        let sim = generate_spectrum(&t, KernelKind::Gaussian, 4).unwrap();
        assert!(sim.record.floored_fraction() < 1e-3);
        assert_eq!(sim.replicates[0].len(), 2001);
    }
}
