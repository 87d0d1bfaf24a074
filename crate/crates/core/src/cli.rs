//! Command implementations behind the `lark` binary.
//!
//! Every output file starts with a comment header naming the tool version,
//! the seed and the SHA-256 digests of the inputs, so a directory of results
//! can be traced back to what produced it.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::config::{parse_f64_list, KeyValueFile};
use crate::error::{Error, Result};
use crate::model::{KernelKind, LikelihoodKind};
use crate::peaks::{
    filter_by_resolution, hp_peaks, ma_peaks, match_peaks, posterior_mean_curve, PeakReport,
};
use crate::priors::{
    elicit_abundance, elicit_background, elicit_phi, elicit_scale, elicit_signal_fraction,
    Hyperparameters, DEFAULT_A_PHI, DEFAULT_SIGMA2_OMEGA0, DEFAULT_SIGMA2_R, DEFAULT_SIGMA2_RHO,
    HYPERPARAMETER_KEYS,
};
use crate::sampler::{run_chain, samples_to_text, ChainConfig, PosteriorSamples};
use crate::simulate::{generate_spectrum, mean_of_replicates, TruthRecord};
use crate::spectrum::{clip_range, load_spectrum, standardize, Calibration, ColumnSpec, Spectrum};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default m/z window for the background regression, in Da/e.
pub const DEFAULT_MZ_WINDOW: (f64, f64) = (2000.0, 3500.0);
/// Default block width in µs for the precision regression.
pub const DEFAULT_PHI_BLOCK_WIDTH: f64 = 50.0;
/// Fraction of the TOF window, at its right end, used as the noise region
/// when none is given.
pub const DEFAULT_NOISE_FRACTION: f64 = 0.05;

/// Run-setup keys copied verbatim from the base config into the elicited one.
const PASSTHROUGH_KEYS: [&str; 6] = [
    "calib_u",
    "calib_t0",
    "n_shots",
    "mz_window",
    "noise_region",
    "phi_block_width",
];

#[derive(Debug, Parser)]
#[command(name = "lark", version, about = "Bayesian peak identification for MALDI-TOF spectra")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derive every prior hyperparameter from a spectrum and a base config.
    Elicit(ElicitArgs),
    /// Run the sampler and write samples, peak reports, curves and a summary.
    Fit(FitArgs),
    /// Draw synthetic replicate spectra from a truth config.
    Simulate(SimulateArgs),
    /// Match a peak report against a truth record.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct ElicitArgs {
    #[arg(long)]
    pub spectrum: PathBuf,
    /// Base config holding at least nu_J, mu_R and calib_u.
    #[arg(long)]
    pub config: PathBuf,
    /// Output config path.
    #[arg(long)]
    pub out: PathBuf,
    /// TOF interval `lo,hi` for the signal-fraction noise mean.
    #[arg(long = "noise-region", value_parser = parse_interval)]
    pub noise_region: Option<(f64, f64)>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub spectrum: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "cauchy")]
    pub kernel: KernelKind,
    #[arg(long, default_value = "gamma", value_parser = parse_likelihood)]
    pub likelihood: LikelihoodKind,
    #[arg(long, default_value_t = 10_000)]
    pub iterations: usize,
    /// Defaults to half the iterations.
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write an HP report keeping only peaks with at least this resolution.
    #[arg(long = "rho-min")]
    pub rho_min: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Truth config.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the `seed` key of the truth config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the `kernel` key of the truth config.
    #[arg(long)]
    pub kernel: Option<KernelKind>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Peak report file.
    pub report: PathBuf,
    /// Truth record, or a file of `mass = <Da/e>` lines.
    pub truth: PathBuf,
    #[arg(long, default_value_t = 0.003)]
    pub tol: f64,
    /// Output file; the match result goes to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_interval(s: &str) -> std::result::Result<(f64, f64), String> {
    let v = parse_f64_list(s).map_err(|e| e.to_string())?;
    match v.as_slice() {
        [a, b] if a < b => Ok((*a, *b)),
        _ => Err(format!("expected `lo,hi` with lo < hi, got `{s}`")),
    }
}

fn parse_likelihood(s: &str) -> std::result::Result<LikelihoodKind, String> {
    match s {
        "gamma" => Ok(LikelihoodKind::GammaObs),
        "normal" | "gaussian" => Ok(LikelihoodKind::GaussianObs {
            sample_precision: false,
        }),
        other => Err(format!("unknown likelihood `{other}` (gamma|normal)")),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Elicit(a) => cmd_elicit(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
    }
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

fn header(command: &str, seed: Option<u64>, inputs: &[(&str, &Path)]) -> Result<String> {
    let mut h = format!("lark {VERSION} {command}\nseed = ");
    match seed {
        Some(s) => h.push_str(&s.to_string()),
        None => h.push_str("none"),
    }
    for (name, p) in inputs {
        let _ = write!(h, "\n{name} sha256 = {}", file_digest(p)?);
    }
    Ok(h)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn calibration_from_config(kv: &KeyValueFile) -> Result<Calibration> {
    Calibration::new(kv.require_f64("calib_u")?, kv.get_f64("calib_t0")?.unwrap_or(0.0))
}

fn interval_key(kv: &KeyValueFile, key: &str) -> Result<Option<(f64, f64)>> {
    kv.get(key)
        .map(|v| parse_interval(v).map_err(|e| Error::Config(format!("`{key}`: {e}"))))
        .transpose()
}

/// Loads a spectrum file and standardizes it with the config's `n_shots`.
pub fn load_standardized(path: &Path, kv: &KeyValueFile) -> Result<Spectrum> {
    let n_shots = kv.get_parsed::<u32>("n_shots")?.unwrap_or(1);
    standardize(&load_spectrum(path, ColumnSpec::default(), n_shots)?)
}

/// Fills in every hyperparameter not already present in `base`.
///
/// Keys set in `base` win and are tagged `user`; `nu_J` and `mu_R` must be
/// given. The result also carries the run-setup keys of `base`.
pub fn elicit_config(
    spec: &Spectrum,
    base: &KeyValueFile,
    noise_region: Option<(f64, f64)>,
) -> Result<KeyValueFile> {
    let calib = calibration_from_config(base)?;
    let user = |k: &str| base.get_f64(k);
    let mut prov: Vec<(&str, String)> = Vec::new();
    let mut pick = |key: &'static str, v: Option<f64>, tag: &str, fallback: &mut dyn FnMut() -> Result<f64>| -> Result<f64> {
        match v {
            Some(x) => {
                prov.push((key, "user".into()));
                Ok(x)
            }
            None => {
                let x = fallback()?;
                prov.push((key, tag.to_string()));
                Ok(x)
            }
        }
    };

    let nu_j = base
        .get_f64("nu_J")?
        .ok_or_else(|| Error::Config("`nu_J` must be set in the config (no default)".into()))?;
    let mu_r = base
        .get_f64("mu_R")?
        .ok_or_else(|| Error::Config("`mu_R` must be set in the config (no default)".into()))?;
    pick("nu_J", Some(nu_j), "", &mut || Ok(nu_j))?;
    let t0 = pick("T0", user("T0")?, "data: first grid TOF", &mut || Ok(spec.range.0))?;
    let t1 = pick("T1", user("T1")?, "data: last grid TOF", &mut || Ok(spec.range.1))?;
    let win = clip_range(spec, t0, t1)?;

    let (lam, eps) = elicit_abundance(nu_j, t0, t1)?;
    let lambda = pick("lambda", user("lambda")?, "data: minimum detectable abundance", &mut || Ok(lam))?;
    let eps = pick("eps", user("eps")?, "data: minimum detectable abundance", &mut || Ok(eps))?;
    let sigma2_rho = pick("sigma2_rho", user("sigma2_rho")?, "default", &mut || Ok(DEFAULT_SIGMA2_RHO))?;
    pick("mu_R", Some(mu_r), "", &mut || Ok(mu_r))?;
    let sigma2_r = pick("sigma2_R", user("sigma2_R")?, "default", &mut || Ok(DEFAULT_SIGMA2_R))?;

    let block = base.get_f64("phi_block_width")?.unwrap_or(DEFAULT_PHI_BLOCK_WIDTH);
    let a_phi = pick("a_phi", user("a_phi")?, "default", &mut || Ok(DEFAULT_A_PHI))?;
    let b_phi = pick("b_phi", user("b_phi")?, "data: block mean-variance regression", &mut || {
        Ok(elicit_phi(&win, block)?.1)
    })?;

    let region = match noise_region.or(interval_key(base, "noise_region")?) {
        Some(r) => r,
        None => (t1 - DEFAULT_NOISE_FRACTION * (t1 - t0), t1),
    };
    let (a_s_hat, b_s_hat) = match (user("a_s")?, user("b_s")?) {
        (Some(a), Some(b)) => (a, b),
        _ => elicit_signal_fraction(&win, region)?,
    };
    let a_s = pick("a_s", user("a_s")?, "data: noise-region mean ratio", &mut || Ok(a_s_hat))?;
    let b_s = pick("b_s", user("b_s")?, "default", &mut || Ok(b_s_hat))?;

    let mz_window = interval_key(base, "mz_window")?.unwrap_or(DEFAULT_MZ_WINDOW);
    let (need_lambda0, need_omega0) = (user("lambda0")?.is_none(), user("omega0_hat")?.is_none());
    let bg = if need_lambda0 || need_omega0 {
        Some(elicit_background(&win, mz_window, &calib, eps)?)
    } else {
        None
    };
    let lambda0 = pick("lambda0", user("lambda0")?, "data: background regression", &mut || {
        Ok(bg.expect("computed above").lambda0)
    })?;
    let omega0_hat = pick("omega0_hat", user("omega0_hat")?, "data: background regression", &mut || {
        Ok(bg.expect("computed above").omega0_hat)
    })?;
    let sigma2_omega0 = pick("sigma2_omega0", user("sigma2_omega0")?, "default", &mut || {
        Ok(DEFAULT_SIGMA2_OMEGA0)
    })?;
    let gamma_fixed = pick("gamma_fixed", user("gamma_fixed")?, "data: mean intensity", &mut || {
        Ok(elicit_scale(&win))
    })?;

    let h = Hyperparameters {
        nu_j,
        lambda,
        eps,
        t0,
        t1,
        sigma2_rho,
        mu_r,
        sigma2_r,
        a_phi,
        b_phi,
        a_s,
        b_s,
        lambda0,
        omega0_hat,
        sigma2_omega0,
        gamma_fixed,
    };
    h.validate()?;

    let mut out = KeyValueFile::new();
    for key in PASSTHROUGH_KEYS {
        if let Some(v) = base.get(key) {
            out.push(key, v, Some("run setup"));
        }
    }
    if !out.contains("noise_region") {
        out.push("noise_region", format!("{},{}", region.0, region.1), Some("default"));
    }
    h.write_config(&mut out, |k| {
        prov.iter()
            .find(|(key, _)| *key == k)
            .map(|(_, p)| p.clone())
            .unwrap_or_default()
    });
    debug_assert!(HYPERPARAMETER_KEYS.iter().all(|k| out.contains(k)));
    Ok(out)
}

pub fn cmd_elicit(a: &ElicitArgs) -> Result<()> {
    let base = KeyValueFile::read(&a.config)?;
    let spec = load_standardized(&a.spectrum, &base)?;
    let kv = elicit_config(&spec, &base, a.noise_region)?;
    let h = header("elicit", None, &[("spectrum", &a.spectrum), ("config", &a.config)])?;
    kv.write(&a.out, &h)
}

/// Everything a fit produces, before it is written out.
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub samples: PosteriorSamples,
    pub hp: PeakReport,
    pub ma: PeakReport,
    pub hp_filtered: Option<PeakReport>,
    /// Grid used for the posterior-mean curves and MA peaks.
    pub curve_grid: Vec<f64>,
    pub mean_curve: Vec<f64>,
    pub deriv_curve: Vec<f64>,
    pub summary: Summary,
}

/// Posterior means and standard deviations in the layout of the results
/// table: s, φ, R, η₀, ω₀, then the three peak counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rows: Vec<(&'static str, f64, Option<f64>)>,
}

impl Summary {
    pub const QUANTITIES: [&'static str; 8] =
        ["s", "phi", "R", "eta0", "omega0", "J_PM", "J_HP", "J_DV"];

    pub fn to_text(&self, header: &str) -> String {
        let mut out = String::new();
        for line in header.lines() {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str("quantity,mean,sd\n");
        for (q, m, sd) in &self.rows {
            let sd = sd.map_or_else(|| "NA".to_string(), |v| v.to_string());
            let _ = writeln!(out, "{q},{m},{sd}");
        }
        out
    }

    pub fn get(&self, q: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.0 == q).map(|r| r.1)
    }
}

fn mean_sd(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count() as f64;
    let m = v.clone().sum::<f64>() / n;
    let var = v.map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, var.sqrt())
}

fn summarize(samples: &PosteriorSamples, hp: &PeakReport, ma: &PeakReport) -> Summary {
    let d = &samples.draws;
    let stat = |f: fn(&crate::sampler::Draw) -> f64| mean_sd(d.iter().map(f));
    let mut rows = Vec::new();
    for (name, f) in [
        ("s", (|x: &crate::sampler::Draw| x.state.s) as fn(&crate::sampler::Draw) -> f64),
        ("phi", |x| x.state.phi),
        ("R", |x| x.state.big_r),
        ("eta0", |x| x.state.bg.eta0),
        ("omega0", |x| x.state.bg.omega0),
        ("J_PM", |x| x.state.n_peaks() as f64),
    ] {
        let (m, sd) = stat(f);
        rows.push((name, m, Some(sd)));
    }
    rows.push(("J_HP", hp.peaks.len() as f64, None));
    rows.push(("J_DV", ma.peaks.len() as f64, None));
    Summary { rows }
}

/// Grid for the averaged curves: the data grid, subdivided until its step is
/// at most a tenth of the narrowest FWHM the prior centres on (at `T0`), and
/// at least `min_refine` times.
pub fn curve_grid(spec: &Spectrum, h: &Hyperparameters, min_refine: usize) -> Vec<f64> {
    let target = h.t0.max(f64::MIN_POSITIVE) / h.mu_r / 10.0;
    let step = spec.median_step();
    let refine = ((step / target).ceil() as usize).max(min_refine).max(1);
    let mut g = Vec::with_capacity(spec.len() * refine);
    for w in spec.tof.windows(2) {
        for k in 0..refine {
            g.push(w[0] + (w[1] - w[0]) * k as f64 / refine as f64);
        }
    }
    g.push(spec.tof[spec.len() - 1]);
    g
}

/// Runs the sampler on a standardized spectrum and derives every report.
pub fn fit(
    spec: &Spectrum,
    kv: &KeyValueFile,
    kind: KernelKind,
    lk: LikelihoodKind,
    cfg: &ChainConfig,
    rho_min: Option<f64>,
) -> Result<FitOutput> {
    let h = Hyperparameters::from_config(kv)?;
    let calib = calibration_from_config(kv)?;
    let win = clip_range(spec, h.t0, h.t1)?;
    let samples = run_chain(&win, &h, kind, lk, cfg)?;
    let min_refine = kv.get_parsed::<usize>("ma_refine")?.unwrap_or(1);
    let grid = curve_grid(&win, &h, min_refine);
    let hp = hp_peaks(&samples, &calib)?;
    let ma = ma_peaks(&samples, &grid, kind, &calib);
    let hp_filtered = rho_min.map(|r| filter_by_resolution(&hp, r)).transpose()?;
    let mean_curve = posterior_mean_curve(&samples, &grid, kind, false);
    let deriv_curve = posterior_mean_curve(&samples, &grid, kind, true);
    let summary = summarize(&samples, &hp, &ma);
    Ok(FitOutput {
        samples,
        hp,
        ma,
        hp_filtered,
        curve_grid: grid,
        mean_curve,
        deriv_curve,
        summary,
    })
}

fn curve_text(header: &str, grid: &[f64], v: &[f64], column: &str) -> String {
    let mut out = String::new();
    for line in header.lines() {
        let _ = writeln!(out, "# {line}");
    }
    let _ = writeln!(out, "tof,{column}");
    for (t, y) in grid.iter().zip(v) {
        let _ = writeln!(out, "{t},{y}");
    }
    out
}

/// File names written by `fit`.
pub mod fit_files {
    pub const SAMPLES: &str = "samples.csv";
    pub const MOVES: &str = "moves.csv";
    pub const HP: &str = "peaks_hp.csv";
    pub const HP_FILTERED: &str = "peaks_hp_filtered.csv";
    pub const MA: &str = "peaks_ma.csv";
    pub const MEAN_CURVE: &str = "curve_mean.csv";
    pub const DERIV_CURVE: &str = "curve_deriv.csv";
    pub const SUMMARY: &str = "summary.csv";
    pub const FAILED: &str = "FAILED";
}

pub fn write_fit_outputs(dir: &Path, out: &FitOutput, header: &str) -> Result<()> {
    use fit_files::*;
    create_dir(dir)?;
    write_file(&dir.join(SAMPLES), &samples_to_text(&out.samples, header))?;
    let mut moves = String::new();
    for line in header.lines() {
        let _ = writeln!(moves, "# {line}");
    }
    moves.push_str(&out.samples.move_stats.to_text());
    write_file(&dir.join(MOVES), &moves)?;
    out.hp.write(&dir.join(HP), header)?;
    out.ma.write(&dir.join(MA), header)?;
    if let Some(f) = &out.hp_filtered {
        f.write(&dir.join(HP_FILTERED), header)?;
    }
    write_file(
        &dir.join(MEAN_CURVE),
        &curve_text(header, &out.curve_grid, &out.mean_curve, "mean"),
    )?;
    write_file(
        &dir.join(DERIV_CURVE),
        &curve_text(header, &out.curve_grid, &out.deriv_curve, "deriv"),
    )?;
    write_file(&dir.join(SUMMARY), &out.summary.to_text(header))
}

pub fn cmd_fit(a: &FitArgs) -> Result<()> {
    let kv = KeyValueFile::read(&a.config)?;
    let spec = load_standardized(&a.spectrum, &kv)?;
    let cfg = ChainConfig {
        n_iter: a.iterations,
        n_burn: a.burnin.unwrap_or(a.iterations / 2),
        thin: a.thin,
        seed: a.seed,
        ..Default::default()
    };
    let mut h = header("fit", Some(a.seed), &[("spectrum", &a.spectrum), ("config", &a.config)])?;
    let _ = write!(
        h,
        "\nkernel = {} likelihood = {} iterations = {} burnin = {} thin = {}",
        a.kernel,
        a.likelihood,
        cfg.n_iter,
        cfg.n_burn,
        cfg.thin
    );
    create_dir(&a.out)?;
    let failed = a.out.join(fit_files::FAILED);
    match fit(&spec, &kv, a.kernel, a.likelihood, &cfg, a.rho_min) {
        Ok(out) => {
            if failed.exists() {
                fs::remove_file(&failed).map_err(|e| Error::io(&failed, e))?;
            }
            write_fit_outputs(&a.out, &out, &h)
        }
        Err(e) => {
            // Anything already in the directory is from an earlier run.
            write_file(&failed, &format!("{h}\nerror={} {e}\n", e.category()))?;
            Err(e)
        }
    }
}

/// File names written by `simulate`.
pub mod simulate_files {
    pub const TRUTH: &str = "truth.txt";
    pub const MEAN: &str = "mean.csv";

    pub fn replicate(i: usize) -> String {
        format!("replicate_{i:03}.csv")
    }
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let kv = KeyValueFile::read(&a.config)?;
    let base = TruthRecord::from_config(&kv)?;
    let seed = a.seed.unwrap_or(base.seed);
    let kind = a.kernel.unwrap_or(base.kernel);
    let sim = generate_spectrum(&base.truth, kind, seed)?;
    let h = header("simulate", Some(seed), &[("config", &a.config)])?;
    create_dir(&a.out)?;
    for (i, r) in sim.replicates.iter().enumerate() {
        r.write(&a.out.join(simulate_files::replicate(i)), Some(&h))?;
    }
    mean_of_replicates(&sim)?.write(&a.out.join(simulate_files::MEAN), Some(&h))?;
    sim.record.write(&a.out.join(simulate_files::TRUTH), &h)
}

/// True masses from a truth record, or from `mass = ...` lines.
pub fn read_truth_masses(path: &Path) -> Result<Vec<f64>> {
    let kv = KeyValueFile::read(path)?;
    if kv.contains("peak") {
        return TruthRecord::from_config(&kv)?.truth.true_masses();
    }
    let masses = kv
        .get_all("mass")
        .map(|v| {
            v.parse::<f64>()
                .map_err(|_| Error::Schema(format!("{}: `mass = {v}` is not a number", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    if masses.is_empty() && !kv.contains("mass") {
        return Err(Error::Schema(format!(
            "{}: neither `peak` nor `mass` entries found",
            path.display()
        )));
    }
    Ok(masses)
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    if !(a.tol > 0.0) {
        return Err(Error::invalid(format!("--tol must be positive, got {}", a.tol)));
    }
    let report = PeakReport::read(&a.report)?;
    let truth = read_truth_masses(&a.truth)?;
    let m = match_peaks(&report, &truth, a.tol)?;
    let h = header("evaluate", None, &[("report", &a.report), ("truth", &a.truth)])?;
    let text = m.to_config(a.tol).to_text(&h);
    match &a.out {
        Some(p) => write_file(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
