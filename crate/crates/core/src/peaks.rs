//! Posterior summaries, peak identification and matching against truth.

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::config::KeyValueFile;
use crate::error::{Error, Result};
use crate::model::KernelKind;
use crate::sampler::PosteriorSamples;
use crate::spectrum::Calibration;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeakMethod {
    /// Highest-posterior draw.
    Hp,
    /// Down-crossings of the model-averaged derivative.
    Ma,
}

impl PeakMethod {
    pub fn name(self) -> &'static str {
        match self {
            PeakMethod::Hp => "HP",
            PeakMethod::Ma => "MA",
        }
    }
}

impl fmt::Display for PeakMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PeakMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "HP" | "hp" => Ok(PeakMethod::Hp),
            "MA" | "ma" => Ok(PeakMethod::Ma),
            other => Err(Error::Schema(format!("unknown peak method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportedPeak {
    pub tau: f64,
    pub mz: f64,
    pub eta: Option<f64>,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakReport {
    pub method: PeakMethod,
    /// Sorted by `tau`.
    pub peaks: Vec<ReportedPeak>,
    pub source: String,
}

fn to_mz(calib: &Calibration, t: f64) -> f64 {
    calib.tof_to_mz(t).unwrap_or(f64::NAN)
}

/// Pointwise average of μ(t) (or dμ/dt) over the stored draws.
///
/// `grid` must be increasing; Gaussian kernels are only evaluated where they
/// are nonzero in floating point.
pub fn posterior_mean_curve(
    samples: &PosteriorSamples,
    grid: &[f64],
    kind: KernelKind,
    deriv: bool,
) -> Vec<f64> {
    let mut acc = vec![0.0; grid.len()];
    if samples.draws.is_empty() {
        return acc;
    }
    let xi_a = samples.xi_a;
    for d in &samples.draws {
        let st = &d.state;
        let gs = st.gamma * st.s;
        let floor = st.gamma * (1.0 - st.s);
        for (a, &t) in acc.iter_mut().zip(grid) {
            *a += if deriv {
                gs * st.bg.deriv(t, xi_a)
            } else {
                floor + gs * st.bg.eval(t, xi_a)
            };
        }
        for p in &st.peaks {
            let omega = p.width(kind);
            let (lo, hi) = match kind.support_radius(omega) {
                Some(r) => (
                    grid.partition_point(|&t| t < p.tau - r),
                    grid.partition_point(|&t| t <= p.tau + r),
                ),
                None => (0, grid.len()),
            };
            for i in lo..hi {
                let t = grid[i];
                acc[i] += gs * p.eta
                    * if deriv {
                        kind.deriv(t, p.tau, omega)
                    } else {
                        kind.eval(t, p.tau, omega)
                    };
            }
        }
    }
    let n = samples.draws.len() as f64;
    acc.iter_mut().for_each(|v| *v /= n);
    acc
}

/// Peaks of the single draw with the highest log posterior (earliest on ties).
pub fn hp_peaks(samples: &PosteriorSamples, calib: &Calibration) -> Result<PeakReport> {
    let mut best: Option<&crate::sampler::Draw> = None;
    for d in &samples.draws {
        if best.is_none_or(|b| d.log_posterior > b.log_posterior) {
            best = Some(d);
        }
    }
    let best = best.ok_or_else(|| Error::invalid("no stored draws"))?;
    let mut peaks: Vec<ReportedPeak> = best
        .state
        .peaks
        .iter()
        .map(|p| ReportedPeak {
            tau: p.tau,
            mz: to_mz(calib, p.tau),
            eta: Some(p.eta),
            rho: Some(p.rho),
        })
        .collect();
    peaks.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    Ok(PeakReport {
        method: PeakMethod::Hp,
        peaks,
        source: format!("iteration {}", best.iteration),
    })
}

/// Locations where the averaged derivative crosses zero from above,
/// refined by linear interpolation between the bracketing grid points.
pub fn down_crossings(grid: &[f64], d: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut last_pos: Option<usize> = None;
    for i in 0..d.len() {
        if d[i] > 0.0 {
            last_pos = Some(i);
        } else if d[i] < 0.0 {
            if let Some(p) = last_pos.take() {
                let w = d[p] / (d[p] - d[i]);
                out.push(grid[p] + w * (grid[i] - grid[p]));
            }
        }
    }
    out
}

pub fn ma_peaks(
    samples: &PosteriorSamples,
    grid: &[f64],
    kind: KernelKind,
    calib: &Calibration,
) -> PeakReport {
    let mut d = posterior_mean_curve(samples, grid, kind, true);
    // The background switches on at ξ_a; that step is not a peak.
    for (v, &t) in d.iter_mut().zip(grid) {
        if t <= samples.xi_a {
            *v = 0.0;
        }
    }
    let peaks = down_crossings(grid, &d)
        .into_iter()
        .map(|t| ReportedPeak {
            tau: t,
            mz: to_mz(calib, t),
            eta: None,
            rho: None,
        })
        .collect();
    PeakReport {
        method: PeakMethod::Ma,
        peaks,
        source: format!("{} draws", samples.draws.len()),
    }
}

/// Keeps peaks with resolution at least `rho_min`.
pub fn filter_by_resolution(report: &PeakReport, rho_min: f64) -> Result<PeakReport> {
    if report.method == PeakMethod::Ma {
        return Err(Error::invalid(
            "model-averaged peaks carry no resolution; filter the HP report instead",
        ));
    }
    Ok(PeakReport {
        method: report.method,
        peaks: report
            .peaks
            .iter()
            .filter(|p| p.rho.is_some_and(|r| r >= rho_min))
            .copied()
            .collect(),
        source: report.source.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub tpr: f64,
    pub fdr: f64,
    /// Each true mass with the nearest identified mass inside its window.
    pub matches: Vec<(f64, Option<f64>)>,
    pub n_identified: usize,
}

/// Window-membership matching: a true mass is found if any identified mass
/// lies within `±tol·mass`; an identified mass inside no window is false.
pub fn match_peaks(identified: &PeakReport, truth: &[f64], tol: f64) -> Result<MatchResult> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive (got {tol})")));
    }
    let ids: Vec<f64> = identified.peaks.iter().map(|p| p.mz).collect();
    let within = |m: f64, x: f64| (x - m).abs() <= tol * m;
    let matches: Vec<(f64, Option<f64>)> = truth
        .iter()
        .map(|&m| {
            let best = ids
                .iter()
                .copied()
                .filter(|&x| within(m, x))
                .min_by(|a, b| (a - m).abs().total_cmp(&(b - m).abs()));
            (m, best)
        })
        .collect();
    let found = matches.iter().filter(|m| m.1.is_some()).count();
    let false_pos = ids
        .iter()
        .filter(|&&x| !truth.iter().any(|&m| within(m, x)))
        .count();
    Ok(MatchResult {
        tpr: if truth.is_empty() {
            0.0
        } else {
            found as f64 / truth.len() as f64
        },
        fdr: if ids.is_empty() {
            0.0
        } else {
            false_pos as f64 / ids.len() as f64
        },
        matches,
        n_identified: ids.len(),
    })
}

const REPORT_COLUMNS: &str = "method,tau_us,mz_da,eta,rho";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

impl PeakReport {
    pub fn to_text(&self, header: &str) -> String {
        let mut out = String::new();
        for line in header.lines() {
            let _ = writeln!(out, "# {line}");
        }
        let _ = writeln!(out, "# source = {}", self.source);
        let _ = writeln!(out, "{REPORT_COLUMNS}");
        for p in &self.peaks {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                self.method,
                p.tau,
                p.mz,
                opt(p.eta),
                opt(p.rho)
            );
        }
        out
    }

    pub fn write(&self, path: &Path, header: &str) -> Result<()> {
        fs::write(path, self.to_text(header)).map_err(|e| Error::io(path, e))
    }

    pub fn parse(text: &str, default_method: PeakMethod) -> Result<Self> {
        let mut method = None;
        let mut source = String::new();
        let mut peaks = Vec::new();
        let mut seen_header = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if let Some(c) = line.strip_prefix('#') {
                if let Some(v) = c.trim().strip_prefix("source =") {
                    source = v.trim().to_string();
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            if !seen_header {
                if line != REPORT_COLUMNS {
                    return Err(Error::Schema(format!(
                        "line {}: expected peak report header `{REPORT_COLUMNS}`",
                        idx + 1
                    )));
                }
                seen_header = true;
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 5 {
                return Err(Error::Schema(format!("line {}: expected 5 fields", idx + 1)));
            }
            let m: PeakMethod = f[0].parse()?;
            if method.is_some_and(|x| x != m) {
                return Err(Error::Schema(format!("line {}: mixed methods in one report", idx + 1)));
            }
            method = Some(m);
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Schema(format!("line {}: `{s}` is not a number", idx + 1)))
            };
            let optnum = |s: &str| if s == "NA" { Ok(None) } else { num(s).map(Some) };
            peaks.push(ReportedPeak {
                tau: num(f[1])?,
                mz: num(f[2])?,
                eta: optnum(f[3])?,
                rho: optnum(f[4])?,
            });
        }
        if !seen_header {
            return Err(Error::Schema("peak report has no header line".into()));
        }
        Ok(Self {
            method: method.unwrap_or(default_method),
            peaks,
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, PeakMethod::Hp)
    }
}

impl MatchResult {
    pub fn to_config(&self, tol: f64) -> KeyValueFile {
        let mut kv = KeyValueFile::new();
        kv.push("tpr", self.tpr, None);
        kv.push("fdr", self.fdr, None);
        kv.push("tol", tol, None);
        kv.push("n_true", self.matches.len(), None);
        kv.push("n_identified", self.n_identified, None);
        for (m, id) in &self.matches {
            kv.push("match", format!("{m} {}", opt(*id)), None);
        }
        kv
    }
}
