//! Spectra on a time-of-flight grid: loading, standardization, replicate
//! averaging, windowing and TOF / m/z calibration.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// A raw detector trace as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSpectrum {
    /// Time of flight in µs, strictly increasing.
    pub tof: Vec<f64>,
    /// Detector counts summed over `n_shots` laser shots.
    pub counts: Vec<f64>,
    pub n_shots: u32,
}

impl RawSpectrum {
    pub fn new(tof: Vec<f64>, counts: Vec<f64>, n_shots: u32) -> Result<Self> {
        if n_shots == 0 {
            return Err(Error::invalid("number of laser shots must be at least 1"));
        }
        check_grid(&tof)?;
        if tof.len() != counts.len() {
            return Err(Error::invalid("TOF and intensity columns differ in length"));
        }
        if counts.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite intensity"));
        }
        Ok(Self {
            tof,
            counts,
            n_shots,
        })
    }

    pub fn len(&self) -> usize {
        self.tof.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tof.is_empty()
    }
}

/// An intensity trace on a TOF grid restricted to `[range.0, range.1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub tof: Vec<f64>,
    pub intensity: Vec<f64>,
    pub range: (f64, f64),
}

impl Spectrum {
    /// Builds a spectrum whose range is the span of its grid.
    pub fn new(tof: Vec<f64>, intensity: Vec<f64>) -> Result<Self> {
        check_grid(&tof)?;
        if tof.len() != intensity.len() {
            return Err(Error::invalid("TOF and intensity columns differ in length"));
        }
        if intensity.iter().any(|y| !y.is_finite()) {
            return Err(Error::invalid("non-finite intensity"));
        }
        let range = (tof[0], tof[tof.len() - 1]);
        Ok(Self {
            tof,
            intensity,
            range,
        })
    }

    pub fn len(&self) -> usize {
        self.tof.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tof.is_empty()
    }

    /// Overall mean intensity Ȳ.
    pub fn mean_intensity(&self) -> f64 {
        self.intensity.iter().sum::<f64>() / self.intensity.len() as f64
    }

    /// Mean intensity over samples with `lo <= t <= hi`, or `None` if the
    /// interval holds no samples.
    pub fn mean_over(&self, lo: f64, hi: f64) -> Option<f64> {
        let (sum, n) = self
            .tof
            .iter()
            .zip(&self.intensity)
            .filter(|(t, _)| **t >= lo && **t <= hi)
            .fold((0.0, 0usize), |(s, n), (_, y)| (s + y, n + 1));
        (n > 0).then(|| sum / n as f64)
    }

    /// Median spacing of the TOF grid.
    pub fn median_step(&self) -> f64 {
        let mut d: Vec<f64> = self.tof.windows(2).map(|w| w[1] - w[0]).collect();
        d.sort_by(f64::total_cmp);
        d[d.len() / 2]
    }

    /// Two-column `tof,intensity` text with an optional leading comment block.
    pub fn to_text(&self, header_comment: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(c) = header_comment {
            for line in c.lines() {
                let _ = writeln!(out, "# {line}");
            }
        }
        out.push_str("tof,intensity\n");
        for (t, y) in self.tof.iter().zip(&self.intensity) {
            let _ = writeln!(out, "{t},{y}");
        }
        out
    }

    pub fn write(&self, path: &Path, header_comment: Option<&str>) -> Result<()> {
        fs::write(path, self.to_text(header_comment)).map_err(|e| Error::io(path, e))
    }
}

/// Quadratic TOF to m/z map `m/z = u (t - t0)^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    /// Da/e per µs².
    pub u: f64,
    /// Latency offset in µs.
    pub t0: f64,
}

impl Calibration {
    pub fn new(u: f64, t0: f64) -> Result<Self> {
        if !(u > 0.0 && u.is_finite() && t0.is_finite()) {
            return Err(Error::invalid(format!(
                "calibration requires u > 0 and finite t0 (got u={u}, t0={t0})"
            )));
        }
        Ok(Self { u, t0 })
    }

    pub fn tof_to_mz(&self, t: f64) -> Result<f64> {
        if !(t > self.t0) {
            return Err(Error::invalid(format!(
                "TOF {t} is not past the calibration offset {}",
                self.t0
            )));
        }
        let dt = t - self.t0;
        Ok(self.u * dt * dt)
    }

    pub fn mz_to_tof(&self, mz: f64) -> Result<f64> {
        if !(mz > 0.0) {
            return Err(Error::invalid(format!("m/z must be positive (got {mz})")));
        }
        Ok(self.t0 + (mz / self.u).sqrt())
    }
}

/// Which columns of a delimited file hold TOF and intensity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnSpec {
    pub tof: usize,
    pub intensity: usize,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self {
            tof: 0,
            intensity: 1,
        }
    }
}

/// Reads a comma- or whitespace-delimited spectrum. Lines starting with `#`
/// are comments; a single non-numeric first data line is taken as a header.
pub fn load_spectrum(path: &Path, columns: ColumnSpec, n_shots: u32) -> Result<RawSpectrum> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_spectrum(&text, columns, n_shots).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        },
        other => other,
    })
}

pub(crate) fn split_fields(line: &str) -> Vec<&str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect()
}

pub fn parse_spectrum(text: &str, columns: ColumnSpec, n_shots: u32) -> Result<RawSpectrum> {
    let mut tof = Vec::new();
    let mut counts = Vec::new();
    let mut seen_data_line = false;
    let need = columns.tof.max(columns.intensity) + 1;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields = split_fields(line);
        let parse_err = |message: String| Error::Parse {
            path: Default::default(),
            line: idx + 1,
            message,
        };
        if fields.len() < need {
            return Err(parse_err(format!("expected at least {need} columns")));
        }
        let t = fields[columns.tof].parse::<f64>();
        let y = fields[columns.intensity].parse::<f64>();
        match (t, y) {
            (Ok(t), Ok(y)) => {
                if !t.is_finite() || !y.is_finite() {
                    return Err(parse_err("non-finite value".into()));
                }
                if let Some(&prev) = tof.last() {
                    if t <= prev {
                        return Err(parse_err(format!(
                            "TOF column is not strictly increasing ({t} after {prev})"
                        )));
                    }
                }
                tof.push(t);
                counts.push(y);
            }
            _ if !seen_data_line => {}
            _ => return Err(parse_err(format!("non-numeric field in `{line}`"))),
        }
        seen_data_line = true;
    }
    if tof.len() < 2 {
        return Err(Error::invalid("a spectrum needs at least 2 samples"));
    }
    RawSpectrum::new(tof, counts, n_shots)
}

/// `y = (y_obs - min y_obs) / l`.
pub fn standardize(raw: &RawSpectrum) -> Result<Spectrum> {
    if raw.n_shots == 0 {
        return Err(Error::invalid("number of laser shots must be positive"));
    }
    if raw.is_empty() {
        return Err(Error::invalid("empty spectrum"));
    }
    let min = raw.counts.iter().copied().fold(f64::INFINITY, f64::min);
    let l = raw.n_shots as f64;
    let y = raw.counts.iter().map(|c| (c - min) / l).collect();
    Spectrum::new(raw.tof.clone(), y)
}

/// Pointwise mean of spectra sharing one TOF grid.
pub fn mean_spectrum(spectra: &[Spectrum]) -> Result<Spectrum> {
    let first = spectra
        .first()
        .ok_or_else(|| Error::invalid("no spectra to average"))?;
    for s in &spectra[1..] {
        if s.tof != first.tof {
            return Err(Error::invalid("spectra do not share an identical TOF grid"));
        }
    }
    let n = spectra.len() as f64;
    let intensity = (0..first.len())
        .map(|i| spectra.iter().map(|s| s.intensity[i]).sum::<f64>() / n)
        .collect();
    Ok(Spectrum {
        tof: first.tof.clone(),
        intensity,
        range: first.range,
    })
}

pub fn clip_range(s: &Spectrum, lo: f64, hi: f64) -> Result<Spectrum> {
    if !(lo < hi) {
        return Err(Error::invalid(format!("empty clip window [{lo}, {hi}]")));
    }
    let (tof, intensity): (Vec<f64>, Vec<f64>) = s
        .tof
        .iter()
        .zip(&s.intensity)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .map(|(t, y)| (*t, *y))
        .unzip();
    if tof.is_empty() {
        return Err(Error::invalid(format!(
            "no samples inside [{lo}, {hi}] (grid spans [{}, {}])",
            s.tof[0],
            s.tof[s.len() - 1]
        )));
    }
    Ok(Spectrum {
        tof,
        intensity,
        range: (lo, hi),
    })
}

fn check_grid(tof: &[f64]) -> Result<()> {
    if tof.is_empty() {
        return Err(Error::invalid("empty TOF grid"));
    }
    if tof.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("non-finite TOF"));
    }
    if tof.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("TOF grid is not strictly increasing"));
    }
    Ok(())
}
