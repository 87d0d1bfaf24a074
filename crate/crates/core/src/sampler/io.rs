//! Samples file: one row per stored draw,
//! `iteration,log_posterior,J,s,phi,R,omega0,eta0` followed by J
//! `tau,rho,eta` triplets. γ and ξ_a travel in `# key = value` comments.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Draw, MoveStats, PosteriorSamples};
use crate::error::{Error, Result};
use crate::model::{BackgroundParams, ModelState, PeakParams};

const COLUMNS: &str = "iteration,log_posterior,J,s,phi,R,omega0,eta0,peaks(tau,rho,eta)...";

pub fn samples_to_text(samples: &PosteriorSamples, header: &str) -> String {
    let mut out = String::new();
    for line in header.lines() {
        let _ = writeln!(out, "# {line}");
    }
    let gamma = samples.draws.first().map_or(f64::NAN, |d| d.state.gamma);
    let _ = writeln!(out, "# gamma = {gamma}");
    let _ = writeln!(out, "# xi_a = {}", samples.xi_a);
    let _ = writeln!(out, "{COLUMNS}");
    for d in &samples.draws {
        let st = &d.state;
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{}",
            d.iteration,
            d.log_posterior,
            st.peaks.len(),
            st.s,
            st.phi,
            st.big_r,
            st.bg.omega0,
            st.bg.eta0
        );
        for p in &st.peaks {
            let _ = write!(out, ",{},{},{}", p.tau, p.rho, p.eta);
        }
        out.push('\n');
    }
    out
}

pub fn write_samples(path: &Path, samples: &PosteriorSamples, header: &str) -> Result<()> {
    fs::write(path, samples_to_text(samples, header)).map_err(|e| Error::io(path, e))
}

pub fn read_samples(path: &Path) -> Result<PosteriorSamples> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_samples(&text).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        },
        other => other,
    })
}

pub fn parse_samples(text: &str) -> Result<PosteriorSamples> {
    let perr = |line: usize, message: String| Error::Parse {
        path: Default::default(),
        line,
        message,
    };
    let (mut gamma, mut xi_a) = (None, None);
    let mut draws = Vec::new();
    let mut seen_columns = false;
    for (idx, raw) in text.lines().enumerate() {
        let ln = idx + 1;
        let line = raw.trim();
        if let Some(c) = line.strip_prefix('#') {
            if let Some((k, v)) = c.split_once('=') {
                let v = v.trim().parse::<f64>().ok();
                match k.trim() {
                    "gamma" => gamma = v,
                    "xi_a" => xi_a = v,
                    _ => {}
                }
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        if !seen_columns {
            if line != COLUMNS {
                return Err(perr(ln, format!("expected column header `{COLUMNS}`")));
            }
            seen_columns = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < 8 {
            return Err(perr(ln, format!("expected at least 8 fields, got {}", f.len())));
        }
        let num = |i: usize| {
            f[i].trim()
                .parse::<f64>()
                .map_err(|_| perr(ln, format!("field {} is not a number: `{}`", i + 1, f[i])))
        };
        let iteration = f[0]
            .trim()
            .parse::<usize>()
            .map_err(|_| perr(ln, format!("bad iteration `{}`", f[0])))?;
        let j = f[2]
            .trim()
            .parse::<usize>()
            .map_err(|_| perr(ln, format!("bad peak count `{}`", f[2])))?;
        if f.len() != 8 + 3 * j {
            return Err(perr(ln, format!("J = {j} needs {} fields, got {}", 8 + 3 * j, f.len())));
        }
        let mut peaks = Vec::with_capacity(j);
        for k in 0..j {
            let b = 8 + 3 * k;
            peaks.push(PeakParams::new(num(b)?, num(b + 1)?, num(b + 2)?));
        }
        let gamma = gamma.ok_or_else(|| perr(ln, "missing `# gamma = ...` line".into()))?;
        draws.push(Draw {
            iteration,
            log_posterior: num(1)?,
            state: ModelState {
                gamma,
                s: num(3)?,
                phi: num(4)?,
                big_r: num(5)?,
                bg: BackgroundParams {
                    omega0: num(6)?,
                    eta0: num(7)?,
                },
                peaks,
            },
        });
    }
    if !seen_columns {
        return Err(Error::Schema("samples file has no column header".into()));
    }
    Ok(PosteriorSamples {
        draws,
        move_stats: MoveStats::default(),
        xi_a: xi_a.ok_or_else(|| Error::Schema("samples file lacks `# xi_a = ...`".into()))?,
    })
}
