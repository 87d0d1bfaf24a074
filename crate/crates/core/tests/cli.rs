use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lark::config::KeyValueFile;
use lark::model::{BackgroundParams, KernelKind};
use lark::simulate::{NoiseModel, PeakLocation, TofGrid, TruePeak, TruthRecord, TruthSpec};
use lark::spectrum::Calibration;

fn lark(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lark")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = lark(args);
    assert!(
        out.status.success(),
        "lark {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_truth(dir: &Path) -> PathBuf {
    let truth = TruthSpec {
        peaks: [30.0, 42.0, 55.0]
            .iter()
            .map(|&t| TruePeak {
                location: PeakLocation::Tof(t),
                rho: 300.0,
                eta: 1.5,
            })
            .collect(),
        background: Some(BackgroundParams {
            omega0: 10.0,
            eta0: 5.0,
        }),
        s: 0.1,
        gamma: 100.0,
        noise: NoiseModel::Gaussian { sigma: 1.0 },
        grid: TofGrid {
            lo: 20.0,
            hi: 70.0,
            step: 0.05,
        },
        n_replicates: 3,
        calib: Calibration::new(5.0, 0.0).unwrap(),
    };
    let rec = TruthRecord {
        truth,
        kernel: KernelKind::Gaussian,
        seed: 11,
        n_floored: 0,
        n_values: 0,
    };
    let p = dir.join("truth_in.txt");
    rec.write(&p, "test truth").unwrap();
    p
}

fn write_base(dir: &Path) -> PathBuf {
    let p = dir.join("base.txt");
    fs::write(&p, "nu_J = 3\nmu_R = 300\ncalib_u = 5\ncalib_t0 = 0\nphi_block_width = 5\n").unwrap();
    p
}

/// simulate -> elicit -> fit into `dir`, returning the fit directory.
fn pipeline(dir: &Path, seed: &str, fit_name: &str) -> PathBuf {
    let truth = write_truth(dir);
    let sim = dir.join("sim");
    if !sim.exists() {
        ok(&["simulate", "--config", s(&truth), "--out", s(&sim)]);
    }
    let cfg = dir.join("elicited.txt");
    ok(&[
        "elicit",
        "--spectrum",
        s(&sim.join("mean.csv")),
        "--config",
        s(&write_base(dir)),
        "--out",
        s(&cfg),
    ]);
    let fit = dir.join(fit_name);
    ok(&[
        "fit",
        "--spectrum",
        s(&sim.join("mean.csv")),
        "--config",
        s(&cfg),
        "--kernel",
        "gaussian",
        "--likelihood",
        "normal",
        "--iterations",
        "4000",
        "--thin",
        "4",
        "--seed",
        seed,
        "--out",
        s(&fit),
    ]);
    fit
}

fn dir_contents(d: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(d)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn simulate_is_deterministic_and_writes_replicates() {
    let t = tempfile::tempdir().unwrap();
    let truth = write_truth(t.path());
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    ok(&["simulate", "--config", s(&truth), "--out", s(&a)]);
    ok(&["simulate", "--config", s(&truth), "--out", s(&b)]);
    let ca = dir_contents(&a);
    assert_eq!(ca, dir_contents(&b));
    let names: Vec<_> = ca.iter().map(|c| c.0.as_str()).collect();
    assert_eq!(
        names,
        ["mean.csv", "replicate_000.csv", "replicate_001.csv", "replicate_002.csv", "truth.txt"]
    );

    let c = t.path().join("c");
    ok(&["simulate", "--config", s(&truth), "--seed", "12", "--out", s(&c)]);
    assert_ne!(fs::read(a.join("mean.csv")).unwrap(), fs::read(c.join("mean.csv")).unwrap());
}

#[test]
fn elicit_records_provenance_and_is_reproducible() {
    let t = tempfile::tempdir().unwrap();
    let truth = write_truth(t.path());
    let sim = t.path().join("sim");
    ok(&["simulate", "--config", s(&truth), "--out", s(&sim)]);
    let base = write_base(t.path());
    let spec = sim.join("mean.csv");
    let (a, b) = (t.path().join("a.txt"), t.path().join("b.txt"));
    for out in [&a, &b] {
        ok(&["elicit", "--spectrum", s(&spec), "--config", s(&base), "--out", s(out)]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let kv = KeyValueFile::read(&a).unwrap();
    assert_eq!(kv.get_f64("a_phi").unwrap(), Some(0.25));
    assert_eq!(kv.get_f64("calib_u").unwrap(), Some(5.0));
    let text = fs::read_to_string(&a).unwrap();
    assert!(text.starts_with("# lark "));
    assert!(text.contains("spectrum sha256 = "));
}

#[test]
fn elicit_reproduces_simulation_table_abundance_prior() {
    let t = tempfile::tempdir().unwrap();
    let truth = write_truth(t.path());
    let sim = t.path().join("sim");
    ok(&["simulate", "--config", s(&truth), "--out", s(&sim)]);
    let base = t.path().join("base.txt");
    fs::write(
        &base,
        "nu_J = 150\nmu_R = 300\nT0 = 13.47\nT1 = 82.78\ncalib_u = 5\nphi_block_width = 5\nnoise_region = 65,70\nomega0_hat = 10\nlambda0 = 0.05\n",
    )
    .unwrap();
    let out = t.path().join("e.txt");
    ok(&["elicit", "--spectrum", s(&sim.join("mean.csv")), "--config", s(&base), "--out", s(&out)]);
    let kv = KeyValueFile::read(&out).unwrap();
    let eps = kv.get_f64("eps").unwrap().unwrap();
    let lambda = kv.get_f64("lambda").unwrap().unwrap();
    assert_eq!((eps * 100.0).round() / 100.0, 0.03);
    assert_eq!((lambda * 100.0).round() / 100.0, 0.65);
}

#[test]
fn missing_mu_r_is_a_config_error() {
    let t = tempfile::tempdir().unwrap();
    let truth = write_truth(t.path());
    let sim = t.path().join("sim");
    ok(&["simulate", "--config", s(&truth), "--out", s(&sim)]);
    let base = t.path().join("base.txt");
    fs::write(&base, "nu_J = 3\n").unwrap();
    let out = lark(&[
        "elicit",
        "--spectrum",
        s(&sim.join("mean.csv")),
        "--config",
        s(&base),
        "--out",
        s(&t.path().join("e.txt")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error=config "));
}

#[test]
fn fit_is_deterministic_and_evaluate_is_monotone_in_tolerance() {
    let t = tempfile::tempdir().unwrap();
    let a = pipeline(t.path(), "3", "fit_a");
    let b = pipeline(t.path(), "3", "fit_b");
    let ca = dir_contents(&a);
    assert_eq!(ca, dir_contents(&b));
    assert!(ca.iter().all(|c| c.0 != "FAILED"));

    let summary = fs::read_to_string(a.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "quantity,mean,sd");
    let names: Vec<&str> = rows[1..].iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(names, ["s", "phi", "R", "eta0", "omega0", "J_PM", "J_HP", "J_DV"]);

    let truth = t.path().join("sim").join("truth.txt");
    let mut last = (0.0, 0usize);
    for tol in ["0.0005", "0.003", "0.02"] {
        let out = ok(&["evaluate", s(&a.join("peaks_hp.csv")), s(&truth), "--tol", tol]);
        let kv = KeyValueFile::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
        let tpr = kv.get_f64("tpr").unwrap().unwrap();
        let matched = kv.get_all("match").filter(|m| !m.ends_with("NA")).count();
        assert!(tpr >= last.0 && matched >= last.1, "tol {tol}: {tpr} {matched}");
        last = (tpr, matched);
    }
    assert_eq!(last.0, 1.0, "three well separated peaks should all be found");
}

#[test]
fn evaluate_reports_missing_truth_as_io_error() {
    let t = tempfile::tempdir().unwrap();
    let report = t.path().join("r.csv");
    fs::write(&report, "method,tau_us,mz_da,eta,rho\n").unwrap();
    let out = lark(&["evaluate", s(&report), s(&t.path().join("nope.txt"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error=io "), "{err}");
}

#[test]
fn evaluate_rejects_non_positive_tolerance() {
    let t = tempfile::tempdir().unwrap();
    let report = t.path().join("r.csv");
    fs::write(&report, "method,tau_us,mz_da,eta,rho\n").unwrap();
    let truth = t.path().join("m.txt");
    fs::write(&truth, "mass = 2000\n").unwrap();
    let out = lark(&["evaluate", s(&report), s(&truth), "--tol", "0"]);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error=invalid-input "));
}
