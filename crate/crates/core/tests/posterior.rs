use lark::cli::elicit_config;
use lark::config::KeyValueFile;
use lark::model::{fwhm, width_from_resolution, KernelKind, LikelihoodKind};
use lark::priors::Hyperparameters;
use lark::sampler::{run_chain, ChainConfig};
use lark::simulate::{
    generate_spectrum, NoiseModel, PeakLocation, TofGrid, TruePeak, TruthSpec,
};
use lark::spectrum::{Calibration, Spectrum};

fn truth(peaks: Vec<TruePeak>, s: f64, phi: f64) -> TruthSpec {
    TruthSpec {
        peaks,
        background: None,
        s,
        gamma: 100.0,
        noise: NoiseModel::Gamma { phi },
        grid: TofGrid {
            lo: 40.0,
            hi: 80.0,
            step: 0.02,
        },
        n_replicates: 1,
        calib: Calibration::new(5.0, 0.0).unwrap(),
    }
}

fn setup(t: &TruthSpec, seed: u64, extra: &str) -> (Spectrum, Hyperparameters) {
    let sim = generate_spectrum(t, KernelKind::Gaussian, seed).unwrap();
    let spec = sim.replicates[0].clone();
    let base = KeyValueFile::parse(&format!(
        "nu_J = 1\nmu_R = 300\ncalib_u = 5\nphi_block_width = 4\nomega0_hat = 5\nlambda0 = 0.05\n{extra}"
    ))
    .unwrap();
    let kv = elicit_config(&spec, &base, None).unwrap();
    (spec, Hyperparameters::from_config(&kv).unwrap())
}

#[test]
fn sharp_peak_location_is_pinned_within_half_width() {
    let (tau, rho) = (55.0, 300.0);
    let t = truth(
        vec![TruePeak {
            location: PeakLocation::Tof(tau),
            rho,
            eta: 1.0,
        }],
        0.5,
        50.0,
    );
    let (spec, h) = setup(&t, 4, "");
    let cfg = ChainConfig {
        n_iter: 20_000,
        n_burn: 10_000,
        thin: 5,
        seed: 9,
        ..Default::default()
    };
    let out = run_chain(&spec, &h, KernelKind::Gaussian, LikelihoodKind::GammaObs, &cfg).unwrap();
    let half = 0.5 * fwhm(KernelKind::Gaussian, width_from_resolution(KernelKind::Gaussian, tau, rho).unwrap()).unwrap();

    let nearest: Vec<f64> = out
        .draws
        .iter()
        .filter_map(|d| {
            d.state
                .peaks
                .iter()
                .map(|p| p.tau)
                .min_by(|a, b| (a - tau).abs().total_cmp(&(b - tau).abs()))
        })
        .collect();
    assert!(nearest.len() as f64 > 0.95 * out.draws.len() as f64);
    let covered = nearest.iter().filter(|x| (*x - tau).abs() <= half).count();
    assert!(covered as f64 > 0.95 * nearest.len() as f64, "{covered} of {}", nearest.len());
    let mean = nearest.iter().sum::<f64>() / nearest.len() as f64;
    assert!((mean - tau).abs() < 0.2 * half, "mean tau {mean}");
}

#[test]
fn gamma_precision_is_recovered_on_flat_data() {
    let phi = 40.0;
    let t = truth(vec![], 0.3, phi);
    let (spec, h) = setup(&t, 5, "a_s = 3\nb_s = 7\n");
    let cfg = ChainConfig {
        n_iter: 20_000,
        n_burn: 10_000,
        thin: 5,
        seed: 3,
        ..Default::default()
    };
    let out = run_chain(&spec, &h, KernelKind::Gaussian, LikelihoodKind::GammaObs, &cfg).unwrap();
    let m = out.draws.iter().map(|d| d.state.phi).sum::<f64>() / out.draws.len() as f64;
    assert!((m / phi - 1.0).abs() < 0.10, "posterior mean phi {m}");
}
