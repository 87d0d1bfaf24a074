//! Deterministic halves of the split and merge moves.
//!
//! A parent `(τ, ρ, η)` and auxiliaries `(u1, u2, u3)` map to two children:
//! `Δ = u2·c·τ`, `τ1 = τ - (1-u1)Δ`, `τ2 = τ + u1Δ`, `η1 = u1η`,
//! `η2 = (1-u1)η`, `ln ρ1 = ln ρ - (1-u1)u3`, `ln ρ2 = ln ρ + u1u3`.
//! Merging inverts this exactly: abundances add, the location is the
//! abundance-weighted mean and `ln ρ` the abundance-weighted log mean.

use crate::model::PeakParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitAux {
    /// Abundance share of the left child, in (0, 1).
    pub u1: f64,
    /// Separation as a fraction of the merge radius, in (0, 1).
    pub u2: f64,
    /// Log-resolution spread.
    pub u3: f64,
}

pub fn split_peak(p: &PeakParams, aux: SplitAux, c: f64) -> (PeakParams, PeakParams) {
    let SplitAux { u1, u2, u3 } = aux;
    let delta = u2 * c * p.tau;
    let ln_rho = p.rho.ln();
    let left = PeakParams::new(
        p.tau - (1.0 - u1) * delta,
        (ln_rho - (1.0 - u1) * u3).exp(),
        u1 * p.eta,
    );
    let right = PeakParams::new(
        p.tau + u1 * delta,
        (ln_rho + u1 * u3).exp(),
        (1.0 - u1) * p.eta,
    );
    (left, right)
}

/// Merges two peaks; returns the parent and the auxiliaries that split it
/// back into the same pair.
pub fn merge_peaks(a: &PeakParams, b: &PeakParams, c: f64) -> (PeakParams, SplitAux) {
    let (l, r) = if a.tau <= b.tau { (a, b) } else { (b, a) };
    let eta = l.eta + r.eta;
    let u1 = l.eta / eta;
    let tau = u1 * l.tau + (1.0 - u1) * r.tau;
    let (ln_l, ln_r) = (l.rho.ln(), r.rho.ln());
    let ln_rho = u1 * ln_l + (1.0 - u1) * ln_r;
    let parent = PeakParams::new(tau, ln_rho.exp(), eta);
    let aux = SplitAux {
        u1,
        u2: (r.tau - l.tau) / (c * tau),
        u3: ln_r - ln_l,
    };
    (parent, aux)
}

/// `ln |∂(children)/∂(parent, u)|` in `(τ, ρ, η)` coordinates:
/// `η · cτ · ρ1ρ2/ρ`.
pub fn split_log_jacobian(parent: &PeakParams, left: &PeakParams, right: &PeakParams, c: f64) -> f64 {
    parent.eta.ln() + (c * parent.tau).ln() + left.rho.ln() + right.rho.ln() - parent.rho.ln()
}

/// Whether a pair lies within the merge radius `c·τ*` of its merged location.
pub fn mergeable(a: &PeakParams, b: &PeakParams, c: f64) -> bool {
    let tau_star = (a.eta * a.tau + b.eta * b.tau) / (a.eta + b.eta);
    (a.tau - b.tau).abs() < c * tau_star
}

/// All mergeable index pairs `(i, j)` with `i < j`, in a fixed order.
pub fn mergeable_pairs(peaks: &[PeakParams], c: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    scan_pairs(peaks, c, |i, j| out.push((i.min(j), i.max(j))));
    out
}

pub fn count_mergeable(peaks: &[PeakParams], c: f64) -> usize {
    let mut n = 0;
    scan_pairs(peaks, c, |_, _| n += 1);
    n
}

fn scan_pairs(peaks: &[PeakParams], c: f64, mut visit: impl FnMut(usize, usize)) {
    let mut order: Vec<usize> = (0..peaks.len()).collect();
    order.sort_by(|&i, &j| peaks[i].tau.total_cmp(&peaks[j].tau).then(i.cmp(&j)));
    for (k, &i) in order.iter().enumerate() {
        let a = &peaks[i];
        for &j in &order[k + 1..] {
            let b = &peaks[j];
            // τ* ≤ τ_b, so once the gap reaches c·τ_b no later peak can
            // qualify (the gap grows faster than c·τ_b when c < 1).
            if c < 1.0 && b.tau - a.tau >= c * b.tau {
                break;
            }
            if mergeable(a, b, c) {
                visit(i, j);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn merge_restores_split_parent() {
        let p = PeakParams::new(120.0, 250.0, 3.5);
        let aux = SplitAux {
            u1: 0.3,
            u2: 0.7,
            u3: -0.2,
        };
        let c = 2.0 / 200.0;
        let (l, r) = split_peak(&p, aux, c);
        assert!(l.tau < r.tau);
        let (back, aux2) = merge_peaks(&r, &l, c);
        assert!((back.eta - p.eta).abs() <= 1e-12 * p.eta);
        assert!((back.tau - p.tau).abs() <= 1e-12 * p.tau);
        assert!((back.rho - p.rho).abs() <= 1e-12 * p.rho);
        assert!((aux2.u1 - aux.u1).abs() < 1e-12);
        assert!((aux2.u2 - aux.u2).abs() < 1e-12);
        assert!((aux2.u3 - aux.u3).abs() < 1e-12);
        assert!(mergeable(&l, &r, c));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        // Oracle: numerical determinant of the 6x6 map in (τ, ρ, η, u1, u2, u3).
        let c = 0.01;
        let x0: [f64; 6] = [80.0, 150.0, 2.0, 0.4, 0.6, 0.3];
        let map = |x: &[f64; 6]| {
            let (l, r) = split_peak(
                &PeakParams::new(x[0], x[1], x[2]),
                SplitAux {
                    u1: x[3],
                    u2: x[4],
                    u3: x[5],
                },
                c,
            );
            [l.tau, l.rho, l.eta, r.tau, r.rho, r.eta]
        };
        let mut m = [[0.0f64; 6]; 6];
        for j in 0..6 {
            let h = 1e-6 * x0[j].abs().max(1e-3);
            let (mut xp, mut xm) = (x0, x0);
            xp[j] += h;
            xm[j] -= h;
            let (fp, fm) = (map(&xp), map(&xm));
            for i in 0..6 {
                m[i][j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let det = determinant(m);
        let p = PeakParams::new(x0[0], x0[1], x0[2]);
        let (l, r) = split_peak(
            &p,
            SplitAux {
                u1: x0[3],
                u2: x0[4],
                u3: x0[5],
            },
            c,
        );
        let analytic = split_log_jacobian(&p, &l, &r, c).exp();
        assert!((det.abs() / analytic - 1.0).abs() < 1e-6, "{det} vs {analytic}");
    }

    fn determinant(mut m: [[f64; 6]; 6]) -> f64 {
        let mut det = 1.0;
        for k in 0..6 {
            let piv = (k..6).max_by(|&a, &b| m[a][k].abs().total_cmp(&m[b][k].abs())).unwrap();
            if piv != k {
                m.swap(piv, k);
                det = -det;
            }
            det *= m[k][k];
            for i in k + 1..6 {
                let f = m[i][k] / m[k][k];
                for j in k..6 {
                    m[i][j] -= f * m[k][j];
                }
            }
        }
        det
    }

    #[test]
    fn pair_scan_matches_brute_force() {
        let peaks: Vec<PeakParams> = (0..40)
            .map(|i| {
                let t = 50.0 + ((i * 37) % 40) as f64 * 0.37;
                PeakParams::new(t, 100.0, 1.0 + (i % 5) as f64)
            })
            .collect();
        let c = 0.02;
        let mut brute = vec![];
        for i in 0..peaks.len() {
            for j in i + 1..peaks.len() {
                if mergeable(&peaks[i], &peaks[j], c) {
                    brute.push((i, j));
                }
            }
        }
        let mut fast = mergeable_pairs(&peaks, c);
        fast.sort();
        assert_eq!(fast, brute);
        assert_eq!(count_mergeable(&peaks, c), brute.len());
    }

    proptest! {
        #[test]
        fn split_conserves_abundance_and_inverts(
            tau in 5.0f64..300.0, rho in 10.0f64..1000.0, eta in 0.1f64..100.0,
            u1 in 0.01f64..0.99, u2 in 0.01f64..0.99, u3 in -1.0f64..1.0,
        ) {
            let c = 2.0 / 300.0;
            let p = PeakParams::new(tau, rho, eta);
            let (l, r) = split_peak(&p, SplitAux { u1, u2, u3 }, c);
            prop_assert!(((l.eta + r.eta) - eta).abs() <= 1e-12 * eta);
            prop_assert!(mergeable(&l, &r, c));
            let (back, _) = merge_peaks(&l, &r, c);
            prop_assert!((back.tau - tau).abs() <= 1e-12 * tau);
            prop_assert!((back.rho - rho).abs() <= 1e-12 * rho);
        }
    }
}
