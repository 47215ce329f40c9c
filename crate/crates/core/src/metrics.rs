//! Autocorrelations and the quality measures built on them.
//!
//! Every max/argmax here breaks ties toward the smallest index.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::seqcore::{ComplexSequence, Fourier, PhaseSequence};

/// Below this length the autocorrelation is summed directly.
const DIRECT_AUTOCORR_MAX_LEN: usize = 64;

/// Largest `d_ca` accepted by [`lobe_ratio`].
pub const LOBE_RATIO_CA_LIMIT: f64 = 1e-3;

/// Distance-to-CAZAC of a sequence: `d = d_ca + d_zac`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscrepancyReport {
    d_ca: f64,
    d_zac: f64,
    degenerate: bool,
}

impl DiscrepancyReport {
    /// `max_k ||x(k)| − 1|`.
    pub fn d_ca(&self) -> f64 {
        self.d_ca
    }

    /// `max_{0<k<n} |R_x(k)|`; zero for `n = 1`.
    pub fn d_zac(&self) -> f64 {
        self.d_zac
    }

    pub fn d(&self) -> f64 {
        self.d_ca + self.d_zac
    }

    /// Set for `n = 1`, where the ZAC maximum ranges over an empty set.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }
}

/// Main-to-largest-sidelobe energy ratio of the aperiodic autocorrelation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LobeRatio {
    pub rho_db: f64,
    pub upper_bound_db: f64,
    pub max_side_lobe_power: f64,
    pub argmax_tau: usize,
}

/// `R_x(k) = Σ_l x(l)·conj(x((l−k) mod n))`.
pub fn circular_autocorr(x: &ComplexSequence) -> ComplexSequence {
    let n = x.len();
    if n <= DIRECT_AUTOCORR_MAX_LEN {
        let v = x.values();
        let r = (0..n)
            .map(|k| (0..n).map(|l| v[l] * v[(l + n - k) % n].conj()).sum())
            .collect();
        return ComplexSequence::from_vec_unchecked(r);
    }
    let fourier = Fourier::new(n);
    let mut buf = x.values().to_vec();
    autocorr_fft_in_place(&fourier, &mut buf);
    ComplexSequence::from_vec_unchecked(buf)
}

/// Overwrites `buf` (holding `x`) with its circular autocorrelation.
///
/// `R = √n · idft(|dft(x)|²)` under the unitary convention.
pub(crate) fn autocorr_fft_in_place(fourier: &Fourier, buf: &mut [Complex64]) {
    fourier.forward_in_place(buf);
    for v in buf.iter_mut() {
        *v = Complex64::new(v.norm_sqr(), 0.0);
    }
    fourier.inverse_in_place(buf);
    let root_n = (buf.len() as f64).sqrt();
    buf.iter_mut().for_each(|v| *v *= root_n);
}

/// Aperiodic autocorrelation for lags `τ = 0..n−1`:
/// `R(τ) = Σ_{k=0}^{n−1−τ} x(k)·conj(x(k+τ))`.
///
/// Negative lags follow from `R(−τ) = conj(R(τ))`.
pub fn noncircular_autocorr(x: &ComplexSequence) -> ComplexSequence {
    let v = x.values();
    let n = v.len();
    let r = (0..n)
        .map(|tau| (0..n - tau).map(|k| v[k] * v[k + tau].conj()).sum())
        .collect();
    ComplexSequence::from_vec_unchecked(r)
}

pub fn discrepancy(x: &ComplexSequence) -> DiscrepancyReport {
    let d_ca = ca_gap(x.values());
    let n = x.len();
    if n == 1 {
        return DiscrepancyReport {
            d_ca,
            d_zac: 0.0,
            degenerate: true,
        };
    }
    let r = circular_autocorr(x);
    DiscrepancyReport {
        d_ca,
        d_zac: max_off_peak(r.values()),
        degenerate: false,
    }
}

/// [`discrepancy`] using preplanned transforms and caller-owned scratch.
pub(crate) fn discrepancy_with(
    fourier: &Fourier,
    x: &[Complex64],
    scratch: &mut Vec<Complex64>,
) -> DiscrepancyReport {
    let d_ca = ca_gap(x);
    if x.len() == 1 {
        return DiscrepancyReport {
            d_ca,
            d_zac: 0.0,
            degenerate: true,
        };
    }
    scratch.clear();
    scratch.extend_from_slice(x);
    autocorr_fft_in_place(fourier, scratch);
    DiscrepancyReport {
        d_ca,
        d_zac: max_off_peak(scratch),
        degenerate: false,
    }
}

fn ca_gap(x: &[Complex64]) -> f64 {
    x.iter().map(|v| (v.norm() - 1.0).abs()).fold(0.0, f64::max)
}

fn max_off_peak(r: &[Complex64]) -> f64 {
    r.iter().skip(1).map(|v| v.norm()).fold(0.0, f64::max)
}

/// `max_{k≠0} |Σ_l e^{i(θ(l) − θ((l−k) mod n))}|`, evaluated in the phase
/// domain. Zero exactly when `e^{iθ}` is ZAC.
pub fn zac_phase_criterion(theta: &PhaseSequence) -> Result<f64> {
    let t = theta.thetas();
    let n = t.len();
    if n < 2 {
        return Err(Error::TooShort { min: 2, got: n });
    }
    let worst = (1..n)
        .map(|k| {
            (0..n)
                .map(|l| Complex64::from_polar(1.0, t[l] - t[(l + n - k) % n]))
                .sum::<Complex64>()
                .norm()
        })
        .fold(0.0, f64::max);
    Ok(worst)
}

/// Largest sidelobe power `max_{0<τ<n} |R^nc(τ)|²` and its lag.
pub fn max_side_lobe(x: &ComplexSequence) -> (f64, usize) {
    let r = noncircular_autocorr(x);
    let mut best = (f64::NEG_INFINITY, 0);
    for (tau, v) in r.iter().enumerate().skip(1) {
        let p = v.norm_sqr();
        if p > best.0 {
            best = (p, tau);
        }
    }
    best
}

/// `ρ_dB = 10·log10(|R^nc(0)|² / max_{0<τ<n} |R^nc(τ)|²)`, using the
/// measured main lobe rather than `n²`.
pub fn lobe_ratio(x: &ComplexSequence) -> Result<LobeRatio> {
    let n = x.len();
    if n < 2 {
        return Err(Error::TooShort { min: 2, got: n });
    }
    let d_ca = ca_gap(x.values());
    if d_ca > LOBE_RATIO_CA_LIMIT {
        return Err(Error::NotConstantAmplitude {
            d_ca,
            limit: LOBE_RATIO_CA_LIMIT,
        });
    }
    let main = x.norm_sqr().powi(2);
    let (side, tau) = max_side_lobe(x);
    Ok(LobeRatio {
        rho_db: 10.0 * (main / side).log10(),
        upper_bound_db: lobe_ratio_upper_bound_db(n),
        max_side_lobe_power: side,
        argmax_tau: tau,
    })
}

/// `10·log10(n²)`: the last lag always carries a unit sidelobe.
pub fn lobe_ratio_upper_bound_db(n: usize) -> f64 {
    10.0 * ((n * n) as f64).log10()
}

/// Max-abs entry of `Ω·Ωᴴ − n·I`, where row `r` of the circulant `Ω` is `x`
/// circularly shifted right by `r`.
pub fn circulant_gram_defect(x: &ComplexSequence) -> f64 {
    let v = x.values();
    let n = v.len();
    let omega = |r: usize, c: usize| v[(c + n - r) % n];
    let mut worst = 0.0f64;
    for r in 0..n {
        for s in 0..n {
            let mut acc: Complex64 = (0..n).map(|c| omega(r, c) * omega(s, c).conj()).sum();
            if r == s {
                acc -= n as f64;
            }
            worst = worst.max(acc.norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqcore::{dft, unit_phases, SRepresentation};
    use std::f64::consts::{PI, TAU};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Triple-loop evaluation of the circular autocorrelation definition.
    fn autocorr_oracle(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len() as isize;
        let mut out = Vec::new();
        for k in 0..n {
            let mut acc = c(0.0, 0.0);
            for l in 0..n {
                let j = (l - k).rem_euclid(n) as usize;
                acc += x[l as usize] * x[j].conj();
            }
            out.push(acc);
        }
        out
    }

    fn seq(pairs: &[(f64, f64)]) -> ComplexSequence {
        ComplexSequence::from_pairs(pairs).unwrap()
    }

    #[test]
    fn circular_autocorr_examples() {
        let r = circular_autocorr(&ComplexSequence::from_reals(&[1.0; 4]).unwrap());
        assert!(r.iter().all(|v| (v - c(4.0, 0.0)).norm() < 1e-15));

        let x = seq(&[(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0)]);
        let r = circular_autocorr(&x);
        let oracle = autocorr_oracle(x.values());
        let want = [c(3.0, 0.0), c(-1.0, 2.0), c(-1.0, -2.0)];
        for i in 0..3 {
            assert!((r[i] - want[i]).norm() < 1e-14);
            assert!((oracle[i] - want[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn popovic_row_two_is_zac() {
        let e = Complex64::from_polar(1.0, PI / 8.0);
        let i = c(0.0, 1.0);
        let one = c(1.0, 0.0);
        let x = ComplexSequence::new(vec![one, e, i, -e, one, -e, i, e]).unwrap();
        let r = circular_autocorr(&x);
        assert!((r[0] - c(8.0, 0.0)).norm() < 1e-12);
        assert!(r.iter().skip(1).all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn fft_path_matches_oracle() {
        let x = unit_phases(&PhaseSequence::new((0..150).map(|k| (k * k) as f64 * 0.37).collect()).unwrap());
        let r = circular_autocorr(&x);
        for (a, b) in r.iter().zip(autocorr_oracle(x.values())) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn noncircular_examples() {
        let r = noncircular_autocorr(&ComplexSequence::from_reals(&[1.0, 1.0, -1.0, 1.0]).unwrap());
        let want = [4.0, -1.0, 0.0, 1.0];
        for (a, b) in r.iter().zip(want) {
            assert!((a - c(b, 0.0)).norm() < 1e-15);
        }
        let r = noncircular_autocorr(&seq(&[(1.0, 0.0), (0.0, 1.0)]));
        assert!((r[0] - c(2.0, 0.0)).norm() < 1e-15);
        assert!((r[1] - c(0.0, -1.0)).norm() < 1e-15);

        let x = unit_phases(&PhaseSequence::new(vec![0.3, 2.0, 5.1, 0.9, 4.4]).unwrap());
        let r = noncircular_autocorr(&x);
        assert!((r[0].re - 5.0).abs() < 1e-14);
        assert!((r[4].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn discrepancy_examples() {
        // a pure tone is CA but has |R(k)| = n at every lag
        let rep = discrepancy(&seq(&[(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)]));
        assert!(rep.d_ca() < 1e-15 && (rep.d_zac() - 4.0).abs() < 1e-14);

        let rep = discrepancy(&ComplexSequence::from_reals(&[2.0, 1.0, 1.0, 1.0]).unwrap());
        assert_eq!(rep.d_ca(), 1.0);

        let rep = discrepancy(&ComplexSequence::from_reals(&[1.0; 3]).unwrap());
        assert_eq!(rep.d_ca(), 0.0);
        assert!((rep.d_zac() - 3.0).abs() < 1e-14);
        assert_eq!(rep.d(), rep.d_ca() + rep.d_zac());

        let rep = discrepancy(&ComplexSequence::from_reals(&[0.5]).unwrap());
        assert!(rep.is_degenerate());
        assert_eq!(rep.d_zac(), 0.0);
        assert_eq!(rep.d(), 0.5);
    }

    #[test]
    fn phase_criterion_examples() {
        for t in [0.0, 0.7, 2.1] {
            let th = PhaseSequence::new(vec![0.0, t, PI, t]).unwrap();
            assert!(zac_phase_criterion(&th).unwrap() < 1e-12);
        }
        let th = PhaseSequence::new(vec![0.0; 3]).unwrap();
        assert!((zac_phase_criterion(&th).unwrap() - 3.0).abs() < 1e-14);
        assert!(zac_phase_criterion(&PhaseSequence::new(vec![1.0]).unwrap()).is_err());
    }

    #[test]
    fn lobe_ratio_small_cases() {
        let lr = lobe_ratio(&seq(&[(1.0, 0.0), (0.0, 1.0)])).unwrap();
        assert!((lr.rho_db - 6.0206).abs() < 1e-4);
        assert!((lr.rho_db - lr.upper_bound_db).abs() < 1e-12);
        assert_eq!(lr.argmax_tau, 1);

        let lr = lobe_ratio(&ComplexSequence::from_reals(&[1.0, 1.0, -1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(lr.argmax_tau, 1);
        assert!((lr.max_side_lobe_power - 1.0).abs() < 1e-15);
        assert!((lr.rho_db - 10.0 * 16f64.log10()).abs() < 1e-12);

        assert!(lobe_ratio(&ComplexSequence::from_reals(&[1.0, 1.5]).unwrap()).is_err());
        assert!(lobe_ratio(&ComplexSequence::from_reals(&[1.0]).unwrap()).is_err());
    }

    /// Best annealed length-23 phase vector, in units of 2π/23.
    #[allow(clippy::approx_constant)]
    const BEST_23: [f64; 23] = [
        0.0, 16.0884, 12.7028, 8.9221, 6.9862, 1.1362, 12.7345, 2.3399, 22.8821, 13.8704, 1.5708,
        14.8121, 22.5770, 9.8769, 16.8806, 17.3456, 2.7453, 12.1426, 15.9850, 15.9248, 17.7010,
        19.0881, 1.0068,
    ];

    #[test]
    fn best_length_23_ratio() {
        let x = SRepresentation::new(BEST_23.to_vec()).unwrap().to_complex();
        let lr = lobe_ratio(&x).unwrap();
        // 26.16663 from an independent numpy evaluation of the printed
        // 4-decimal phases.
        assert!((lr.rho_db - 26.16663).abs() < 1e-4, "{}", lr.rho_db);
        assert!((lr.upper_bound_db - 27.2346).abs() < 1e-4);
        assert_eq!(lr.argmax_tau, 11);
    }

    #[test]
    fn gram_defect_examples() {
        assert!((circulant_gram_defect(&ComplexSequence::from_reals(&[1.0; 4]).unwrap()) - 4.0).abs() < 1e-15);
        let th: Vec<f64> = (0..8).map(|k| -PI * (k * k) as f64 / 8.0).collect();
        let zc = unit_phases(&PhaseSequence::new(th).unwrap());
        assert!(circulant_gram_defect(&zc) < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn complex_vec(lo: usize, hi: usize) -> impl Strategy<Value = ComplexSequence> {
            prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), lo..=hi).prop_map(|v| {
                ComplexSequence::new(v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()).unwrap()
            })
        }

        proptest! {
            #[test]
            fn conjugate_symmetry(x in complex_vec(1, 40)) {
                let r = circular_autocorr(&x);
                let n = x.len();
                for k in 1..n {
                    prop_assert!((r[n - k] - r[k].conj()).norm() < 1e-12);
                }
            }

            #[test]
            fn gram_defect_matches_autocorr(x in complex_vec(1, 32)) {
                let r = autocorr_oracle(x.values());
                let n = x.len() as f64;
                let expect = r.iter().skip(1).map(|v| v.norm())
                    .fold((r[0].norm() - n).abs(), f64::max);
                prop_assert!((circulant_gram_defect(&x) - expect).abs() < 1e-10);
            }

            #[test]
            fn phase_criterion_matches_d_zac(th in prop::collection::vec(0.0..TAU, 2..32)) {
                let p = PhaseSequence::new(th).unwrap();
                let d = discrepancy(&unit_phases(&p)).d_zac();
                prop_assert!((zac_phase_criterion(&p).unwrap() - d).abs() < 1e-12);
            }

            #[test]
            fn fft_discrepancy_agrees(x in complex_vec(2, 40)) {
                let f = Fourier::new(x.len());
                let mut scratch = Vec::new();
                let a = discrepancy_with(&f, x.values(), &mut scratch);
                let b = discrepancy(&x);
                prop_assert!((a.d_zac() - b.d_zac()).abs() < 1e-12);
                prop_assert_eq!(a.d_ca(), b.d_ca());
            }

            #[test]
            fn zac_sequence_has_flat_spectrum(u in prop::sample::select(vec![1usize, 3, 5, 7]), q in 0usize..8) {
                let th: Vec<f64> = (0..8).map(|k| -PI * (u * k * (k + 2 * q)) as f64 / 8.0).collect();
                let x = unit_phases(&PhaseSequence::new(th).unwrap());
                prop_assert!(dft(&x).iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
            }
        }
    }
}
