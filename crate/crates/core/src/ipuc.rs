//! Iterative projection onto the unit circle (IPUC).
//!
//! Starting from a random constant-amplitude spectrum, the sequence is
//! alternately projected onto the unit circle in the time and frequency
//! domains until the discrepancy of the time-domain projection drops below
//! `epsilon`, so results are exactly constant-amplitude. Runs that stall are
//! restarted from a fresh random spectrum.

use std::collections::VecDeque;
use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{discrepancy, discrepancy_with, DiscrepancyReport};
use crate::seqcore::{project_in_place, ComplexSequence, Fourier};

/// Trajectory samples are kept for every iteration up to this count and
/// every [`TRAJECTORY_STRIDE`]-th iteration after it.
pub const TRAJECTORY_DENSE: usize = 1_000;
pub const TRAJECTORY_STRIDE: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IpucConfig {
    pub epsilon: f64,
    /// Iteration budget shared by all restarts of one run.
    pub max_iters: usize,
    pub restart_window: usize,
    pub restart_factor: f64,
    /// `0` disables the restart controller.
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for IpucConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            max_iters: 100_000,
            restart_window: 200,
            restart_factor: 0.99,
            max_restarts: 50,
            seed: 0,
        }
    }
}

impl IpucConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if !(self.restart_factor > 0.0 && self.restart_factor < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "restart_factor must lie in (0, 1), got {}",
                self.restart_factor
            )));
        }
        if self.restart_window == 0 {
            return Err(Error::InvalidParameter("restart_window must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpucResult {
    /// Unit-modulus sequence with the lowest discrepancy seen; the
    /// converged one when `converged` is set.
    pub sequence: ComplexSequence,
    pub report: DiscrepancyReport,
    /// Iterations used across all restarts.
    pub iterations: usize,
    pub restarts: usize,
    /// Iterations at which a restart was triggered.
    pub restart_points: Vec<usize>,
    pub trajectory: Vec<TrajectoryPoint>,
    pub converged: bool,
}

impl IpucResult {
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence {
                iterations: self.iterations,
                restarts: self.restarts,
                best: self.report.d(),
            })
        }
    }
}

/// One time→frequency→time pass: `idft(project(dft(project(x))))`.
pub fn ipuc_step(x: &ComplexSequence) -> ComplexSequence {
    let fourier = Fourier::new(x.len());
    let mut buf = x.values().to_vec();
    step_in_place(&fourier, &mut buf);
    ComplexSequence::from_vec_unchecked(buf)
}

fn step_in_place(fourier: &Fourier, buf: &mut [Complex64]) {
    project_in_place(buf);
    fourier.forward_in_place(buf);
    project_in_place(buf);
    fourier.inverse_in_place(buf);
}

/// Time-domain start: the inverse DFT of a spectrum with i.i.d. uniform phases.
fn random_start(fourier: &Fourier, rng: &mut ChaCha8Rng, buf: &mut [Complex64]) {
    for v in buf.iter_mut() {
        *v = Complex64::from_polar(1.0, rng.random::<f64>() * TAU);
    }
    fourier.inverse_in_place(buf);
}

struct Trajectory {
    points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    fn record(&mut self, iteration: usize, d: f64) {
        if iteration <= TRAJECTORY_DENSE || iteration.is_multiple_of(TRAJECTORY_STRIDE) {
            self.points.push(TrajectoryPoint {
                iteration,
                discrepancy: d,
            });
        }
    }

    fn finish(mut self, iteration: usize, d: f64) -> Vec<TrajectoryPoint> {
        if self.points.last().is_none_or(|p| p.iteration != iteration) {
            self.points.push(TrajectoryPoint {
                iteration,
                discrepancy: d,
            });
        }
        self.points
    }
}

/// Discrepancy of the unit-circle projection of `x`, written to `out`.
fn projected_discrepancy(
    fourier: &Fourier,
    x: &[Complex64],
    out: &mut Vec<Complex64>,
    scratch: &mut Vec<Complex64>,
) -> f64 {
    out.clear();
    out.extend_from_slice(x);
    project_in_place(out);
    discrepancy_with(fourier, out, scratch).d()
}

fn run_with_rng(n: usize, cfg: &IpucConfig, rng: &mut ChaCha8Rng) -> Result<IpucResult> {
    if n < 2 {
        return Err(Error::TooShort { min: 2, got: n });
    }
    cfg.validate()?;
    let fourier = Fourier::new(n);
    let mut x = vec![Complex64::default(); n];
    let mut projected = Vec::with_capacity(n);
    let mut scratch = Vec::with_capacity(n);
    random_start(&fourier, rng, &mut x);

    let mut d = projected_discrepancy(&fourier, &x, &mut projected, &mut scratch);
    let mut trajectory = Trajectory { points: Vec::new() };
    trajectory.record(0, d);
    let mut best = (d, projected.clone());
    let mut window: VecDeque<f64> = VecDeque::with_capacity(cfg.restart_window + 1);
    window.push_back(d);
    let mut restarts = 0;
    let mut restart_points = Vec::new();
    let mut iteration = 0;

    while d > cfg.epsilon && iteration < cfg.max_iters {
        step_in_place(&fourier, &mut x);
        iteration += 1;
        d = projected_discrepancy(&fourier, &x, &mut projected, &mut scratch);
        trajectory.record(iteration, d);
        if d < best.0 {
            best = (d, projected.clone());
        }
        if d <= cfg.epsilon {
            break;
        }
        window.push_back(d);
        if window.len() > cfg.restart_window {
            let old = window.pop_front().expect("window is non-empty");
            if cfg.max_restarts > 0 && d / old > cfg.restart_factor {
                if restarts == cfg.max_restarts {
                    break;
                }
                restarts += 1;
                restart_points.push(iteration);
                random_start(&fourier, rng, &mut x);
                d = projected_discrepancy(&fourier, &x, &mut projected, &mut scratch);
                window.clear();
                window.push_back(d);
            }
        }
    }

    let trajectory = trajectory.finish(iteration, d);
    let sequence = ComplexSequence::from_vec_unchecked(best.1);
    let report = discrepancy_with(&fourier, sequence.values(), &mut scratch);
    Ok(IpucResult {
        converged: report.d() <= cfg.epsilon,
        sequence,
        report,
        iterations: iteration,
        restarts,
        restart_points,
        trajectory,
    })
}

/// Iterate from `x` (no restarts) until the projected discrepancy is at most
/// `epsilon`. Returns the unit-modulus result, or `None` when `max_iters`
/// passes are not enough.
pub fn ipuc_refine(x: &ComplexSequence, epsilon: f64, max_iters: usize) -> Option<ComplexSequence> {
    let n = x.len();
    let fourier = Fourier::new(n);
    let mut buf = x.values().to_vec();
    let mut projected = Vec::with_capacity(n);
    let mut scratch = Vec::with_capacity(n);
    let mut d = projected_discrepancy(&fourier, &buf, &mut projected, &mut scratch);
    let mut iteration = 0;
    while d > epsilon {
        if iteration == max_iters {
            return None;
        }
        step_in_place(&fourier, &mut buf);
        iteration += 1;
        d = projected_discrepancy(&fourier, &buf, &mut projected, &mut scratch);
    }
    Some(ComplexSequence::from_vec_unchecked(projected))
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Run IPUC for a length-`n` sequence. Non-convergence is reported through
/// [`IpucResult::converged`]; see [`IpucResult::require_converged`].
pub fn ipuc_run(n: usize, cfg: &IpucConfig) -> Result<IpucResult> {
    run_with_rng(n, cfg, &mut stream_rng(cfg.seed, 0))
}

/// `count` independent runs; run `i` draws from stream `i` of the seed, so
/// run 0 reproduces [`ipuc_run`]. Results are in run order.
pub fn ipuc_batch(n: usize, count: usize, cfg: &IpucConfig) -> Result<Vec<IpucResult>> {
    if count == 0 {
        return Err(Error::InvalidParameter("count must be at least 1".into()));
    }
    cfg.validate()?;
    (0..count as u64)
        .into_par_iter()
        .map(|i| run_with_rng(n, cfg, &mut stream_rng(cfg.seed, i)))
        .collect()
}

/// Re-verify a result independently of the run's bookkeeping.
pub fn verify_result(res: &IpucResult, epsilon: f64) -> bool {
    discrepancy(&res.sequence).d() <= epsilon
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{cazac4, fit_cazac4, zadoff_chu, Cazac4Variant};
    use crate::seqcore::unit_phases;

    #[test]
    fn cazac_is_fixed_point() {
        let zc = unit_phases(&zadoff_chu(8, 1, 0).unwrap());
        assert!(ipuc_step(&zc).max_abs_diff(&zc) < 1e-12);
        let c4 = cazac4(Cazac4Variant::A, 0.3);
        assert!(ipuc_step(&c4).max_abs_diff(&c4) < 1e-12);
        let long = unit_phases(&zadoff_chu(101, 7, 0).unwrap());
        assert!(ipuc_step(&long).max_abs_diff(&long) < 1e-12);
    }

    #[test]
    fn random_step_is_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v: Vec<Complex64> = (0..8).map(|_| Complex64::new(rng.random(), rng.random())).collect();
        let x = ComplexSequence::new(v).unwrap();
        let d0 = discrepancy(&x).d();
        let d1 = discrepancy(&ipuc_step(&x)).d();
        assert!(d0.is_finite() && d1.is_finite());
    }

    #[test]
    fn converges_at_length_8() {
        let res = ipuc_run(8, &IpucConfig::default()).unwrap();
        assert!(res.converged);
        assert!(res.report.d() <= 1e-3);
        assert!(verify_result(&res, 1e-3));
        assert!((res.report.d() - discrepancy(&res.sequence).d()).abs() < 1e-15);
    }

    #[test]
    fn converges_at_length_50() {
        let cfg = IpucConfig {
            seed: 4,
            ..IpucConfig::default()
        };
        let res = ipuc_run(50, &cfg).unwrap().require_converged().unwrap();
        assert!(discrepancy(&res.sequence).d() <= 1e-3);
    }

    #[test]
    fn length_4_outputs_are_cazac4() {
        // D is quadratic in the phase error near this solution set, so
        // ε = 1e-3 only bounds the phase error by about 0.03 rad.
        for seed in 0..20 {
            let cfg = IpucConfig {
                epsilon: 1e-4,
                seed,
                ..IpucConfig::default()
            };
            let res = ipuc_run(4, &cfg).unwrap();
            assert!(res.converged);
            let (_, _, err) = fit_cazac4(&res.sequence).unwrap();
            assert!(err < 1e-2, "seed {seed}: {err}");
        }
    }

    #[test]
    fn deterministic() {
        let cfg = IpucConfig {
            seed: 77,
            ..IpucConfig::default()
        };
        assert_eq!(ipuc_run(16, &cfg).unwrap(), ipuc_run(16, &cfg).unwrap());
    }

    #[test]
    fn batch_matches_single_run() {
        let cfg = IpucConfig {
            seed: 12,
            ..IpucConfig::default()
        };
        let batch = ipuc_batch(8, 1, &cfg).unwrap();
        assert_eq!(batch[0], ipuc_run(8, &cfg).unwrap());
        let batch = ipuc_batch(8, 4, &cfg).unwrap();
        assert_eq!(batch.len(), 4);
        assert_ne!(batch[1].sequence, batch[2].sequence);
        assert!(ipuc_batch(8, 0, &cfg).is_err());
    }

    #[test]
    fn batch_at_length_8_mostly_converges() {
        let cfg = IpucConfig::default();
        let ok = ipuc_batch(8, 100, &cfg).unwrap().iter().filter(|r| r.converged).count();
        assert!(ok >= 90, "{ok}");
    }

    #[test]
    fn trajectory_shape() {
        let cfg = IpucConfig {
            epsilon: 1e-14,
            max_iters: 1_500,
            max_restarts: 0,
            ..IpucConfig::default()
        };
        let res = ipuc_run(50, &cfg).unwrap();
        let t = &res.trajectory;
        assert_eq!(t[0].iteration, 0);
        assert!(t.windows(2).all(|w| w[0].iteration < w[1].iteration));
        assert_eq!(t.last().unwrap().iteration, res.iterations);
        if res.iterations == 1_500 {
            assert_eq!(t.len(), 1_001 + 50);
        }
        assert!(t.iter().all(|p| p.discrepancy.is_finite()));
    }

    #[test]
    fn budget_exhaustion_reports_best() {
        let cfg = IpucConfig {
            epsilon: 1e-300,
            max_iters: 50,
            ..IpucConfig::default()
        };
        let res = ipuc_run(30, &cfg).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 50);
        let best = res.trajectory.iter().map(|p| p.discrepancy).fold(f64::INFINITY, f64::min);
        assert!(res.report.d() <= best + 1e-12);
        assert!(matches!(res.require_converged(), Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn restart_limit_gives_up() {
        let cfg = IpucConfig {
            epsilon: 1e-300,
            restart_window: 5,
            restart_factor: 0.999_999_9,
            max_restarts: 2,
            max_iters: 1_000_000,
            ..IpucConfig::default()
        };
        let res = ipuc_run(8, &cfg).unwrap();
        assert!(!res.converged);
        assert_eq!(res.restarts, 2);
        assert_eq!(res.restart_points.len(), 2);
        assert!(res.iterations < 1_000_000);
    }

    #[test]
    fn refine_repairs_small_perturbation() {
        let zc = unit_phases(&zadoff_chu(23, 1, 0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v: Vec<Complex64> = zc
            .iter()
            .map(|z| z * Complex64::from_polar(1.0, (rng.random::<f64>() - 0.5) * 0.1))
            .collect();
        let x = ComplexSequence::new(v).unwrap();
        let y = ipuc_refine(&x, 1e-3, 10_000).unwrap();
        assert!(discrepancy(&y).d() <= 1e-3);
        assert!(y.iter().all(|v| (v.norm() - 1.0).abs() < 1e-15));
        assert!(ipuc_refine(&zc, 1e-3, 0).unwrap().max_abs_diff(&zc) < 1e-15);
        assert!(ipuc_refine(&x, 1e-300, 3).is_none());
    }

    #[test]
    fn rejects_bad_config() {
        let bad = [
            IpucConfig {
                epsilon: 0.0,
                ..IpucConfig::default()
            },
            IpucConfig {
                max_iters: 0,
                ..IpucConfig::default()
            },
            IpucConfig {
                restart_factor: 1.0,
                ..IpucConfig::default()
            },
        ];
        for cfg in bad {
            assert!(ipuc_run(8, &cfg).is_err());
        }
        assert!(ipuc_run(1, &IpucConfig::default()).is_err());
    }
}
