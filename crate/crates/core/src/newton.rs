//! Damped Newton solver for the three-equation system whose root `(a, b, c)`
//! parameterizes the fourth length-8 form (the `C0c` class).

use nalgebra::{Matrix3, Vector3};
use std::f64::consts::FRAC_PI_4;

use crate::error::{Error, Result};
use crate::families::{c0c_sequences, C0cTriple};
use crate::seqcore::ComplexSequence;

/// Jacobians with a condition estimate above this are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Central-difference step for the numerical Jacobian.
pub const FD_STEP: f64 = 1e-6;

/// Every term has period 8 in each unknown.
const PERIOD: f64 = 8.0;

/// The three left-hand sides, with angles written as `(π/4)·(s-units)`.
pub fn fourth_form_residual(a: f64, b: f64, c: f64) -> [f64; 3] {
    let p = FRAC_PI_4;
    [
        (p * (a + 3.0)).cos() + (p * (a - b + 0.5)).cos() + (p * (c - b + 2.5)).cos(),
        -(p * (a + 3.0)).cos() + (p * (b + 2.5)).cos() - (p * (c - a)).sin()
            + (p * (c - b + 2.5)).cos(),
        -(p * (c + 5.0)).cos() + (p * (b + 2.5)).cos() + (p * (c - a)).sin(),
    ]
}

/// Closed-form partial derivatives of [`fourth_form_residual`]; row `i` is
/// the gradient of equation `i`.
pub fn fourth_form_jacobian(a: f64, b: f64, c: f64) -> [[f64; 3]; 3] {
    let p = FRAC_PI_4;
    let s_a3 = (p * (a + 3.0)).sin();
    let s_ab = (p * (a - b + 0.5)).sin();
    let s_cb = (p * (c - b + 2.5)).sin();
    let s_b = (p * (b + 2.5)).sin();
    let c_ca = (p * (c - a)).cos();
    let s_c5 = (p * (c + 5.0)).sin();
    [
        [-p * s_a3 - p * s_ab, p * s_ab + p * s_cb, -p * s_cb],
        [p * s_a3 + p * c_ca, -p * s_b + p * s_cb, -p * c_ca - p * s_cb],
        [-p * c_ca, -p * s_b, p * s_c5 + p * c_ca],
    ]
}

/// Central-difference Jacobian of [`fourth_form_residual`].
pub fn finite_difference_jacobian(x: [f64; 3], h: f64) -> [[f64; 3]; 3] {
    let mut jac = [[0.0; 3]; 3];
    for j in 0..3 {
        let mut hi = x;
        let mut lo = x;
        hi[j] += h;
        lo[j] -= h;
        let rh = fourth_form_residual(hi[0], hi[1], hi[2]);
        let rl = fourth_form_residual(lo[0], lo[1], lo[2]);
        for i in 0..3 {
            jac[i][j] = (rh[i] - rl[i]) / (2.0 * h);
        }
    }
    jac
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianMode {
    FiniteDifference,
    Analytic,
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub jacobian: JacobianMode,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iters: 100,
            jacobian: JacobianMode::FiniteDifference,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonSolution {
    pub triple: C0cTriple,
    pub iterations: usize,
    pub residual_inf: f64,
    /// `‖r‖∞` at the start and after every accepted step.
    pub residual_history: Vec<f64>,
}

fn inf_norm(r: &[f64; 3]) -> f64 {
    r.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn eval(x: &[f64; 3]) -> [f64; 3] {
    fourth_form_residual(x[0], x[1], x[2])
}

pub fn newton_solve(init: [f64; 3], tol: f64, max_iters: usize) -> Result<NewtonSolution> {
    newton_solve_with(
        init,
        &NewtonOptions {
            tol,
            max_iters,
            ..NewtonOptions::default()
        },
    )
}

/// Newton iteration with step halving until the residual norm decreases.
pub fn newton_solve_with(init: [f64; 3], opts: &NewtonOptions) -> Result<NewtonSolution> {
    if init.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("initial point must be finite".into()));
    }
    let mut x = init;
    let mut r = eval(&x);
    let mut norm = inf_norm(&r);
    let mut history = vec![norm];
    let mut iterations = 0;

    while norm > opts.tol {
        if iterations >= opts.max_iters {
            return Err(Error::MaxIters {
                iterations,
                residual: norm,
                best: x,
            });
        }
        let jac = match opts.jacobian {
            JacobianMode::FiniteDifference => finite_difference_jacobian(x, FD_STEP),
            JacobianMode::Analytic => fourth_form_jacobian(x[0], x[1], x[2]),
        };
        let m = Matrix3::from_fn(|i, j| jac[i][j]);
        let sv = m.singular_values();
        let condition = sv.max() / sv.min();
        if !condition.is_finite() || condition > MAX_CONDITION {
            return Err(Error::SingularJacobian { condition });
        }
        let step = m
            .lu()
            .solve(&-Vector3::new(r[0], r[1], r[2]))
            .ok_or(Error::SingularJacobian {
                condition: f64::INFINITY,
            })?;

        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial = [
                x[0] + lambda * step[0],
                x[1] + lambda * step[1],
                x[2] + lambda * step[2],
            ];
            let tr = eval(&trial);
            let tn = inf_norm(&tr);
            if tn < norm {
                accepted = Some((trial, tr, tn));
                break;
            }
            lambda *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((nx, nr, nn)) => {
                x = nx;
                r = nr;
                norm = nn;
                history.push(norm);
            }
            // no descent left: rounding floor reached above tol
            None => {
                return Err(Error::MaxIters {
                    iterations,
                    residual: norm,
                    best: x,
                })
            }
        }
    }

    Ok(NewtonSolution {
        triple: C0cTriple::new(x[0], x[1], x[2]),
        iterations,
        residual_inf: norm,
        residual_history: history,
    })
}

/// Reduce each coordinate to `[0, 8)`.
pub fn reduce_root(x: [f64; 3]) -> [f64; 3] {
    x.map(|v| {
        let r = v.rem_euclid(PERIOD);
        if r >= PERIOD {
            0.0
        } else {
            r
        }
    })
}

fn periodic_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).rem_euclid(PERIOD);
            d.min(PERIOD - d)
        })
        .fold(0.0, f64::max)
}

/// Roots closer than this (per coordinate, modulo 8) are merged.
pub const ROOT_MERGE_TOL: f64 = 1e-5;

/// Newton from every point of a `per_axis³` grid over `[0, 1)³`; roots are
/// reduced modulo 8, merged within [`ROOT_MERGE_TOL`] and returned sorted
/// lexicographically.
pub fn multistart(per_axis: usize, opts: &NewtonOptions) -> Vec<[f64; 3]> {
    use rayon::prelude::*;

    let step = 1.0 / per_axis as f64;
    let starts: Vec<[f64; 3]> = (0..per_axis)
        .flat_map(|i| {
            (0..per_axis).flat_map(move |j| {
                (0..per_axis).map(move |k| [i as f64 * step, j as f64 * step, k as f64 * step])
            })
        })
        .collect();

    let mut roots: Vec<[f64; 3]> = starts
        .par_iter()
        .filter_map(|s| newton_solve_with(*s, opts).ok())
        .map(|sol| reduce_root(sol.triple.as_array()))
        .collect();
    roots.sort_by(|a, b| a.partial_cmp(b).expect("finite roots"));

    let mut merged: Vec<[f64; 3]> = Vec::new();
    for r in roots {
        if !merged.iter().any(|m| periodic_distance(m, &r) < ROOT_MERGE_TOL) {
            merged.push(r);
        }
    }
    merged
}

/// Default starting point for the `C0c` triple.
pub const DEFAULT_INIT: [f64; 3] = [0.1, 0.3, 0.1];

/// Solve from [`DEFAULT_INIT`] and build the eight `C0c`/`C0c*` sequences.
pub fn solve_and_build() -> Result<(NewtonSolution, Vec<ComplexSequence>)> {
    let sol = newton_solve_with(DEFAULT_INIT, &NewtonOptions::default())?;
    let seqs = c0c_sequences(&sol.triple)?;
    Ok((sol, seqs))
}
