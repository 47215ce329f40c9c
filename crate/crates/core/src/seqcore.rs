//! Sequence containers, the unitary DFT, unit-circle projection and phase
//! bookkeeping.
//!
//! A unit-modulus sequence has three interchangeable forms here:
//! [`ComplexSequence`] (the working form), [`PhaseSequence`] (phases
//! θ(k) ∈ [0, 2π)) and [`SRepresentation`] (s(k) ∈ [0, n) with
//! θ(k) = 2π·s(k)/n).

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Modulus below which a component is treated as zero by
/// [`project_unit_circle`].
pub const ZERO_MODULUS: f64 = 1e-300;

/// Largest `d_ca` accepted by [`canonicalize`].
pub const CANONICAL_CA_LIMIT: f64 = 1e-6;

/// Reduce an angle to `[0, 2π)`.
pub fn wrap_phase(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Signed angle difference reduced to `(-π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = wrap_phase(a - b);
    if d > std::f64::consts::PI {
        d - TAU
    } else {
        d
    }
}

/// Distance between two angles on the circle, in `[0, π]`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    angle_diff(a, b).abs()
}

/// A finite, non-empty complex sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSequence {
    values: Vec<Complex64>,
}

impl ComplexSequence {
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::TooShort { min: 1, got: 0 });
        }
        if let Some(index) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { values })
    }

    /// Build from `(re, im)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(re, im)| Complex64::new(re, im)).collect())
    }

    /// Build from real values.
    pub fn from_reals(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&re| Complex64::new(re, 0.0)).collect())
    }

    /// Internal constructor for values known to be finite and non-empty.
    pub(crate) fn from_vec_unchecked(values: Vec<Complex64>) -> Self {
        debug_assert!(!values.is_empty());
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn get(&self, k: usize) -> Complex64 {
        self.values[k]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex64> {
        self.values.iter()
    }

    /// Squared Euclidean norm.
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn conj(&self) -> Self {
        Self::from_vec_unchecked(self.values.iter().map(|v| v.conj()).collect())
    }

    /// Hermitian inner product `Σ a(k)·conj(b(k))`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b.conj())
            .sum())
    }

    /// Phases `arg x(k)` reduced to `[0, 2π)` (moduli are ignored).
    pub fn phases(&self) -> Vec<f64> {
        self.values.iter().map(|v| wrap_phase(v.arg())).collect()
    }

    /// Largest component-wise distance `|a(k) − b(k)|`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.len(), other.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for ComplexSequence {
    type Output = Complex64;

    fn index(&self, k: usize) -> &Complex64 {
        &self.values[k]
    }
}

/// Phases of a unit-modulus sequence, stored in `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSequence {
    thetas: Vec<f64>,
    canonical: bool,
}

impl PhaseSequence {
    pub fn new(thetas: Vec<f64>) -> Result<Self> {
        if thetas.is_empty() {
            return Err(Error::TooShort { min: 1, got: 0 });
        }
        if let Some(index) = thetas.iter().position(|t| !t.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let thetas: Vec<f64> = thetas.into_iter().map(wrap_phase).collect();
        let canonical = thetas[0] == 0.0;
        Ok(Self { thetas, canonical })
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    /// True when θ(0) = 0 exactly.
    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    pub fn to_complex(&self) -> ComplexSequence {
        unit_phases(self)
    }

    pub fn to_s(&self) -> SRepresentation {
        let n = self.len() as f64;
        SRepresentation::from_reduced(self.thetas.iter().map(|t| reduce_s(t * n / TAU, n)).collect())
    }

    /// Largest circular distance between corresponding phases.
    pub fn max_circular_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.len(), other.len());
        self.thetas
            .iter()
            .zip(&other.thetas)
            .map(|(&a, &b)| circular_distance(a, b))
            .fold(0.0, f64::max)
    }
}

fn reduce_s(s: f64, n: f64) -> f64 {
    let r = s.rem_euclid(n);
    if r >= n {
        0.0
    } else {
        r
    }
}

/// Phases in units of `2π/n`, stored in `[0, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SRepresentation {
    s: Vec<f64>,
}

impl SRepresentation {
    pub fn new(s: Vec<f64>) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::TooShort { min: 1, got: 0 });
        }
        if let Some(index) = s.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let n = s.len() as f64;
        Ok(Self::from_reduced(s.into_iter().map(|v| reduce_s(v, n)).collect()))
    }

    fn from_reduced(s: Vec<f64>) -> Self {
        Self { s }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.s
    }

    pub fn to_phases(&self) -> PhaseSequence {
        let n = self.len() as f64;
        PhaseSequence::new(self.s.iter().map(|v| TAU * v / n).collect())
            .expect("finite s-values give finite phases")
    }

    pub fn to_complex(&self) -> ComplexSequence {
        unit_phases(&self.to_phases())
    }
}

/// `x(k) = e^{iθ(k)}`.
pub fn unit_phases(theta: &PhaseSequence) -> ComplexSequence {
    ComplexSequence::from_vec_unchecked(
        theta
            .thetas()
            .iter()
            .map(|&t| Complex64::from_polar(1.0, t))
            .collect(),
    )
}

/// Unitary DFT plans for one length, reusable across calls.
#[derive(Clone)]
pub struct Fourier {
    n: usize,
    scale: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fourier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fourier").field("n", &self.n).finish()
    }
}

impl Fourier {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "transform length must be positive");
        let mut planner = FftPlanner::new();
        Self {
            n,
            scale: 1.0 / (n as f64).sqrt(),
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// In-place unitary forward transform.
    pub fn forward_in_place(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.n);
        self.forward.process(buf);
        buf.iter_mut().for_each(|v| *v *= self.scale);
    }

    /// In-place unitary inverse transform.
    pub fn inverse_in_place(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.n);
        self.inverse.process(buf);
        buf.iter_mut().for_each(|v| *v *= self.scale);
    }

    pub fn forward(&self, x: &ComplexSequence) -> ComplexSequence {
        let mut buf = x.values().to_vec();
        self.forward_in_place(&mut buf);
        ComplexSequence::from_vec_unchecked(buf)
    }

    pub fn inverse(&self, x: &ComplexSequence) -> ComplexSequence {
        let mut buf = x.values().to_vec();
        self.inverse_in_place(&mut buf);
        ComplexSequence::from_vec_unchecked(buf)
    }
}

/// Unitary DFT: `X(k) = n^{-1/2} Σ_l e^{-2πilk/n} x(l)`.
pub fn dft(x: &ComplexSequence) -> ComplexSequence {
    Fourier::new(x.len()).forward(x)
}

/// Inverse of [`dft`].
pub fn idft(x: &ComplexSequence) -> ComplexSequence {
    Fourier::new(x.len()).inverse(x)
}

pub(crate) fn project_in_place(buf: &mut [Complex64]) {
    for v in buf.iter_mut() {
        let m = v.norm();
        *v = if m < ZERO_MODULUS {
            Complex64::new(1.0, 0.0)
        } else {
            *v / m
        };
    }
}

/// `x(k)/|x(k)|`, with (near-)zero components sent to `1`.
pub fn project_unit_circle(x: &ComplexSequence) -> ComplexSequence {
    let mut buf = x.values().to_vec();
    project_in_place(&mut buf);
    ComplexSequence::from_vec_unchecked(buf)
}

/// Rotate a constant-amplitude sequence so that its first element is 1 and
/// return its phases.
pub fn canonicalize(x: &ComplexSequence) -> Result<PhaseSequence> {
    let d_ca = x
        .iter()
        .map(|v| (v.norm() - 1.0).abs())
        .fold(0.0, f64::max);
    if d_ca > CANONICAL_CA_LIMIT {
        return Err(Error::NotConstantAmplitude {
            d_ca,
            limit: CANONICAL_CA_LIMIT,
        });
    }
    Ok(canonical_phases(x))
}

/// Phases relative to the first element; no amplitude check.
pub(crate) fn canonical_phases(x: &ComplexSequence) -> PhaseSequence {
    let r = x[0].conj() / x[0].norm();
    let mut thetas: Vec<f64> = x.iter().map(|v| (v * r).arg()).collect();
    thetas[0] = 0.0;
    PhaseSequence::new(thetas).expect("phases of a finite sequence are finite")
}
