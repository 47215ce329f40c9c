//! Closed-form CAZAC constructions.
//!
//! Covers the classical families (Zadoff-Chu, Popovic, Wiener, P4, Björck),
//! the complete length-4 solution set, and the length-8 sets obtained by
//! imposing decimation symmetries: the one-parameter Popovic subsets and the
//! three zero-degree-of-freedom classes `C0a`, `C0b`, `C0c`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::newton::fourth_form_residual;
use crate::seqcore::{
    circular_distance, unit_phases, wrap_phase,
    ComplexSequence, PhaseSequence, SRepresentation,
};

/// Largest residual accepted by [`c0c_sequences`].
pub const C0C_RESIDUAL_LIMIT: f64 = 1e-6;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn mod_pow(mut base: u64, mut exp: u64, modulus: u64) -> u64 {
    let m = modulus as u128;
    let mut acc: u128 = 1 % m;
    let mut b = base as u128 % m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        exp >>= 1;
    }
    base = acc as u64;
    base
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n.is_multiple_of(2) {
        return false;
    }
    let mut d = 3;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Legendre symbol `(k/p)` for an odd prime `p`, by Euler's criterion.
pub fn legendre(k: u64, p: u64) -> i8 {
    let r = k % p;
    if r == 0 {
        return 0;
    }
    if mod_pow(r, (p - 1) / 2, p) == 1 {
        1
    } else {
        -1
    }
}

fn phases_from(thetas: Vec<f64>) -> PhaseSequence {
    PhaseSequence::new(thetas).expect("closed-form phases are finite")
}

fn check_len(n: usize, min: usize) -> Result<()> {
    if n < min {
        Err(Error::TooShort { min, got: n })
    } else {
        Ok(())
    }
}

/// `θ(k) = −π·u·k(k + c + 2q)/n` with `c = n mod 2`.
///
/// The numerator is reduced modulo `2n` in integer arithmetic, so phases
/// stay exact for long sequences.
pub fn zadoff_chu(n: usize, u: usize, q: usize) -> Result<PhaseSequence> {
    check_len(n, 1)?;
    if u >= n || q >= n {
        return Err(Error::InvalidParameter(format!(
            "zadoff-chu requires u, q < n (n={n}, u={u}, q={q})"
        )));
    }
    if gcd(n as u64, u as u64) != 1 {
        return Err(Error::InvalidParameter(format!("gcd(n={n}, u={u}) != 1")));
    }
    let two_n = 2 * n as u128;
    let c = (n % 2) as u128;
    let thetas = (0..n as u128)
        .map(|k| {
            let num = (u as u128 * k % two_n) * ((k + c + 2 * q as u128) % two_n) % two_n;
            -PI * num as f64 / n as f64
        })
        .collect();
    Ok(phases_from(thetas))
}

/// `θ(k) = zc(k) + 2π·w(k mod m)` for `n = m²·t`, where `zc` is
/// [`zadoff_chu`]`(n, u, q)`.
pub fn popovic(n: usize, m: usize, w: &[f64], u: usize, q: usize) -> Result<PhaseSequence> {
    if m == 0 || !n.is_multiple_of(m * m) {
        return Err(Error::InvalidParameter(format!("n={n} is not of the form m²·t for m={m}")));
    }
    if w.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            got: w.len(),
        });
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("popovic weights must be finite".into()));
    }
    let zc = zadoff_chu(n, u, q)?;
    let thetas = zc
        .thetas()
        .iter()
        .enumerate()
        .map(|(k, t)| t + TAU * w[k % m])
        .collect();
    Ok(phases_from(thetas))
}

/// One row of the generic length-8 Popovic set with free phase `θ`.
///
/// Even positions are fixed fourth roots of unity; odd positions are
/// `e^{iθ}` times a fixed pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopovicRow {
    /// Row index 1..=4.
    pub row: u8,
    /// Conjugated pattern (with the free phase kept as `+θ`).
    pub conjugate: bool,
}

const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

impl PopovicRow {
    pub fn new(row: u8, conjugate: bool) -> Result<Self> {
        if !(1..=4).contains(&row) {
            return Err(Error::InvalidParameter(format!("popovic row must be 1..=4, got {row}")));
        }
        Ok(Self { row, conjugate })
    }

    /// `(even pattern at k = 0,2,4,6; odd pattern at k = 1,3,5,7)`.
    pub fn pattern(&self) -> ([Complex64; 4], [Complex64; 4]) {
        let (even, odd) = match self.row {
            1 => ([ONE, ONE, -ONE, -ONE], [ONE, -I, ONE, -I]),
            2 => ([ONE, I, ONE, I], [ONE, -ONE, -ONE, ONE]),
            3 => ([ONE, -ONE, -ONE, ONE], [ONE, I, ONE, I]),
            4 => ([ONE, -I, ONE, -I], [ONE, ONE, -ONE, -ONE]),
            _ => unreachable!("row validated at construction"),
        };
        if self.conjugate {
            (even.map(|v| v.conj()), odd.map(|v| v.conj()))
        } else {
            (even, odd)
        }
    }

    pub fn sequence(&self, theta: f64) -> ComplexSequence {
        let (even, odd) = self.pattern();
        let e = Complex64::from_polar(1.0, theta);
        let v = (0..8)
            .map(|k| if k % 2 == 0 { even[k / 2] } else { odd[k / 2] * e })
            .collect();
        ComplexSequence::from_vec_unchecked(v)
    }
}

/// Row `row` (1..=4) of the generic length-8 Popovic set.
pub fn popovic8_row(row: u8, theta: f64) -> Result<ComplexSequence> {
    Ok(PopovicRow::new(row, false)?.sequence(theta))
}

/// `θ(k) = 2π·m·k²/p`, `p = n` for odd `n` and `2n` for even `n`.
pub fn wiener(n: usize, m: usize) -> Result<PhaseSequence> {
    check_len(n, 1)?;
    let p = if n % 2 == 1 { n } else { 2 * n } as u128;
    if gcd(p as u64, m as u64) != 1 {
        return Err(Error::InvalidParameter(format!("gcd(p={p}, m={m}) != 1")));
    }
    let thetas = (0..n as u128)
        .map(|k| {
            let num = (m as u128 % p) * (k * k % p) % p;
            TAU * num as f64 / p as f64
        })
        .collect();
    Ok(phases_from(thetas))
}

/// Lewis-Kretschmer P4: `θ(k) = π·k(k − n)/n`.
pub fn p4(n: usize) -> Result<PhaseSequence> {
    check_len(n, 2)?;
    let two_n = 2 * n as i128;
    let thetas = (0..n as i128)
        .map(|k| {
            let num = (k * (k - n as i128)).rem_euclid(two_n);
            PI * num as f64 / n as f64
        })
        .collect();
    Ok(phases_from(thetas))
}

/// Björck sequence for prime `n`: type I when `n ≡ 1 (mod 4)`, type II when
/// `n ≡ 3 (mod 4)`.
pub fn bjorck(n: usize) -> Result<PhaseSequence> {
    let p = n as u64;
    if !is_prime(p) || p == 2 {
        return Err(Error::InvalidParameter(format!("björck requires an odd prime length, got {n}")));
    }
    let thetas = if p % 4 == 1 {
        let angle = (1.0 / (1.0 + (n as f64).sqrt())).acos();
        (0..p).map(|k| legendre(k, p) as f64 * angle).collect()
    } else {
        let angle = ((1.0 - n as f64) / (1.0 + n as f64)).acos();
        (0..p)
            .map(|k| if legendre(k, p) == -1 { angle } else { 0.0 })
            .collect()
    };
    Ok(phases_from(thetas))
}

/// The two one-parameter subsets that make up every length-4 CAZAC sequence
/// with first element 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cazac4Variant {
    /// `(1, e^{iθ}, −1, e^{iθ})`
    A,
    /// `(1, e^{iθ}, 1, −e^{iθ})`
    B,
}

pub fn cazac4(variant: Cazac4Variant, theta: f64) -> ComplexSequence {
    let e = Complex64::from_polar(1.0, theta);
    let v = match variant {
        Cazac4Variant::A => vec![ONE, e, -ONE, e],
        Cazac4Variant::B => vec![ONE, e, ONE, -e],
    };
    ComplexSequence::from_vec_unchecked(v)
}

/// Best fit of a length-4 sequence to [`cazac4`] up to a global rotation.
/// Returns `(variant, θ̂, max phase distance)`.
///
/// The rotation and `θ̂` are the least-squares choices for the even and odd
/// positions respectively.
pub fn fit_cazac4(x: &ComplexSequence) -> Result<(Cazac4Variant, f64, f64)> {
    if x.len() != 4 {
        return Err(Error::LengthMismatch {
            expected: 4,
            got: x.len(),
        });
    }
    let v = x.values();
    let mut best: Option<(Cazac4Variant, f64, f64)> = None;
    for variant in [Cazac4Variant::A, Cazac4Variant::B] {
        let pattern = cazac4(variant, 0.0);
        let p = pattern.values();
        let alpha = (v[0] * p[0].conj() + v[2] * p[2].conj()).arg();
        let beta = (v[1] * p[1].conj() + v[3] * p[3].conj()).arg();
        let theta = wrap_phase(beta - alpha);
        let target = cazac4(variant, theta);
        let err = v
            .iter()
            .zip(target.values())
            .map(|(a, b)| circular_distance(a.arg() - alpha, b.arg()))
            .fold(0.0, f64::max);
        if best.is_none_or(|b| err < b.2) {
            best = Some((variant, theta, err));
        }
    }
    Ok(best.expect("two candidates evaluated"))
}

/// Constants of the `C0a` (decimation-7 symmetric) class.
///
/// `rho` here is an angle of the construction, unrelated to the lobe ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct C0aConstants {
    pub chi: f64,
    pub phi: f64,
    pub gamma: f64,
    pub rho: f64,
    pub beta: f64,
    pub tau: f64,
    pub nu: f64,
}

/// Evaluate the `C0a` constants.
///
/// Uses `ρ = +arccos(·)` and the principal branch of `arctan` for `ν`; this
/// branch reproduces the representative `(0, 0.566, 5.456, 6.346, 2.912, …)`
/// in s-units. The other sign/branch choices give transforms of the same
/// sequence.
pub fn c0a_constants() -> C0aConstants {
    let chi = (-2.0 + 2.0 * 2f64.sqrt()).sqrt();
    let phi = 2.0 * chi.asin();
    let gamma = -(-chi * chi / 2.0).acos();
    let rho = (-0.5 * (1.0 + phi.cos())).acos();
    let beta = (0.5 * (phi + rho)).cos();
    let tau = -(rho / 2.0).cos();
    let num = beta * (phi / 2.0).cos() + tau * gamma.cos();
    let den = beta * (phi / 2.0).sin() + tau * gamma.sin();
    let nu = 2.0 * (-num / den).atan();
    C0aConstants {
        chi,
        phi,
        gamma,
        rho,
        beta,
        tau,
        nu,
    }
}

/// Representative of `C0a`:
/// `(1, e^{i(ν+ρ)/2}, e^{iγ}, e^{i(ν−ρ)/2}, e^{iφ}, e^{i(ν−ρ)/2}, e^{iγ}, e^{i(ν+ρ)/2})`.
pub fn c0a_sequence() -> ComplexSequence {
    let k = c0a_constants();
    let p = (k.nu + k.rho) / 2.0;
    let m = (k.nu - k.rho) / 2.0;
    unit_phases(&phases_from(vec![0.0, p, k.gamma, m, k.phi, m, k.gamma, p]))
}

/// `ψ = arccos(1/3)`, the angle of `z` in the `C0b` class.
pub fn c0b_psi() -> f64 {
    (1.0f64 / 3.0).acos()
}

/// The eight members of `C0b`; element 0, `(1,1,z,1,−z,−z,z,−z)`, is the
/// class representative.
pub fn c0b_sequences() -> Vec<ComplexSequence> {
    let z = Complex64::from_polar(1.0, c0b_psi());
    let zc = z.conj();
    let rows: [[Complex64; 8]; 8] = [
        [ONE, ONE, z, ONE, -z, -z, z, -z],
        [ONE, ONE, -ONE, ONE, -z, -z, -ONE, -z],
        [ONE, ONE, zc, ONE, -zc, -zc, zc, -zc],
        [ONE, ONE, -ONE, ONE, -zc, -zc, -ONE, -zc],
        [ONE, -z, z, -z, -z, ONE, z, ONE],
        [ONE, -zc, zc, -zc, -zc, ONE, zc, ONE],
        [ONE, -z, -ONE, -z, -z, ONE, -ONE, ONE],
        [ONE, -zc, -ONE, -zc, -zc, ONE, -ONE, ONE],
    ];
    rows.iter()
        .map(|r| ComplexSequence::from_vec_unchecked(r.to_vec()))
        .collect()
}

/// Root `(a, b, c)` of the fourth-form system, in s-units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C0cTriple {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl C0cTriple {
    /// Seven-digit reference root.
    pub const REFERENCE: C0cTriple = C0cTriple {
        a: 0.1390361,
        b: 0.3487759,
        c: 0.0975818,
    };

    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn residual(&self) -> [f64; 3] {
        fourth_form_residual(self.a, self.b, self.c)
    }

    pub fn residual_inf(&self) -> f64 {
        self.residual().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

impl Default for C0cTriple {
    fn default() -> Self {
        Self::REFERENCE
    }
}

/// The eight s-vectors of the fourth form: rows 0..4 are `C0c`, rows 4..8
/// are the conjugate subset.
pub fn c0c_s_vectors(t: &C0cTriple) -> [[f64; 8]; 8] {
    let (a, b, c) = (t.a, t.b, t.c);
    [
        [0.0, 0.5, a, 4.0 + b, 3.0 + c, 7.5 + c, 1.5 + b, 6.5 + a],
        [0.0, 0.5, 7.5 + b, 3.0 + b - c, 5.5 - a + b, 2.0 - a + b, 0.5 + b - c, 6.0 + b],
        [0.0, 0.5, 7.0 + c - a, 6.5 - a, 1.5 - a + b, 6.0 - a + b, 4.0 - a, 5.5 + c - a],
        [0.0, 0.5, 6.5 + b - c, 7.5 + a - c, 5.0 - c, 1.5 - c, 5.0 + a - c, 5.0 + b - c],
        [0.0, 0.5, 2.0 - a, 7.0 - b, 1.0 - c, 5.5 - c, 4.5 - b, 0.5 - a],
        [0.0, 0.5, 2.5 - b, 8.0 - b + c, 6.5 - b + a, 3.0 - b + a, 5.5 - b + c, 1.0 - b],
        [0.0, 0.5, 3.0 + a - c, 4.5 + a, 2.5 - b + a, 7.0 - b + a, 2.0 + a, 1.5 + a - c],
        [0.0, 0.5, 3.5 - b + c, 3.5 + c - a, 7.0 + c, 3.5 + c, 1.0 + c - a, 2.0 - b + c],
    ]
}

/// The eight fourth-form sequences `x_k = e^{i2π·s_k/8}`; element 0 is the
/// `C0c` representative.
pub fn c0c_sequences(t: &C0cTriple) -> Result<Vec<ComplexSequence>> {
    let res = t.residual_inf();
    if res.is_nan() || res >= C0C_RESIDUAL_LIMIT {
        return Err(Error::InvalidParameter(format!(
            "triple residual {res:e} exceeds {C0C_RESIDUAL_LIMIT:e}"
        )));
    }
    c0c_s_vectors(t)
        .iter()
        .map(|s| Ok(SRepresentation::new(s.to_vec())?.to_complex()))
        .collect()
}

/// The one-parameter length-8 subsets obtained from the decimation-invariant
/// forms. All of them are Popovic rows or conjugated rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PopovicSubset {
    S11,
    S12,
    S21,
    S22,
    S31,
    S32,
    S33,
    S34,
}

impl PopovicSubset {
    pub const ALL: [PopovicSubset; 8] = [
        Self::S11,
        Self::S12,
        Self::S21,
        Self::S22,
        Self::S31,
        Self::S32,
        Self::S33,
        Self::S34,
    ];

    /// The Popovic row this subset reproduces.
    pub fn row(&self) -> PopovicRow {
        let (row, conjugate) = match self {
            Self::S11 => (2, false),
            Self::S12 => (2, true),
            Self::S21 => (4, false),
            Self::S22 => (4, true),
            Self::S31 => (1, false),
            Self::S32 => (1, true),
            Self::S33 => (3, false),
            Self::S34 => (3, true),
        };
        PopovicRow { row, conjugate }
    }

    /// Decimation factor that fixes every member.
    pub fn fixing_decimation(&self) -> usize {
        match self {
            Self::S11 | Self::S12 => 7,
            Self::S21 | Self::S22 => 3,
            _ => 5,
        }
    }
}

/// Members of `S11`…`S34` with free phase `θ`.
pub fn s8_popovic_subsets(set: PopovicSubset, theta: f64) -> ComplexSequence {
    set.row().sequence(theta)
}

/// Length-8 set identifier, including the zero-degree-of-freedom members.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum S8Set {
    Popovic(PopovicSubset),
    /// The `C0a` representative.
    S13,
    /// Member `0..8` of `C0b`.
    S23(usize),
}

impl std::str::FromStr for S8Set {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().trim_start_matches(['S', 's']);
        let (id, index) = match s.split_once(':') {
            Some((id, idx)) => (id, Some(idx)),
            None => (s, None),
        };
        let set = match id {
            "11" => Self::Popovic(PopovicSubset::S11),
            "12" => Self::Popovic(PopovicSubset::S12),
            "13" => Self::S13,
            "21" => Self::Popovic(PopovicSubset::S21),
            "22" => Self::Popovic(PopovicSubset::S22),
            "23" => {
                let i = index
                    .unwrap_or("0")
                    .parse::<usize>()
                    .map_err(|e| Error::InvalidParameter(format!("S23 index: {e}")))?;
                if i >= 8 {
                    return Err(Error::InvalidParameter(format!("S23 index must be < 8, got {i}")));
                }
                Self::S23(i)
            }
            "31" => Self::Popovic(PopovicSubset::S31),
            "32" => Self::Popovic(PopovicSubset::S32),
            "33" => Self::Popovic(PopovicSubset::S33),
            "34" => Self::Popovic(PopovicSubset::S34),
            other => return Err(Error::InvalidParameter(format!("unknown length-8 set '{other}'"))),
        };
        Ok(set)
    }
}

pub fn s8_sequence(set: S8Set, theta: f64) -> ComplexSequence {
    match set {
        S8Set::Popovic(p) => s8_popovic_subsets(p, theta),
        S8Set::S13 => c0a_sequence(),
        S8Set::S23(i) => c0b_sequences().swap_remove(i),
    }
}

/// A fully parameterized family member.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilySpec {
    ZadoffChu { n: usize, u: usize, q: usize },
    Popovic { n: usize, m: usize, w: Vec<f64>, u: usize, q: usize },
    Wiener { n: usize, m: usize },
    P4 { n: usize },
    Bjorck { n: usize },
    Cazac4 { variant: Cazac4Variant, theta: f64 },
    S8 { set: S8Set, theta: f64 },
    C0a,
    C0b { index: usize },
    C0c { index: usize, triple: C0cTriple },
}

impl FamilySpec {
    pub fn n(&self) -> usize {
        match self {
            Self::ZadoffChu { n, .. }
            | Self::Popovic { n, .. }
            | Self::Wiener { n, .. }
            | Self::P4 { n }
            | Self::Bjorck { n } => *n,
            Self::Cazac4 { .. } => 4,
            _ => 8,
        }
    }

    pub fn build(&self) -> Result<ComplexSequence> {
        Ok(match self {
            Self::ZadoffChu { n, u, q } => unit_phases(&zadoff_chu(*n, *u, *q)?),
            Self::Popovic { n, m, w, u, q } => unit_phases(&popovic(*n, *m, w, *u, *q)?),
            Self::Wiener { n, m } => unit_phases(&wiener(*n, *m)?),
            Self::P4 { n } => unit_phases(&p4(*n)?),
            Self::Bjorck { n } => unit_phases(&bjorck(*n)?),
            Self::Cazac4 { variant, theta } => cazac4(*variant, *theta),
            Self::S8 { set, theta } => s8_sequence(*set, *theta),
            Self::C0a => c0a_sequence(),
            Self::C0b { index } => {
                if *index >= 8 {
                    return Err(Error::InvalidParameter(format!("C0b index must be < 8, got {index}")));
                }
                c0b_sequences().swap_remove(*index)
            }
            Self::C0c { index, triple } => {
                if *index >= 8 {
                    return Err(Error::InvalidParameter(format!("C0c index must be < 8, got {index}")));
                }
                c0c_sequences(triple)?.swap_remove(*index)
            }
        })
    }
}
