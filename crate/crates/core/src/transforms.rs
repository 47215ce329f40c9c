//! CAZAC-invariant transforms, chains of them, and the length-8 classifier.
//!
//! A [`TransformChain`] is written outermost-first, `C∘M∘D∘T`, and applied
//! right-to-left: the last transform in the list acts first.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::families::{c0a_sequence, c0b_sequences, c0c_sequences, C0cTriple, PopovicRow};
use crate::metrics::discrepancy;
use crate::seqcore::{circular_distance, wrap_phase, ComplexSequence, Fourier};

/// Default classification tolerance, in radians.
pub const DEFAULT_TOL: f64 = 2e-2;

/// Inputs with `d` at or above this are not classified.
pub const CLASSIFY_D_LIMIT: f64 = 1e-2;

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    /// `e^{iθ}·x(k)`
    Rotation(f64),
    /// `x((k − r) mod n)`
    Translation(usize),
    /// `x(dk mod n)`, `gcd(d, n) = 1`
    Decimation(usize),
    /// `e^{i2πmk/n}·x(k)`
    Modulation(usize),
    /// `x*(k)` when set
    Conjugation(bool),
    /// Unitary DFT
    DiscreteFT,
}

pub fn apply(t: &Transform, x: &ComplexSequence) -> Result<ComplexSequence> {
    let n = x.len();
    let v = x.values();
    let out: Vec<Complex64> = match *t {
        Transform::Rotation(theta) => {
            if !theta.is_finite() {
                return Err(Error::InvalidParameter("rotation angle must be finite".into()));
            }
            let r = Complex64::from_polar(1.0, theta);
            v.iter().map(|z| z * r).collect()
        }
        Transform::Translation(r) => {
            let r = r % n;
            (0..n).map(|k| v[(k + n - r) % n]).collect()
        }
        Transform::Decimation(d) => {
            if d == 0 || gcd(d, n) != 1 {
                return Err(Error::InvalidParameter(format!(
                    "decimation factor {d} is not coprime with n={n}"
                )));
            }
            (0..n).map(|k| v[(d % n) * k % n]).collect()
        }
        Transform::Modulation(m) => {
            let m = m % n;
            (0..n)
                .map(|k| v[k] * Complex64::from_polar(1.0, TAU * ((m * k) % n) as f64 / n as f64))
                .collect()
        }
        Transform::Conjugation(true) => v.iter().map(|z| z.conj()).collect(),
        Transform::Conjugation(false) => v.to_vec(),
        Transform::DiscreteFT => return Ok(Fourier::new(n).forward(x)),
    };
    Ok(ComplexSequence::from_vec_unchecked(out))
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transform::Rotation(t) => write!(f, "R{t}"),
            Transform::Translation(r) => write!(f, "T{r}"),
            Transform::Decimation(d) => write!(f, "D{d}"),
            Transform::Modulation(m) => write!(f, "M{m}"),
            Transform::Conjugation(a) => write!(f, "C{}", u8::from(*a)),
            Transform::DiscreteFT => write!(f, "F"),
        }
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidParameter(format!("cannot parse transform '{s}'"));
        let mut chars = s.chars();
        let head = chars.next().ok_or_else(bad)?;
        let rest = chars.as_str();
        let int = || rest.parse::<usize>().map_err(|_| bad());
        Ok(match head.to_ascii_uppercase() {
            'R' => {
                let t: f64 = rest.parse().map_err(|_| bad())?;
                if !t.is_finite() {
                    return Err(bad());
                }
                Transform::Rotation(t)
            }
            'T' => Transform::Translation(int()?),
            'D' => Transform::Decimation(int()?),
            'M' => Transform::Modulation(int()?),
            'C' => match int()? {
                0 => Transform::Conjugation(false),
                1 => Transform::Conjugation(true),
                _ => return Err(bad()),
            },
            'F' if rest.is_empty() => Transform::DiscreteFT,
            _ => return Err(bad()),
        })
    }
}

/// Composition of transforms, written outermost first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransformChain {
    transforms: Vec<Transform>,
}

impl TransformChain {
    pub fn new(transforms: Vec<Transform>) -> Self {
        Self { transforms }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    /// `C_a∘M_m∘D_d∘T_r`.
    pub fn cmdt(a: bool, m: usize, d: usize, r: usize) -> Self {
        Self::new(vec![
            Transform::Conjugation(a),
            Transform::Modulation(m),
            Transform::Decimation(d),
            Transform::Translation(r),
        ])
    }

    pub fn transforms(&self) -> &[Transform] {
        &self.transforms
    }

    pub fn len(&self) -> usize {
        self.transforms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transforms.is_empty()
    }
}

impl fmt::Display for TransformChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.transforms.is_empty() {
            return write!(f, "I");
        }
        for (i, t) in self.transforms.iter().enumerate() {
            if i > 0 {
                write!(f, ".")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

impl FromStr for TransformChain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "I" {
            return Ok(Self::identity());
        }
        // '.' separates tokens only when a letter follows, so rotation angles
        // may carry a decimal point.
        let mut tokens = Vec::new();
        let mut start = 0;
        let bytes = s.as_bytes();
        for i in 0..bytes.len() {
            if bytes[i] == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_alphabetic) {
                tokens.push(&s[start..i]);
                start = i + 1;
            }
        }
        tokens.push(&s[start..]);
        tokens
            .into_iter()
            .map(str::parse)
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }
}

impl Serialize for TransformChain {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Apply `chain` right-to-left.
pub fn apply_chain(chain: &TransformChain, x: &ComplexSequence) -> Result<ComplexSequence> {
    chain
        .transforms
        .iter()
        .rev()
        .try_fold(x.clone(), |acc, t| apply(t, &acc))
}

/// Rotate so that the first element is real positive.
pub fn rotate_canonical(x: &ComplexSequence) -> ComplexSequence {
    let r = x[0].conj() / x[0].norm();
    if !r.is_finite() {
        return x.clone();
    }
    ComplexSequence::from_vec_unchecked(x.iter().map(|v| v * r).collect())
}

/// All chains `C_a∘M_m∘D_d∘T_r` with `a ∈ {0,1}`, `m, r ∈ 0..n` and `d`
/// coprime with `n`, ordered with `a` outermost and `r` innermost.
pub fn enumerate_chains(n: usize) -> Vec<TransformChain> {
    let decimations: Vec<usize> = (1..n.max(2)).filter(|&d| gcd(d, n) == 1).collect();
    let mut out = Vec::with_capacity(2 * n * n * decimations.len());
    for a in [false, true] {
        for m in 0..n {
            for &d in &decimations {
                for r in 0..n {
                    out.push(TransformChain::cmdt(a, m, d, r));
                }
            }
        }
    }
    out
}

/// Class kinds in classifier priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ClassKind {
    P,
    C0a,
    C0b,
    C0c,
}

impl ClassKind {
    pub const ALL: [ClassKind; 4] = [ClassKind::P, ClassKind::C0a, ClassKind::C0b, ClassKind::C0c];

    pub fn name(&self) -> &'static str {
        match self {
            ClassKind::P => "P",
            ClassKind::C0a => "C0a",
            ClassKind::C0b => "C0b",
            ClassKind::C0c => "C0c",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EquivalenceClass {
    Popovic { row: PopovicRow, theta: f64 },
    C0a,
    C0b,
    C0c,
    Unknown,
}

impl EquivalenceClass {
    pub fn kind(&self) -> Option<ClassKind> {
        match self {
            Self::Popovic { .. } => Some(ClassKind::P),
            Self::C0a => Some(ClassKind::C0a),
            Self::C0b => Some(ClassKind::C0b),
            Self::C0c => Some(ClassKind::C0c),
            Self::Unknown => None,
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind().map_or("Unknown", |k| k.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassLabel {
    pub class: EquivalenceClass,
    /// Chain mapping the input onto the class representative, up to a final
    /// rotation. `None` for `Unknown`.
    pub chain: Option<TransformChain>,
    /// Largest per-component phase distance to the matched pattern after the
    /// best global rotation; `NaN` for `Unknown`.
    pub match_error: f64,
}

struct Representatives {
    c0a: ComplexSequence,
    c0b: ComplexSequence,
    c0c: ComplexSequence,
}

fn representatives() -> &'static Representatives {
    static REPS: OnceLock<Representatives> = OnceLock::new();
    REPS.get_or_init(|| Representatives {
        c0a: c0a_sequence(),
        c0b: c0b_sequences().swap_remove(0),
        c0c: c0c_sequences(&C0cTriple::REFERENCE)
            .expect("reference triple is within the residual limit")
            .swap_remove(0),
    })
}

/// Representative sequence of a zero-degree-of-freedom class.
pub fn representative(kind: ClassKind) -> Option<ComplexSequence> {
    let reps = representatives();
    match kind {
        ClassKind::P => None,
        ClassKind::C0a => Some(reps.c0a.clone()),
        ClassKind::C0b => Some(reps.c0b.clone()),
        ClassKind::C0c => Some(reps.c0c.clone()),
    }
}

/// `arg Σ x(k)·conj(y(k))` over the given indices.
fn best_rotation(x: &[Complex64], y: &[Complex64], idx: impl Iterator<Item = usize>) -> f64 {
    idx.map(|k| x[k] * y[k].conj()).sum::<Complex64>().arg()
}

fn max_distance(x: &[Complex64], y: &[Complex64], alpha: f64) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| circular_distance(a.arg() - alpha, b.arg()))
        .fold(0.0, f64::max)
}

/// Phase mismatch to `rep` after the least-squares global rotation.
fn representative_error(x: &[Complex64], rep: &[Complex64]) -> f64 {
    let alpha = best_rotation(x, rep, 0..x.len());
    max_distance(x, rep, alpha)
}

/// Fit a length-8 sequence to a Popovic row. Returns `(θ̂, error)`.
fn popovic_fit(x: &[Complex64], row: &PopovicRow) -> (f64, f64) {
    let (even, odd) = row.pattern();
    let base: Vec<Complex64> = (0..8)
        .map(|k| if k % 2 == 0 { even[k / 2] } else { odd[k / 2] })
        .collect();
    let alpha = best_rotation(x, &base, (0..8).step_by(2));
    let beta = best_rotation(x, &base, (1..8).step_by(2));
    let theta = wrap_phase(beta - alpha);
    let e = Complex64::from_polar(1.0, theta);
    let target: Vec<Complex64> = (0..8)
        .map(|k| if k % 2 == 0 { base[k] } else { base[k] * e })
        .collect();
    (theta, max_distance(x, &target, alpha))
}

fn popovic_rows() -> impl Iterator<Item = PopovicRow> {
    (1..=4u8).flat_map(|row| [false, true].map(move |conjugate| PopovicRow { row, conjugate }))
}

fn best_popovic(x: &[Complex64]) -> (PopovicRow, f64, f64) {
    popovic_rows()
        .map(|row| {
            let (theta, err) = popovic_fit(x, &row);
            (row, theta, err)
        })
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .expect("eight candidate rows")
}

/// Free phase `θ̂` of `x` on the given Popovic row.
pub fn fitted_theta(x: &ComplexSequence, row: PopovicRow) -> Result<f64> {
    if x.len() != 8 {
        return Err(Error::LengthMismatch {
            expected: 8,
            got: x.len(),
        });
    }
    let (theta, err) = popovic_fit(x.values(), &row);
    if err.is_nan() || err > DEFAULT_TOL {
        return Err(Error::InvalidParameter(format!(
            "sequence does not match Popovic row {}{} (error {err:.3e} rad)",
            row.row,
            if row.conjugate { "*" } else { "" }
        )));
    }
    Ok(theta)
}

fn check_classifiable(x: &ComplexSequence) -> Result<()> {
    if x.len() != 8 {
        return Err(Error::LengthMismatch {
            expected: 8,
            got: x.len(),
        });
    }
    let d = discrepancy(x).d();
    if d.is_nan() || d >= CLASSIFY_D_LIMIT {
        return Err(Error::TooFarFromCazac {
            d,
            limit: CLASSIFY_D_LIMIT,
        });
    }
    Ok(())
}

fn match_kind(image: &[Complex64], kind: ClassKind, tol: f64) -> Option<(EquivalenceClass, f64)> {
    let reps = representatives();
    let (class, err) = match kind {
        ClassKind::P => {
            let (row, theta, err) = best_popovic(image);
            (EquivalenceClass::Popovic { row, theta }, err)
        }
        ClassKind::C0a => (EquivalenceClass::C0a, representative_error(image, reps.c0a.values())),
        ClassKind::C0b => (EquivalenceClass::C0b, representative_error(image, reps.c0b.values())),
        ClassKind::C0c => (EquivalenceClass::C0c, representative_error(image, reps.c0c.values())),
    };
    (err <= tol).then_some((class, err))
}

fn chain_images(x: &ComplexSequence) -> Result<Vec<(TransformChain, ComplexSequence)>> {
    enumerate_chains(8)
        .into_iter()
        .map(|c| {
            let y = apply_chain(&c, x)?;
            Ok((c, y))
        })
        .collect()
}

/// Classify a near-CAZAC length-8 sequence.
///
/// Every chain of [`enumerate_chains`] is tried; the first class in the
/// order `P, C0a, C0b, C0c` with a matching image wins, and within a class
/// the first chain in enumeration order is reported.
pub fn classify8(x: &ComplexSequence, tol: f64) -> Result<ClassLabel> {
    check_classifiable(x)?;
    let x = crate::seqcore::project_unit_circle(x);
    let images = chain_images(&x)?;
    for kind in ClassKind::ALL {
        for (chain, y) in &images {
            if let Some((class, match_error)) = match_kind(y.values(), kind, tol) {
                return Ok(ClassLabel {
                    class,
                    chain: Some(chain.clone()),
                    match_error,
                });
            }
        }
    }
    Ok(ClassLabel {
        class: EquivalenceClass::Unknown,
        chain: None,
        match_error: f64::NAN,
    })
}

/// All chains whose image of `x` matches `kind` within `tol`.
pub fn matching_chains(x: &ComplexSequence, kind: ClassKind, tol: f64) -> Result<Vec<TransformChain>> {
    check_classifiable(x)?;
    let x = crate::seqcore::project_unit_circle(x);
    Ok(chain_images(&x)?
        .into_iter()
        .filter(|(_, y)| match_kind(y.values(), kind, tol).is_some())
        .map(|(c, _)| c)
        .collect())
}
