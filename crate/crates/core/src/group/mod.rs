//! Exact arithmetic for the discrete amenable groups Zᵈ, the discrete
//! Heisenberg group and the lamplighter group Z/2 ≀ Z, together with the
//! set-level geometry (products, boundaries, invariance) built on top.

mod dense;
mod folner;
mod geometry;
mod invariance;
mod locator;
mod subset;
mod text;

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

pub use folner::{folner_set, folner_shape, folner_size, word_ball, Schedule};
pub use geometry::{
    boundary, boundary_by_definition, closure, core_translates, excess, interior, product_set,
};
pub use invariance::{
    check_condition, is_boundary_invariant, is_invariant, Clause, ClauseKind, ClauseReport,
    ConditionReport, InvarianceCondition, InvarianceReport,
};
pub use locator::Locator;
pub use subset::FiniteSubset;
pub use text::{parse_subset, write_subset};

/// Exact rationals used for every ε in this crate.
pub type Q = BigRational;

/// Builds the rational `num/den`.
pub fn q(num: i64, den: i64) -> Q {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Exact test `count ≤ eps · total`.
pub fn le_scaled(count: usize, eps: &Q, total: usize) -> bool {
    BigRational::from_integer(BigInt::from(count)) <= eps * BigRational::from_integer(BigInt::from(total))
}

/// Exact ratio `num / den`; `den` must be positive.
pub fn ratio(num: usize, den: usize) -> Q {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Renders a rational as `a/b` (or `a` when integral).
pub fn q_str(x: &Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub(crate) fn ser_q<S: serde::Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&q_str(x))
}

pub(crate) fn ser_q_vec<S: serde::Serializer>(x: &[Q], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(x.len()))?;
    for v in x {
        seq.serialize_element(&q_str(v))?;
    }
    seq.end()
}

/// Lossy conversion for display.
pub fn q_f64(x: &Q) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}

/// Parses `a/b`, `a` or a finite decimal literal into an exact rational.
pub fn parse_q(s: &str) -> Option<Q> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let a: BigInt = a.trim().parse().ok()?;
        let b: BigInt = b.trim().parse().ok()?;
        if b == BigInt::from(0) {
            return None;
        }
        return Some(BigRational::new(a, b));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.starts_with('-');
        let digits = format!("{}{}", int.trim_start_matches('-'), frac);
        let n: BigInt = digits.parse().ok()?;
        let d = num_traits::pow(BigInt::from(10), frac.len());
        let r = BigRational::new(n, d);
        return Some(if neg { -r } else { r });
    }
    let n: BigInt = s.parse().ok()?;
    Some(BigRational::from_integer(n))
}

/// Errors raised by group-level operations.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GroupError {
    #[error("model mismatch: {left} vs {right}")]
    ModelMismatch { left: String, right: String },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid element for {model}: {detail}")]
    InvalidElement { model: String, detail: String },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Canonical encoding of a group element.
///
/// * Zᵈ: the coordinate tuple.
/// * Heisenberg: `(a, b, c)`.
/// * Lamplighter: `[cursor, lamp₁, …, lampₘ]` with lamp positions strictly increasing.
///
/// Equality of elements is equality of encodings, and the derived order is the
/// canonical order used for every tie-break.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Elem(pub SmallVec<[i64; 4]>);

impl Elem {
    pub fn new(coords: &[i64]) -> Self {
        Elem(SmallVec::from_slice(coords))
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }
}

impl fmt::Debug for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0.as_slice())
    }
}

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// A countable discrete group with exact multiplication.
///
/// Counting measure is bi-invariant, so the modular function is the constant
/// [`GroupModel::MODULAR_FUNCTION`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupModel {
    /// Zᵈ under addition.
    Zd(usize),
    /// Integer Heisenberg group, `(a,b,c)(a',b',c') = (a+a', b+b', c+c'+ab')`.
    Heisenberg,
    /// Lamplighter Z/2 ≀ Z, `(f,t)(f',t') = (f Δ (f'+t), t+t')`.
    Lamplighter,
}

impl GroupModel {
    /// Δ ≡ 1 on every discrete group; the left-invariant measure coincides with counting measure.
    pub const MODULAR_FUNCTION: i64 = 1;

    pub fn name(&self) -> String {
        match self {
            GroupModel::Zd(1) => "Z".to_string(),
            GroupModel::Zd(d) => format!("Z{d}"),
            GroupModel::Heisenberg => "heisenberg".to_string(),
            GroupModel::Lamplighter => "lamplighter".to_string(),
        }
    }

    /// Parses `Z`, `Z2`, `Z^3`, `heisenberg`, `lamplighter`.
    pub fn parse(s: &str) -> Option<GroupModel> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "heisenberg" | "h3" => return Some(GroupModel::Heisenberg),
            "lamplighter" | "z2wrz" => return Some(GroupModel::Lamplighter),
            _ => {}
        }
        let rest = t.strip_prefix('z')?;
        let rest = rest.strip_prefix('^').unwrap_or(rest);
        if rest.is_empty() {
            return Some(GroupModel::Zd(1));
        }
        let d: usize = rest.parse().ok()?;
        (1..=8).contains(&d).then_some(GroupModel::Zd(d))
    }

    pub fn identity(&self) -> Elem {
        match self {
            GroupModel::Zd(d) => Elem(SmallVec::from_elem(0, *d)),
            GroupModel::Heisenberg => Elem::new(&[0, 0, 0]),
            GroupModel::Lamplighter => Elem::new(&[0]),
        }
    }

    pub fn multiply(&self, x: &Elem, y: &Elem) -> Elem {
        match self {
            GroupModel::Zd(_) => Elem(x.0.iter().zip(y.0.iter()).map(|(a, b)| a + b).collect()),
            GroupModel::Heisenberg => {
                let (a, b, c) = (x.0[0], x.0[1], x.0[2]);
                let (a2, b2, c2) = (y.0[0], y.0[1], y.0[2]);
                Elem::new(&[a + a2, b + b2, c + c2 + a * b2])
            }
            GroupModel::Lamplighter => {
                let t = x.0[0];
                let mut out: SmallVec<[i64; 4]> = SmallVec::with_capacity(x.0.len() + y.0.len() - 1);
                out.push(t + y.0[0]);
                let (f, g) = (&x.0[1..], &y.0[1..]);
                let (mut i, mut j) = (0, 0);
                while i < f.len() || j < g.len() {
                    let gj = g.get(j).map(|v| v + t);
                    match (f.get(i), gj) {
                        (Some(&a), Some(b)) => match a.cmp(&b) {
                            Ordering::Less => {
                                out.push(a);
                                i += 1;
                            }
                            Ordering::Greater => {
                                out.push(b);
                                j += 1;
                            }
                            Ordering::Equal => {
                                i += 1;
                                j += 1;
                            }
                        },
                        (Some(&a), None) => {
                            out.push(a);
                            i += 1;
                        }
                        (None, Some(b)) => {
                            out.push(b);
                            j += 1;
                        }
                        (None, None) => unreachable!(),
                    }
                }
                Elem(out)
            }
        }
    }

    pub fn inverse(&self, x: &Elem) -> Elem {
        match self {
            GroupModel::Zd(_) => Elem(x.0.iter().map(|a| -a).collect()),
            GroupModel::Heisenberg => {
                let (a, b, c) = (x.0[0], x.0[1], x.0[2]);
                Elem::new(&[-a, -b, -c + a * b])
            }
            GroupModel::Lamplighter => {
                let t = x.0[0];
                let mut out: SmallVec<[i64; 4]> = SmallVec::with_capacity(x.0.len());
                out.push(-t);
                out.extend(x.0[1..].iter().map(|p| p - t));
                Elem(out)
            }
        }
    }

    /// Symmetric generating set (identity excluded).
    pub fn generators(&self) -> Vec<Elem> {
        match self {
            GroupModel::Zd(d) => {
                let mut out = Vec::with_capacity(2 * d);
                for i in 0..*d {
                    for s in [-1, 1] {
                        let mut v = vec![0; *d];
                        v[i] = s;
                        out.push(Elem::new(&v));
                    }
                }
                out
            }
            GroupModel::Heisenberg => vec![
                Elem::new(&[1, 0, 0]),
                Elem::new(&[-1, 0, 0]),
                Elem::new(&[0, 1, 0]),
                Elem::new(&[0, -1, 0]),
            ],
            GroupModel::Lamplighter => vec![Elem::new(&[1]), Elem::new(&[-1]), Elem::new(&[0, 0])],
        }
    }

    /// Checks that `x` is a canonical encoding for this model.
    pub fn validate(&self, x: &Elem) -> Result<(), GroupError> {
        let bad = |detail: String| GroupError::InvalidElement { model: self.name(), detail };
        match self {
            GroupModel::Zd(d) if x.0.len() != *d => Err(bad(format!("expected {d} coordinates, got {}", x.0.len()))),
            GroupModel::Heisenberg if x.0.len() != 3 => Err(bad(format!("expected 3 coordinates, got {}", x.0.len()))),
            GroupModel::Lamplighter => {
                if x.0.is_empty() {
                    return Err(bad("missing cursor".into()));
                }
                if x.0[1..].windows(2).any(|w| w[0] >= w[1]) {
                    return Err(bad("lamp positions must be strictly increasing".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn check_same(&self, other: &GroupModel) -> Result<(), GroupError> {
        if self == other {
            Ok(())
        } else {
            Err(GroupError::ModelMismatch { left: self.name(), right: other.name() })
        }
    }
}
