use serde::{Deserialize, Serialize};

use super::{boundary, excess, le_scaled, ratio, FiniteSubset, GroupError, Q};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClauseKind {
    Invariant,
    BoundaryInvariant,
}

/// One clause `(kind, ε, K)` of an invariance condition.
#[derive(Clone, Debug)]
pub struct Clause {
    pub kind: ClauseKind,
    pub eps: Q,
    pub k: FiniteSubset,
}

/// A finite conjunction of invariance clauses.
#[derive(Clone, Debug, Default)]
pub struct InvarianceCondition {
    pub clauses: Vec<Clause>,
}

impl InvarianceCondition {
    pub fn new(clauses: Vec<Clause>) -> Result<Self, GroupError> {
        for c in &clauses {
            if c.eps <= Q::from_integer(0.into()) {
                return Err(GroupError::Degenerate("clause with non-positive epsilon".into()));
            }
            if c.k.is_empty() {
                return Err(GroupError::Degenerate("clause with empty K".into()));
            }
        }
        Ok(InvarianceCondition { clauses })
    }

    pub fn single(kind: ClauseKind, eps: Q, k: FiniteSubset) -> Result<Self, GroupError> {
        Self::new(vec![Clause { kind, eps, k }])
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }
}

/// Outcome of one invariance test, with exact counts and ratios.
///
/// For [`ClauseKind::Invariant`] the counts are `|E·K ∖ E|` and `|E·K⁻¹ ∖ E|`;
/// for [`ClauseKind::BoundaryInvariant`] the single count is `|∂_K(E)|`.
#[derive(Clone, Debug, Serialize)]
pub struct InvarianceReport {
    pub kind: ClauseKind,
    pub holds: bool,
    pub size: usize,
    #[serde(serialize_with = "super::ser_q")]
    pub eps: Q,
    pub counts: Vec<usize>,
    #[serde(serialize_with = "super::ser_q_vec")]
    pub ratios: Vec<Q>,
}

impl InvarianceReport {
    /// Largest measured ratio.
    pub fn worst(&self) -> Q {
        self.ratios.iter().max().cloned().unwrap_or_else(|| Q::from_integer(0.into()))
    }
}

pub type ClauseReport = InvarianceReport;

#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub holds: bool,
    pub clauses: Vec<ClauseReport>,
    pub warnings: Vec<String>,
}

fn nonempty(e: &FiniteSubset) -> Result<(), GroupError> {
    if e.is_empty() {
        Err(GroupError::Degenerate("invariance of an empty set".into()))
    } else {
        Ok(())
    }
}

/// `|E·K ∖ E| ≤ ε|E|` and `|E·K⁻¹ ∖ E| ≤ ε|E|`.
pub fn is_invariant(e: &FiniteSubset, eps: &Q, k: &FiniteSubset) -> Result<InvarianceReport, GroupError> {
    nonempty(e)?;
    let a = excess(e, k)?;
    let b = excess(e, &k.inverse())?;
    let n = e.len();
    Ok(InvarianceReport {
        kind: ClauseKind::Invariant,
        holds: le_scaled(a, eps, n) && le_scaled(b, eps, n),
        size: n,
        eps: eps.clone(),
        counts: vec![a, b],
        ratios: vec![ratio(a, n), ratio(b, n)],
    })
}

/// `|∂_K(E)| ≤ ε|E|`.
pub fn is_boundary_invariant(e: &FiniteSubset, eps: &Q, k: &FiniteSubset) -> Result<InvarianceReport, GroupError> {
    nonempty(e)?;
    let a = boundary(k, e)?.len();
    let n = e.len();
    Ok(InvarianceReport {
        kind: ClauseKind::BoundaryInvariant,
        holds: le_scaled(a, eps, n),
        size: n,
        eps: eps.clone(),
        counts: vec![a],
        ratios: vec![ratio(a, n)],
    })
}

/// Evaluates every clause of `cond` on `e`.
pub fn check_condition(e: &FiniteSubset, cond: &InvarianceCondition) -> Result<ConditionReport, GroupError> {
    if cond.is_empty() {
        return Ok(ConditionReport { holds: true, clauses: vec![], warnings: vec!["empty condition is trivially satisfied".into()] });
    }
    let mut clauses = Vec::with_capacity(cond.clauses.len());
    for c in &cond.clauses {
        clauses.push(match c.kind {
            ClauseKind::Invariant => is_invariant(e, &c.eps, &c.k)?,
            ClauseKind::BoundaryInvariant => is_boundary_invariant(e, &c.eps, &c.k)?,
        });
    }
    Ok(ConditionReport { holds: clauses.iter().all(|r| r.holds), clauses, warnings: vec![] })
}
