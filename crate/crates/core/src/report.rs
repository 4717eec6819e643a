//! Uniform check rows shared by the verification suites.

use serde::Serialize;

/// One verified claim. Only `asserted` rows decide pass/fail.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    /// The inequality or identity being checked.
    pub claim: String,
    /// Whether the hypotheses of the claim held on this input, when applicable.
    pub hypothesis: Option<bool>,
    pub measured: f64,
    pub bound: f64,
    pub holds: bool,
    pub asserted: bool,
    pub detail: String,
}

impl Check {
    /// `measured ≤ bound + tol`.
    pub fn le(name: &str, claim: &str, measured: f64, bound: f64, tol: f64) -> Self {
        Check {
            name: name.into(),
            claim: claim.into(),
            hypothesis: None,
            measured,
            bound,
            holds: measured <= bound + tol,
            asserted: true,
            detail: String::new(),
        }
    }

    /// A boolean outcome recorded as `measured = 1/0` against `bound = 1`.
    pub fn flag(name: &str, claim: &str, holds: bool) -> Self {
        Check {
            name: name.into(),
            claim: claim.into(),
            hypothesis: None,
            measured: if holds { 1.0 } else { 0.0 },
            bound: 1.0,
            holds,
            asserted: true,
            detail: String::new(),
        }
    }

    pub fn measured_only(mut self) -> Self {
        self.asserted = false;
        self
    }

    pub fn with_hypothesis(mut self, h: bool) -> Self {
        self.hypothesis = Some(h);
        self
    }

    pub fn with_detail(mut self, d: impl Into<String>) -> Self {
        self.detail = d.into();
        self
    }

    pub fn failed(&self) -> bool {
        self.asserted && !self.holds
    }
}

/// True when every asserted row holds.
pub fn all_hold(rows: &[Check]) -> bool {
    rows.iter().all(|r| !r.failed())
}
