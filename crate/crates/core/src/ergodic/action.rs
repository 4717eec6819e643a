use std::f64::consts::TAU;

use num_complex::Complex64 as C;
use rand::Rng;
use serde::Serialize;

use crate::group::{folner_set, Elem, FiniteSubset, GroupModel, Schedule};
use crate::ncalg::{random_hermitian, Matrix};
use crate::report::Check;

use super::ErgodicError;

/// A measure-preserving action of `Zᵈ`.
#[derive(Clone, Debug)]
pub enum Action {
    /// `Z` on `𝕄_d` by `x ↦ uⁿxu⁻ⁿ`, with `u = V·diag(e^{iθ})·V*`.
    Conjugation { v: Matrix, theta: Vec<f64> },
    /// `Zᵈ` on `ℓ∞(∏ Z/Nᵢ)` by `x ↦ x(· + g)`.
    Translation { periods: Vec<usize> },
}

/// Element of the algebra an [`Action`] acts on.
#[derive(Clone, Debug, PartialEq)]
pub enum Observable {
    Matrix(Matrix),
    /// Row-major values on the torus grid.
    Grid(Vec<f64>),
}

impl Observable {
    pub fn sub(&self, o: &Observable) -> Result<Observable, ErgodicError> {
        match (self, o) {
            (Observable::Matrix(a), Observable::Matrix(b)) if a.dim() == b.dim() => Ok(Observable::Matrix(a - b)),
            (Observable::Grid(a), Observable::Grid(b)) if a.len() == b.len() => {
                Ok(Observable::Grid(a.iter().zip(b).map(|(x, y)| x - y).collect()))
            }
            _ => Err(ErgodicError::Precondition("observables of different shapes".into())),
        }
    }

    /// Operator norm.
    pub fn norm(&self) -> Result<f64, ErgodicError> {
        match self {
            Observable::Matrix(m) => Ok(m.op_norm()?),
            Observable::Grid(v) => Ok(v.iter().fold(0.0, |a, x| a.max(x.abs()))),
        }
    }

    /// Normalized trace.
    pub fn trace(&self) -> C {
        match self {
            Observable::Matrix(m) => m.trace() / m.dim() as f64,
            Observable::Grid(v) => C::new(v.iter().sum::<f64>() / v.len() as f64, 0.0),
        }
    }
}

fn phases(theta: &[f64], n: f64) -> Matrix {
    let mut m = Matrix::zeros(theta.len());
    for (i, t) in theta.iter().enumerate() {
        m[(i, i)] = C::from_polar(1.0, n * t);
    }
    m
}

impl Action {
    /// `u = diag(e^{iθ})`.
    pub fn diagonal(theta: Vec<f64>) -> Self {
        Action::Conjugation { v: Matrix::identity(theta.len()), theta }
    }

    /// Random eigenbasis with angles jittered around `2π(k + ½)/d`.
    pub fn generic_unitary(rng: &mut impl Rng, d: usize) -> Result<Self, ErgodicError> {
        let v = random_hermitian(rng, d).eigh()?.vectors;
        let theta = (0..d).map(|k| TAU * (k as f64 + 0.25 + 0.5 * rng.gen::<f64>()) / d as f64).collect();
        Ok(Action::Conjugation { v, theta })
    }

    pub fn translation(periods: Vec<usize>) -> Result<Self, ErgodicError> {
        if periods.is_empty() || periods.contains(&0) {
            return Err(ErgodicError::Precondition("periods must be positive".into()));
        }
        Ok(Action::Translation { periods })
    }

    pub fn model(&self) -> GroupModel {
        match self {
            Action::Conjugation { .. } => GroupModel::Zd(1),
            Action::Translation { periods } => GroupModel::Zd(periods.len()),
        }
    }

    fn check(&self, x: &Observable) -> Result<(), ErgodicError> {
        let ok = match (self, x) {
            (Action::Conjugation { theta, .. }, Observable::Matrix(m)) => m.dim() == theta.len(),
            (Action::Translation { periods }, Observable::Grid(v)) => v.len() == periods.iter().product::<usize>(),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(ErgodicError::Precondition("observable does not match the action".into()))
        }
    }

    fn grid_shift(periods: &[usize], v: &[f64], g: &[i64]) -> Vec<f64> {
        let total = v.len();
        let mut out = vec![0.0; total];
        let mut t = vec![0usize; periods.len()];
        for slot in out.iter_mut() {
            let mut idx = 0usize;
            for (i, &n) in periods.iter().enumerate() {
                let c = (t[i] as i64 + g[i]).rem_euclid(n as i64) as usize;
                idx = idx * n + c;
            }
            *slot = v[idx];
            for i in (0..periods.len()).rev() {
                t[i] += 1;
                if t[i] < periods[i] {
                    break;
                }
                t[i] = 0;
            }
        }
        out
    }

    /// `α_g(x)`.
    pub fn apply(&self, g: &Elem, x: &Observable) -> Result<Observable, ErgodicError> {
        self.check(x)?;
        self.model().validate(g)?;
        match (self, x) {
            (Action::Conjugation { v, theta }, Observable::Matrix(m)) => {
                let n = g.coords()[0] as f64;
                let u = v * &(&phases(theta, n) * &v.adjoint());
                Ok(Observable::Matrix(&(&u * m) * &u.adjoint()))
            }
            (Action::Translation { periods }, Observable::Grid(vals)) => Ok(Observable::Grid(Self::grid_shift(periods, vals, g.coords()))),
            _ => unreachable!(),
        }
    }

    /// `|F|⁻¹ Σ_{g∈F} α_g(x)`, summed term by term.
    pub fn average(&self, fset: &FiniteSubset, x: &Observable) -> Result<Observable, ErgodicError> {
        self.check(x)?;
        self.model().check_same(&fset.model())?;
        if fset.is_empty() {
            return Err(ErgodicError::Precondition("empty averaging set".into()));
        }
        let w = 1.0 / fset.len() as f64;
        match (self, x) {
            (Action::Conjugation { v, theta }, Observable::Matrix(m)) => {
                let d = theta.len();
                let y = &(&v.adjoint() * m) * v;
                let mut out = Matrix::zeros(d);
                for a in 0..d {
                    for b in 0..d {
                        let phi = theta[a] - theta[b];
                        let s: C = fset.iter().map(|g| C::from_polar(1.0, g.coords()[0] as f64 * phi)).sum();
                        out[(a, b)] = y[(a, b)] * s * w;
                    }
                }
                Ok(Observable::Matrix(&(v * &out) * &v.adjoint()))
            }
            (Action::Translation { periods }, Observable::Grid(vals)) => {
                // Group translates by residue.
                let mut mult: std::collections::BTreeMap<Vec<i64>, usize> = Default::default();
                for g in fset {
                    let r: Vec<i64> = g.coords().iter().zip(periods).map(|(c, &n)| c.rem_euclid(n as i64)).collect();
                    *mult.entry(r).or_default() += 1;
                }
                let mut out = vec![0.0; vals.len()];
                for (r, c) in mult {
                    let s = Self::grid_shift(periods, vals, &r);
                    for (o, v) in out.iter_mut().zip(s) {
                        *o += c as f64 * v;
                    }
                }
                Ok(Observable::Grid(out.into_iter().map(|v| v * w).collect()))
            }
            _ => unreachable!(),
        }
    }

    /// `α_gα_h = α_{gh}` and trace invariance on the given words.
    pub fn consistency_checks(&self, x: &Observable, words: &[(Elem, Elem)]) -> Result<Vec<Check>, ErgodicError> {
        let model = self.model();
        let mut hom: f64 = 0.0;
        let mut tr: f64 = 0.0;
        let t0 = x.trace();
        for (g, h) in words {
            let lhs = self.apply(g, &self.apply(h, x)?)?;
            let rhs = self.apply(&model.multiply(g, h), x)?;
            hom = hom.max(lhs.sub(&rhs)?.norm()?);
            tr = tr.max((rhs.trace() - t0).norm());
        }
        let scale = x.norm()?.max(1.0);
        Ok(vec![
            Check::le("action_homomorphism", "α_gα_h = α_{gh}", hom, 0.0, 1e-10 * scale),
            Check::le("action_trace", "τ∘α_g = τ", tr, 0.0, 1e-10 * scale),
        ])
    }
}

/// Conditional expectation onto the fixed-point algebra.
#[derive(Clone, Debug)]
pub struct FixedPointProjection {
    action: Action,
    /// Eigenvalue cluster of each basis vector, for conjugations.
    cluster: Vec<usize>,
}

pub fn fixed_point_projection(action: &Action) -> FixedPointProjection {
    let cluster = match action {
        Action::Conjugation { theta, .. } => {
            let mut ids: Vec<usize> = Vec::with_capacity(theta.len());
            for (i, t) in theta.iter().enumerate() {
                let same = (0..i).find(|&j| {
                    let dphi = (t - theta[j]).rem_euclid(TAU);
                    dphi.min(TAU - dphi) <= 1e-9
                });
                ids.push(same.map(|j| ids[j]).unwrap_or(i));
            }
            ids
        }
        Action::Translation { .. } => Vec::new(),
    };
    FixedPointProjection { action: action.clone(), cluster }
}

impl FixedPointProjection {
    /// Pinching onto the eigenspaces of `u`, or the mean for translations.
    pub fn apply(&self, x: &Observable) -> Result<Observable, ErgodicError> {
        self.action.check(x)?;
        match (&self.action, x) {
            (Action::Conjugation { v, .. }, Observable::Matrix(m)) => {
                let mut y = &(&v.adjoint() * m) * v;
                for a in 0..m.dim() {
                    for b in 0..m.dim() {
                        if self.cluster[a] != self.cluster[b] {
                            y[(a, b)] = C::new(0.0, 0.0);
                        }
                    }
                }
                Ok(Observable::Matrix(&(v * &y) * &v.adjoint()))
            }
            (Action::Translation { .. }, Observable::Grid(vals)) => {
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                Ok(Observable::Grid(vec![mean; vals.len()]))
            }
            _ => unreachable!(),
        }
    }

    /// `P² = P` and `P∘α_g = P` on `x` for each generator.
    pub fn checks(&self, x: &Observable) -> Result<Vec<Check>, ErgodicError> {
        let px = self.apply(x)?;
        let idem = self.apply(&px)?.sub(&px)?.norm()?;
        let mut inv: f64 = 0.0;
        let mut fixed: f64 = 0.0;
        for g in self.action.model().generators() {
            inv = inv.max(self.apply(&self.action.apply(&g, x)?)?.sub(&px)?.norm()?);
            fixed = fixed.max(self.action.apply(&g, &px)?.sub(&px)?.norm()?);
        }
        let scale = x.norm()?.max(1.0);
        Ok(vec![
            Check::le("fixed_idempotent", "P² = P", idem, 0.0, 1e-10 * scale),
            Check::le("fixed_invariant", "P∘α_g = P", inv, 0.0, 1e-10 * scale),
            Check::le("fixed_range", "α_g∘P = P", fixed, 0.0, 1e-10 * scale),
        ])
    }
}

/// `‖|F|⁻¹ Σ_{j<L} uʲxu⁻ʲ − Px‖_∞` from the closed-form geometric sum.
pub fn geometric_sum_oracle(v: &Matrix, theta: &[f64], x: &Matrix, l: i64) -> Result<f64, ErgodicError> {
    let d = theta.len();
    let y = &(&v.adjoint() * x) * v;
    let mut out = Matrix::zeros(d);
    for a in 0..d {
        for b in 0..d {
            let phi = theta[a] - theta[b];
            let z = C::from_polar(1.0, phi);
            if (z - 1.0).norm() <= 1e-9 {
                continue;
            }
            let s = (C::from_polar(1.0, l as f64 * phi) - 1.0) / ((z - 1.0) * l as f64);
            out[(a, b)] = y[(a, b)] * s;
        }
    }
    Ok((&(v * &out) * &v.adjoint()).op_norm()?)
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub size: usize,
    /// `‖𝔸ₙx − Px‖_∞`; with `e = 1` this is both the a.u. and b.a.u. quantity.
    pub distance: f64,
    pub oracle: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub threshold: f64,
    /// Rows where the distance did not decrease.
    pub non_monotone: Vec<usize>,
    pub checks: Vec<Check>,
}

/// Distances `‖𝔸_{Fₙ}x − Px‖_∞` along the canonical Følner sets of `schedule`.
pub fn ergodic_converge(
    action: &Action,
    x: &Observable,
    schedule: &Schedule,
    depth: usize,
    threshold: f64,
) -> Result<ConvergenceReport, ErgodicError> {
    let model = action.model();
    let p = fixed_point_projection(action);
    let px = p.apply(x)?;
    let mut rows = Vec::new();
    let mut checks = p.checks(x)?;
    let mut oracle_gap: f64 = 0.0;
    for n in 0..=depth {
        let fset = folner_set(model, n, schedule)
            .ok_or_else(|| ErgodicError::Precondition(format!("schedule has no set at level {n}")))?;
        let an = action.average(&fset, x)?;
        let distance = an.sub(&px)?.norm()?;
        let oracle = match (action, x) {
            (Action::Conjugation { v, theta }, Observable::Matrix(m)) => {
                let o = geometric_sum_oracle(v, theta, m, fset.len() as i64)?;
                oracle_gap = oracle_gap.max((o - distance).abs());
                Some(o)
            }
            _ => None,
        };
        rows.push(ConvergenceRow { n, size: fset.len(), distance, oracle });
    }
    let non_monotone: Vec<usize> = rows.windows(2).filter(|w| w[1].distance > w[0].distance + 1e-12).map(|w| w[1].n).collect();
    if matches!(action, Action::Conjugation { .. }) {
        checks.push(Check::le("ergodic_oracle", "‖𝔸ₙx − Px‖ matches the geometric-sum closed form", oracle_gap, 0.0, 1e-10));
    }
    let last = rows.last().map(|r| r.distance).unwrap_or(f64::INFINITY);
    checks.push(Check::le("ergodic_final", "‖𝔸_Nx − Px‖_∞ ≤ threshold", last, threshold, 0.0));
    checks.push(
        Check::le("ergodic_trend", "‖𝔸ₙx − Px‖ non-increasing", non_monotone.len() as f64, 0.0, 0.0)
            .measured_only()
            .with_detail(format!("increases at n = {non_monotone:?}")),
    );
    Ok(ConvergenceReport { rows, threshold, non_monotone, checks })
}
