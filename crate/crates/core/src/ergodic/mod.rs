//! The difference operators `𝔻ₙ = 𝔸ₙ − 𝔼ₙ` along a filtered Følner sequence,
//! their local and global estimates, and ergodic averages of concrete actions.

mod action;
mod weak;

use serde::Serialize;
use thiserror::Error;

use crate::czdec::{CZParts, CzError, Levels, ZetaResult};
use crate::group::{boundary, is_boundary_invariant, is_invariant, q_str, ratio, Elem, FiniteSubset, GroupError, Q};
use crate::ncalg::{averaging, lp_norm, NcError, OpFn};
use crate::report::Check;

pub use action::{
    ergodic_converge, fixed_point_projection, geometric_sum_oracle, Action, ConvergenceReport, ConvergenceRow,
    FixedPointProjection, Observable,
};
pub use weak::{
    admissible_split, maximal_projection, weak11_check, MaximalReport, SplitReport, SplitTerm, Weak11Report, Weak11Row,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ErgodicError {
    #[error(transparent)]
    Cz(#[from] CzError),
    #[error(transparent)]
    Nc(#[from] NcError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("admissible split stalled at step {step}: kept {kept:e} of {remaining:e}, guarantee {guarantee:e}")]
    SplitStalled { step: usize, kept: f64, remaining: f64, guarantee: f64 },
}

fn folner(levels: &Levels, n: usize) -> Result<&FiniteSubset, ErgodicError> {
    levels
        .folner
        .get(n)
        .ok_or_else(|| ErgodicError::Precondition(format!("no Følner set for level {n}; build the levels from a filtered sequence")))
}

/// `𝔻ₙf = 𝔸_{Fₙ}f − 𝔼ₙf`.
pub fn difference(f: &OpFn, n: usize, levels: &Levels) -> Result<OpFn, ErgodicError> {
    let a = averaging(f, folner(levels, n)?)?;
    let e = levels.expectation(n, f)?;
    Ok(a.sub(&e)?)
}

/// `(𝔻ₙf)_{n ≤ K}` with Rademacher sign vectors.
#[derive(Clone, Debug)]
pub struct DifferenceFamily {
    pub d_n: Vec<OpFn>,
}

impl DifferenceFamily {
    pub fn new(f: &OpFn, levels: &Levels) -> Result<Self, ErgodicError> {
        let d_n = (0..=levels.depth()).map(|n| difference(f, n, levels)).collect::<Result<_, _>>()?;
        Ok(DifferenceFamily { d_n })
    }

    pub fn len(&self) -> usize {
        self.d_n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d_n.is_empty()
    }

    /// `Σₙ εₙ 𝔻ₙ f`.
    pub fn signed(&self, signs: &[i8]) -> Result<OpFn, ErgodicError> {
        let mut acc = OpFn::zero(self.d_n[0].model, self.d_n[0].d);
        for (dn, &s) in self.d_n.iter().zip(signs) {
            for (x, m) in &dn.values {
                acc.add_at(x, m, s as f64);
            }
        }
        Ok(acc)
    }
}

/// All `2^len` sign vectors when `len ≤ 12`, otherwise `samples` seeded draws.
pub fn sign_vectors(len: usize, seed: u64, samples: usize) -> (Vec<Vec<i8>>, bool) {
    if len <= 12 {
        let all = (0..1u32 << len).map(|m| (0..len).map(|i| if m >> i & 1 == 1 { -1 } else { 1 }).collect()).collect();
        (all, true)
    } else {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let v = (0..samples).map(|_| (0..len).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect()).collect();
        (v, false)
    }
}

/// Exact scalar check of `‖1_E − 𝔸_K 1_E‖₁ ≤ 2ε|E|`.
#[derive(Clone, Debug, Serialize)]
pub struct InvarianceL1Report {
    pub hypothesis: bool,
    pub lhs: String,
    pub rhs: String,
    pub holds: bool,
    pub diagnostic: Option<String>,
}

pub fn invariance_l1_bound(e: &FiniteSubset, k: &FiniteSubset, eps: &Q) -> Result<InvarianceL1Report, ErgodicError> {
    let model = e.model();
    model.check_same(&k.model())?;
    if e.is_empty() || k.is_empty() {
        return Err(ErgodicError::Precondition("E and K must be nonempty".into()));
    }
    let hyp = is_invariant(e, eps, k)?;
    // 𝔸_K 1_E(x) = |xK ∩ E| / |K|, supported on E·K⁻¹.
    let kinv = k.inverse();
    let mut counts: rustc_hash::FxHashMap<Elem, usize> = rustc_hash::FxHashMap::default();
    for y in e {
        for g in &kinv {
            *counts.entry(model.multiply(y, g)).or_default() += 1;
        }
    }
    let kl = k.len();
    let mut num = 0usize;
    for (x, &c) in &counts {
        num += if e.contains(x) { kl - c } else { c };
    }
    for x in e {
        if !counts.contains_key(x) {
            num += kl;
        }
    }
    let lhs = ratio(num, kl);
    let rhs = Q::from_integer(2.into()) * eps * ratio(e.len(), 1);
    let holds = lhs <= rhs;
    Ok(InvarianceL1Report {
        hypothesis: hyp.holds,
        lhs: q_str(&lhs),
        rhs: q_str(&rhs),
        holds,
        diagnostic: (!hyp.holds).then(|| format!("E is not ({}, K)-invariant: ratios {:?}", q_str(eps), hyp.ratios.iter().map(q_str).collect::<Vec<_>>())),
    })
}

/// Points lying in an admissible atom at every level.
pub fn admissible_points(levels: &Levels) -> FiniteSubset {
    levels.window.filter(|x| (0..=levels.depth()).all(|k| levels.atom_of(k, x).map(|a| levels.admissible[k][a]).unwrap_or(false)))
}

fn is_admissible_fn(f: &OpFn, levels: &Levels) -> bool {
    f.values.keys().all(|x| (0..=levels.depth()).all(|k| levels.atom_of(k, x).map(|a| levels.admissible[k][a]).unwrap_or(false)))
}

fn pow2f(e: i64) -> f64 {
    2f64.powi(e as i32)
}

/// Local estimates for `𝔻ₙ` on `f` at level `k`.
///
/// `n < k`: `f` constant on atoms of `𝒫_k`; for `p = 1` and `f` carried by a
/// single atom the bound `‖𝔻ₙf‖₁ ≤ 2·2^{n−k}‖f‖₁` is asserted, otherwise the
/// ratio to `2^{(n−k)/p}` is measured. `n ≥ k`: `𝔼_k f = 0`; asserts
/// `‖𝔻ₙf‖_p ≤ 2^{k−n}‖f‖_p`.
pub fn local_estimate_report(f: &OpFn, n: usize, k: usize, p: f64, levels: &Levels) -> Result<Check, ErgodicError> {
    let depth = levels.depth();
    if n > depth || k > depth {
        return Err(ErgodicError::Precondition(format!("levels n={n}, k={k} exceed depth {depth}")));
    }
    let scale = f.max_abs().max(1.0);
    let fp = lp_norm(f, p)?;
    let admissible = is_admissible_fn(f, levels);
    let name = format!("local_n{n}_k{k}_p{p}");
    if n < k {
        let constant = levels.spread(k, f) <= 1e-12 * scale;
        let atoms: std::collections::BTreeSet<usize> = f.values.keys().filter_map(|x| levels.atom_of(k, x)).collect();
        let single = atoms.len() == 1 && atoms.iter().all(|&a| levels.atoms(k)[a].iter().all(|x| f.get(x).is_some()));
        let hyp = constant && admissible;
        if !hyp {
            return Ok(Check::le(&name, "‖𝔻ₙf‖_p ≲ 2^{(n−k)/p}‖f‖_p", 0.0, 0.0, 0.0)
                .measured_only()
                .with_hypothesis(false)
                .with_detail(format!("skipped: constant on level-{k} atoms {constant}, admissible {admissible}")));
        }
        let dn = lp_norm(&difference(f, n, levels)?, p)?;
        if p == 1.0 && single {
            let bound = 2.0 * pow2f(n as i64 - k as i64) * fp;
            return Ok(Check::le(&name, "‖𝔻ₙ(1_A f_A)‖₁ ≤ 2·2^{n−k}‖f‖₁", dn, bound, 1e-10 * fp).with_hypothesis(true));
        }
        let bound = 2f64.powf((n as f64 - k as f64) / p) * fp;
        let c = if bound > 0.0 { dn / bound } else { 0.0 };
        Ok(Check::le(&name, "‖𝔻ₙf‖_p ≲ 2^{(n−k)/p}‖f‖_p", dn, bound, 0.0)
            .measured_only()
            .with_hypothesis(true)
            .with_detail(format!("measured constant {c:.6}")))
    } else {
        let mean = levels.expectation(k, f)?.max_abs();
        let hyp = mean <= 1e-10 * scale && admissible;
        if !hyp {
            return Ok(Check::le(&name, "‖𝔻ₙf‖_p ≤ 2^{k−n}‖f‖_p", 0.0, 0.0, 0.0)
                .measured_only()
                .with_hypothesis(false)
                .with_detail(format!("skipped: ‖𝔼_k f‖ = {mean:e}, admissible {admissible}")));
        }
        let dn = lp_norm(&difference(f, n, levels)?, p)?;
        let bound = pow2f(k as i64 - n as i64) * fp;
        Ok(Check::le(&name, "‖𝔻ₙf‖_p ≤ 2^{k−n}‖f‖_p", dn, bound, 1e-10 * fp.max(1e-300)).with_hypothesis(true))
    }
}

/// Martingale differences `d_k = 𝔼_k f − 𝔼_{k+1} f`, `k = 0..=K`.
pub fn martingale_differences(f: &OpFn, levels: &Levels) -> Result<Vec<OpFn>, ErgodicError> {
    let mut out = Vec::new();
    let mut cur = levels.expectation(0, f)?;
    for k in 0..=levels.depth() {
        let next = levels.expectation(k + 1, f)?;
        out.push(cur.sub(&next)?);
        cur = next;
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct L2Report {
    /// `(Σₙ‖𝔻ₙf‖₂²)^{1/2} / ‖f‖₂`.
    pub ratio: f64,
    /// Largest `‖𝔻ₙ d_k‖₂ / (2^{−|n−k|/2}‖d_k‖₂)`.
    pub per_level_constant: f64,
    /// `C·Σ_s 2^{−|s|/2}`.
    pub summed_bound: f64,
    pub check: Check,
}

pub fn l2_bound_check(f: &OpFn, levels: &Levels) -> Result<L2Report, ErgodicError> {
    let f2 = lp_norm(f, 2.0)?;
    if f2 == 0.0 {
        let check = Check::le("l2_bound", "(Σₙ‖𝔻ₙf‖₂²)^{1/2} ≤ C·Σ_s 2^{−|s|/2}·‖f‖₂", 0.0, 0.0, 0.0);
        return Ok(L2Report { ratio: 0.0, per_level_constant: 0.0, summed_bound: 0.0, check });
    }
    let depth = levels.depth();
    let fam = DifferenceFamily::new(f, levels)?;
    let total: f64 = fam.d_n.iter().map(|d| lp_norm(d, 2.0).map(|v| v * v)).sum::<Result<f64, _>>()?;
    let ratio_v = total.sqrt() / f2;
    let diffs = martingale_differences(f, levels)?;
    let mut c: f64 = 0.0;
    for (k, dk) in diffs.iter().enumerate() {
        let dk2 = lp_norm(dk, 2.0)?;
        if dk2 <= 1e-14 * f2 {
            continue;
        }
        for n in 0..=depth {
            let v = lp_norm(&difference(dk, n, levels)?, 2.0)?;
            c = c.max(v / (2f64.powf(-((n as f64 - k as f64).abs()) / 2.0) * dk2));
        }
    }
    let s: f64 = (-(depth as i64)..=depth as i64).map(|s| 2f64.powf(-(s.abs() as f64) / 2.0)).sum();
    let summed = c * s;
    let check = Check::le("l2_bound", "(Σₙ‖𝔻ₙf‖₂²)^{1/2} ≤ C·Σ_s 2^{−|s|/2}·‖f‖₂", ratio_v, summed, 1e-10)
        .with_hypothesis(is_admissible_fn(f, levels))
        .with_detail(format!("per-level constant C = {c:.6}"));
    Ok(L2Report { ratio: ratio_v, per_level_constant: c, summed_bound: summed, check })
}

/// `ζ𝔻ₙ(b_k^d)ζ = ζ𝔻ₙ(b_k^off)ζ = 0` for `n < k`, scanned over every point.
pub fn cancellation_check(parts: &CZParts, zeta: &ZetaResult) -> Result<Check, ErgodicError> {
    let levels = &parts.cc.levels;
    let mut worst: f64 = 0.0;
    let mut points = 0usize;
    for k in 1..=parts.depth() {
        for n in 0..k {
            for b in [&parts.bd[k], &parts.boff[k]] {
                if b.values.is_empty() {
                    continue;
                }
                let dn = difference(b, n, levels)?;
                for (x, m) in &dn.values {
                    let z = zeta.zeta.at(x);
                    worst = worst.max((&(&z * m) * &z).max_abs());
                    points += 1;
                }
            }
        }
    }
    Ok(Check::le("cancellation", "ζ𝔻ₙ(b_k)ζ = 0 for n < k", worst, 0.0, 1e-12)
        .with_hypothesis(zeta.hypothesis)
        .with_detail(format!("{points} points scanned")))
}

/// `‖𝔻ₙ(b_k^off)‖₁ ≤ 2^{k−n}φ(p_k f)` for `n ≥ k`.
pub fn off_bound_check(parts: &CZParts, n: usize, k: usize) -> Result<Check, ErgodicError> {
    if n < k {
        return Err(ErgodicError::Precondition(format!("off-diagonal bound needs n ≥ k, got n={n}, k={k}")));
    }
    let cc = &parts.cc;
    let levels = &cc.levels;
    let lhs = lp_norm(&difference(&parts.boff[k], n, levels)?, 1.0)?;
    let mut phi_pf = 0.0;
    for (x, m) in &parts.f.values {
        phi_pf += (&cc.p_at(k, x) * m).trace().re;
    }
    let bound = pow2f(k as i64 - n as i64) * phi_pf;
    Ok(Check::le(&format!("off_bound_n{n}_k{k}"), "‖𝔻ₙ(b_k^off)‖₁ ≤ 2^{k−n}φ(p_k f)", lhs, bound, 1e-8 * cc.f_l1.max(1.0)))
}

/// Points of admissible `𝒫_k` atoms crossing `xFₙ` lie in `∂_{B_k}(xFₙ)`.
pub fn boundary_containment_check(
    seq: &crate::filtration::FilteredSequence,
    k: usize,
    n: usize,
    xs: &[Elem],
) -> Result<Check, ErgodicError> {
    let mut bad = 0usize;
    let mut seen = 0usize;
    for x in xs {
        let s = seq.f[n].left_translate(x);
        let bd = boundary(&seq.b[k], &s)?;
        for atom in seq.p[k].atoms.iter().filter(|a| a.admissible) {
            let meets = atom.set.iter().any(|y| s.contains(y));
            if meets && !atom.set.is_subset(&s) {
                seen += 1;
                if !atom.set.is_subset(&bd) {
                    bad += 1;
                }
            }
        }
    }
    Ok(Check::le(&format!("partition_boundary_k{k}_n{n}"), "∂_{P_k^a}(xFₙ) ⊆ ∂_{B_k}(xFₙ)", bad as f64, 0.0, 0.0)
        .with_detail(format!("{seen} crossing atoms over {} translates", xs.len())))
}

/// `Fₙ` is `(2^{k−n}, B_k)`-boundary invariant.
pub fn folner_hypothesis(seq: &crate::filtration::FilteredSequence, n: usize, k: usize) -> Result<bool, ErgodicError> {
    let eps = if k >= n { ratio(1usize << (k - n), 1) } else { ratio(1, 1usize << (n - k)) };
    Ok(is_boundary_invariant(&seq.f[n], &eps, &seq.b[k])?.holds)
}

pub(crate) fn matrix_l1(m: &crate::ncalg::Matrix) -> Result<f64, ErgodicError> {
    Ok(m.singular_values()?.iter().sum())
}
