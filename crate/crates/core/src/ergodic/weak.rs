use serde::Serialize;

use crate::czdec::{cuculescu, cz_decompose, zeta_projection, Levels};
use crate::group::{Elem, FiniteSubset};
use crate::ncalg::{averaging, Matrix, distribution, l2_embedding_projection, lp_norm, OpFn, ProjField};
use crate::report::Check;

use super::{cancellation_check, matrix_l1, sign_vectors, DifferenceFamily, ErgodicError};

/// Weak-type quantities at one `λ`, averaged over sign vectors.
#[derive(Clone, Debug, Serialize)]
pub struct Weak11Row {
    pub lambda: f64,
    /// `E_ε λφ(|𝔻_ε f| > λ)`.
    pub total: f64,
    pub total_constant: f64,
    pub good: f64,
    /// `Σₙ‖𝔻ₙg‖₂²/λ`.
    pub good_bound: f64,
    pub hybrid: f64,
    /// `Σ_{n,k}‖𝔻ₙh_k‖₁`.
    pub hybrid_bound: f64,
    pub bad: f64,
    /// `2λφ(1−ζ) + Σ_{n≥k}(‖𝔻ₙb_k^d‖₁ + ‖𝔻ₙb_k^off‖₁)`.
    pub bad_bound: f64,
    pub zeta_complement: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Weak11Report {
    pub rows: Vec<Weak11Row>,
    pub exact_signs: bool,
    pub sign_count: usize,
    pub f_l1: f64,
    /// `sup_λ E_ε λφ(|𝔻_ε f| > λ) / ‖f‖₁`.
    pub measured_constant: f64,
    pub ceiling: f64,
    pub checks: Vec<Check>,
}

fn mean_weak(fam: &DifferenceFamily, signs: &[Vec<i8>], lambda: f64) -> Result<f64, ErgodicError> {
    let mut acc = 0.0;
    for s in signs {
        acc += lambda * distribution(&fam.signed(s)?, lambda)? as f64;
    }
    Ok(acc / signs.len() as f64)
}

fn sum_l1(fams: &[DifferenceFamily], from: impl Fn(usize) -> usize) -> Result<f64, ErgodicError> {
    let mut s = 0.0;
    for (k, fam) in fams.iter().enumerate() {
        for dn in &fam.d_n[from(k)..] {
            s += lp_norm(dn, 1.0)?;
        }
    }
    Ok(s)
}

/// Weak-(1,1) measurement of `𝔻 = Σₙ εₙ𝔻ₙ` over a grid of `λ`.
///
/// Each part of the decomposition is checked against its chain bound:
/// Chebyshev in `L₂` for the good part, `L₁` for the hybrid part, and the
/// `ζ`-localization for the bad part.
pub fn weak11_check(f: &OpFn, lambdas: &[f64], levels: &Levels, seed: u64, ceiling: f64) -> Result<Weak11Report, ErgodicError> {
    if lambdas.is_empty() || lambdas.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        return Err(ErgodicError::Precondition("λ grid must be nonempty and positive".into()));
    }
    let f_l1 = lp_norm(f, 1.0)?;
    let (signs, exact) = sign_vectors(levels.depth() + 1, seed, 256);
    let fam_f = DifferenceFamily::new(f, levels)?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut sup: f64 = 0.0;
    for &lambda in lambdas {
        let parts = cz_decompose(f, lambda, levels)?;
        let zeta = zeta_projection(&parts.cc)?;
        let total = mean_weak(&fam_f, &signs, lambda)?;

        let fam_g = DifferenceFamily::new(&parts.g, levels)?;
        let good = mean_weak(&fam_g, &signs, lambda)?;
        let mut g2 = 0.0;
        for dn in &fam_g.d_n {
            g2 += lp_norm(dn, 2.0)?.powi(2);
        }
        let good_bound = g2 / lambda;

        let fam_h = DifferenceFamily::new(&parts.h_total()?, levels)?;
        let hybrid = mean_weak(&fam_h, &signs, lambda)?;
        let hk: Vec<DifferenceFamily> = parts.h.iter().map(|h| DifferenceFamily::new(h, levels)).collect::<Result<_, _>>()?;
        let hybrid_bound = sum_l1(&hk, |_| 0)?;

        let fam_b = DifferenceFamily::new(&parts.b_total()?, levels)?;
        let bad = mean_weak(&fam_b, &signs, lambda)?;
        let bd: Vec<DifferenceFamily> = parts.bd.iter().map(|b| DifferenceFamily::new(b, levels)).collect::<Result<_, _>>()?;
        let bo: Vec<DifferenceFamily> = parts.boff.iter().map(|b| DifferenceFamily::new(b, levels)).collect::<Result<_, _>>()?;
        let bad_bound = 2.0 * lambda * zeta.complement_trace + sum_l1(&bd, |k| k)? + sum_l1(&bo, |k| k)?;

        let tol = 1e-9 * f_l1.max(1.0);
        let tag = format!("λ={lambda}");
        checks.push(Check::le("weak_good", "λφ(|𝔻g|>λ) ≤ Σₙ‖𝔻ₙg‖₂²/λ", good, good_bound, tol).with_detail(tag.clone()));
        checks.push(Check::le("weak_hybrid", "λφ(|𝔻h|>λ) ≤ Σ_{n,k}‖𝔻ₙh_k‖₁", hybrid, hybrid_bound, tol).with_detail(tag.clone()));
        checks.push(
            Check::le("weak_bad", "λφ(|𝔻b|>λ) ≤ 2λφ(1−ζ) + Σ_{n≥k}‖𝔻ₙb_k‖₁", bad, bad_bound, tol)
                .with_hypothesis(zeta.hypothesis)
                .with_detail(tag.clone()),
        );
        checks.push(cancellation_check(&parts, &zeta)?.with_detail(tag));
        let c = if f_l1 > 0.0 { total / f_l1 } else { 0.0 };
        sup = sup.max(c);
        rows.push(Weak11Row {
            lambda,
            total,
            total_constant: c,
            good,
            good_bound,
            hybrid,
            hybrid_bound,
            bad,
            bad_bound,
            zeta_complement: zeta.complement_trace,
        });
    }
    checks.push(Check::le("weak11_constant", "sup_λ λφ(|𝔻f|>λ)/‖f‖₁ ≤ ceiling", sup, ceiling, 0.0));
    Ok(Weak11Report { rows, exact_signs: exact, sign_count: signs.len(), f_l1, measured_constant: sup, ceiling, checks })
}

#[derive(Clone, Debug, Serialize)]
pub struct MaximalReport {
    #[serde(skip)]
    pub e: ProjField,
    pub lambda: f64,
    /// `sup_{n≥1} ‖e 𝔸ₙf e‖_∞`.
    pub sup_norm: f64,
    /// `3λ/2`: `λ` from the embedding at `λ/2` plus `λ/2` from Cuculescu.
    pub sup_bound: f64,
    pub complement_trace: f64,
    /// `λφ(1−e)/‖f‖₁`.
    pub constant: f64,
    pub checks: Vec<Check>,
}

/// `e = e' ∧ q₀` with `e'` the ℓ₂-embedding projection of `(𝔻ₙf)_{n≥1}` at `λ/2`
/// and `q₀` the bottom Cuculescu projection at `λ/2`.
pub fn maximal_projection(f: &OpFn, lambda: f64, levels: &Levels) -> Result<MaximalReport, ErgodicError> {
    if !(lambda > 0.0) {
        return Err(ErgodicError::Precondition("λ must be positive".into()));
    }
    let depth = levels.depth();
    if depth == 0 {
        return Err(ErgodicError::Precondition("maximal projection needs depth ≥ 1".into()));
    }
    let fam = DifferenceFamily::new(f, levels)?;
    let emb = l2_embedding_projection(&fam.d_n[1..], lambda / 2.0, None)?;
    let cc = cuculescu(f, lambda / 2.0, levels)?;
    let mut q0 = ProjField::identity(f.model, f.d);
    for x in &levels.window {
        let q = cc.q_at(0, x);
        if (&q - &Matrix::identity(f.d)).max_abs() > 0.0 {
            q0.set(x.clone(), q);
        }
    }
    let e = emb.e.meet(&q0)?.pruned(1e-12);
    let mut sup: f64 = 0.0;
    for n in 1..=depth {
        let a = averaging(f, &levels.folner[n])?;
        for (x, m) in &a.values {
            let ex = e.at(x);
            sup = sup.max((&(&ex * m) * &ex).op_norm()?);
        }
    }
    let complement_trace = e.complement_trace();
    let f_l1 = lp_norm(f, 1.0)?;
    let constant = if f_l1 > 0.0 { lambda * complement_trace / f_l1 } else { 0.0 };
    let sup_bound = 1.5 * lambda;
    let checks = vec![
        Check::le("maximal_sup", "sup_n ‖e𝔸ₙf e‖_∞ ≤ 3λ/2", sup, sup_bound, 1e-10 * lambda.max(1.0)),
        Check::le(
            "maximal_complement",
            "φ(1−e) ≤ φ(1−e') + φ(1−q₀)",
            complement_trace,
            emb.complement_trace + q0.complement_trace(),
            1e-8,
        ),
        Check::le("maximal_projection", "e² = e = e*", e.max_defect(), 0.0, 1e-10),
        Check::flag("maximal_meet", "e ≤ e' and e ≤ q₀", e.le(&emb.e, 1e-9) && e.le(&q0, 1e-9)),
        Check::le("maximal_constant", "λφ(1−e) ≲ ‖f‖₁", constant, 0.0, 0.0)
            .measured_only()
            .with_detail(format!("λφ(1−e)/‖f‖₁ = {constant:.6}")),
    ];
    Ok(MaximalReport { e, lambda, sup_norm: sup, sup_bound, complement_trace, constant, checks })
}

#[derive(Clone, Debug, Serialize)]
pub struct SplitTerm {
    /// The translate `x` with `supp fᵢ ⊆ x⁻¹·Adm`.
    pub x: Elem,
    pub support_size: usize,
    pub l1: f64,
    /// `‖rᵢ₊₁‖₁` after removing this term.
    pub remaining: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SplitReport {
    pub terms: Vec<SplitTerm>,
    #[serde(skip)]
    pub pieces: Vec<OpFn>,
    pub f_l1: f64,
    /// `α = (1+ε)/(1+ε−c)`.
    pub alpha: f64,
    pub checks: Vec<Check>,
}

/// Greedy splitting `f = Σ fᵢ` with each `fᵢ` carried by a left translate of `adm`.
///
/// Each step keeps the translate with the largest `‖r·1_{x⁻¹Adm}‖₁`. A step
/// whose decay misses `‖rᵢ₊₁‖₁ ≤ α⁻¹‖rᵢ‖₁` is an error.
pub fn admissible_split(f: &OpFn, adm: &FiniteSubset, eps: f64, c: f64, max_steps: usize) -> Result<SplitReport, ErgodicError> {
    if !(c > 0.0 && c <= 1.0) || !(eps > 0.0) {
        return Err(ErgodicError::Precondition(format!("need 0 < c ≤ 1 and ε > 0, got c={c}, ε={eps}")));
    }
    if adm.is_empty() {
        return Err(ErgodicError::Precondition("empty admissible region".into()));
    }
    let model = f.model;
    let alpha = (1.0 + eps) / (1.0 + eps - c);
    let f_l1 = lp_norm(f, 1.0)?;
    let mut r = f.pruned(0.0);
    let mut mass: std::collections::BTreeMap<Elem, f64> = std::collections::BTreeMap::new();
    for (y, m) in &r.values {
        mass.insert(y.clone(), matrix_l1(m)?);
    }
    let mut terms = Vec::new();
    let mut pieces = Vec::new();
    let mut checks = Vec::new();
    let mut remaining: f64 = mass.values().sum();
    let mut step = 0;
    while !r.values.is_empty() && step < max_steps {
        // mass of r on x⁻¹Adm for every x = a·y⁻¹.
        let mut score: rustc_hash::FxHashMap<Elem, f64> = rustc_hash::FxHashMap::default();
        for (y, w) in &mass {
            let yi = model.inverse(y);
            for a in adm {
                *score.entry(model.multiply(a, &yi)).or_default() += w;
            }
        }
        let (x, kept) = score
            .into_iter()
            .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
            .expect("nonempty residual");
        if kept <= 0.0 {
            return Err(ErgodicError::SplitStalled { step, kept, remaining, guarantee: remaining / alpha });
        }
        let carried = adm.left_translate(&model.inverse(&x));
        let piece = r.restrict(&carried);
        for y in piece.values.keys() {
            r.values.remove(y);
            mass.remove(y);
        }
        let before = remaining;
        remaining = mass.values().sum();
        if remaining > before / alpha + 1e-12 * f_l1.max(1.0) {
            return Err(ErgodicError::SplitStalled { step, kept, remaining: before, guarantee: before - before / alpha });
        }
        checks.push(
            Check::le("split_decay", "‖rᵢ₊₁‖₁ ≤ α⁻¹‖rᵢ‖₁", remaining, before / alpha, 1e-12 * f_l1.max(1.0))
                .with_detail(format!("step {step}")),
        );
        terms.push(SplitTerm { x, support_size: piece.values.len(), l1: kept, remaining });
        pieces.push(piece);
        step += 1;
    }
    let mut sum = OpFn::zero(model, f.d);
    for p in &pieces {
        sum = sum.add(p)?;
    }
    let exact = r.values.is_empty() && sum.sub(f)?.max_abs() == 0.0;
    checks.push(Check::flag("split_exact", "Σfᵢ = f", exact).with_detail(format!("{} pieces", pieces.len())));
    Ok(SplitReport { terms, pieces, f_l1, alpha, checks })
}
