//! Cuculescu projections and the Calderón–Zygmund decomposition `f = g + h + b`
//! of a positive matrix-valued function along a finite filtration.
//!
//! Levels run `0..=K`. A virtual level `K+1` carries `q_{K+1} = 1` and
//! `𝔼_{K+1} = 0`, so every telescoping identity is exact on the window.

mod levels;
mod zeta;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::group::{Elem, FiniteSubset};
use crate::ncalg::{lp_norm, Matrix, NcError, OpFn, Side};
use crate::report::Check;

pub use levels::Levels;
pub use zeta::{zeta_projection, zeta_vanishing_check, ZetaResult};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CzError {
    #[error(transparent)]
    Nc(#[from] NcError),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

/// Numerical slack for operator identities.
pub const OP_TOL: f64 = 1e-10;

/// Outcome of the four Cuculescu properties.
#[derive(Clone, Debug, Serialize)]
pub struct CuculescuChecks {
    /// `max_k max_A (λ_max(q_k f_k q_k) − λ)⁺`.
    pub prop1_excess: f64,
    /// `max ‖[q_k, q_{k+1} f_k q_{k+1}]‖_F`.
    pub prop2_commutator: f64,
    /// `max` spread of `q_k` inside one atom of `𝒫_k`.
    pub prop3_spread: f64,
    /// `λφ(1−q₀)`.
    pub prop4_lhs: f64,
    /// `‖f‖₁`.
    pub prop4_rhs: f64,
    /// `max ‖q_k q_{k+1} − q_k‖_F`.
    pub monotone_defect: f64,
    /// `max` projection defect over all `q_k`.
    pub projection_defect: f64,
    pub rows: Vec<Check>,
}

/// Projections `q_0 ≤ … ≤ q_K ≤ q_{K+1} = 1`, stored per atom; absent atoms carry `1`.
#[derive(Clone, Debug, Serialize)]
pub struct CuculescuResult {
    pub lambda: f64,
    pub d: usize,
    #[serde(skip)]
    pub levels: Levels,
    /// `q[k][atom]` for atoms of `𝒫_k` where `q_k ≠ 1`.
    #[serde(skip)]
    pub q: Vec<BTreeMap<usize, Matrix>>,
    /// `f_k = 𝔼_k f` on atoms of `𝒫_k` meeting the support.
    #[serde(skip)]
    pub fk: Vec<BTreeMap<usize, Matrix>>,
    pub f_l1: f64,
    pub checks: CuculescuChecks,
}

impl CuculescuResult {
    pub fn depth(&self) -> usize {
        self.q.len() - 1
    }

    /// `q_k` on atom `a` of `𝒫_k`; level `K+1` is the identity.
    pub fn q_atom(&self, k: usize, a: usize) -> Matrix {
        self.q.get(k).and_then(|m| m.get(&a)).cloned().unwrap_or_else(|| Matrix::identity(self.d))
    }

    /// `p_k = q_{k+1} − q_k` on atom `a` of `𝒫_k`.
    pub fn p_atom(&self, k: usize, a: usize) -> Matrix {
        let up = match self.levels.parent(k, a) {
            Some(pa) => self.q_atom(k + 1, pa),
            None => Matrix::identity(self.d),
        };
        &up - &self.q_atom(k, a)
    }

    pub fn fk_atom(&self, k: usize, a: usize) -> Matrix {
        self.fk.get(k).and_then(|m| m.get(&a)).cloned().unwrap_or_else(|| Matrix::zeros(self.d))
    }

    pub fn q_at(&self, k: usize, x: &Elem) -> Matrix {
        match (k <= self.depth()).then(|| self.levels.atom_of(k, x)).flatten() {
            Some(a) => self.q_atom(k, a),
            None => Matrix::identity(self.d),
        }
    }

    pub fn p_at(&self, k: usize, x: &Elem) -> Matrix {
        match self.levels.atom_of(k, x) {
            Some(a) => self.p_atom(k, a),
            None => Matrix::zeros(self.d),
        }
    }

    /// Atoms of `𝒫_k` with `p_A ≠ 0`.
    pub fn active_atoms(&self, k: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self.fk[k].keys().copied().filter(|&a| !self.p_atom(k, a).is_zero(1e-12)).collect();
        v.sort_unstable();
        v
    }

    pub fn all_hold(&self) -> bool {
        crate::report::all_hold(&self.checks.rows)
    }
}

fn check_input(f: &OpFn, levels: &Levels) -> Result<(), CzError> {
    f.model.check_same(&levels.model).map_err(NcError::from)?;
    if let Some((x, ev)) = f.first_non_psd(1e-12)? {
        return Err(CzError::Precondition(format!("f is not positive at {x} (eigenvalue {ev:e})")));
    }
    let outside: Vec<String> = f.values.keys().filter(|x| levels.atom_of(0, x).is_none()).take(8).map(|x| x.to_string()).collect();
    if !outside.is_empty() {
        return Err(CzError::Precondition(format!("support leaves the window at {outside:?}")));
    }
    Ok(())
}

/// Descending recursion `q_k = 1_{[0,λ]}(q_{k+1} f_k q_{k+1})` on `ran q_{k+1}`.
pub fn cuculescu(f: &OpFn, lambda: f64, levels: &Levels) -> Result<CuculescuResult, CzError> {
    if !(lambda > 0.0) {
        return Err(CzError::Precondition(format!("λ = {lambda} must be positive")));
    }
    check_input(f, levels)?;
    let depth = levels.depth();
    let d = f.d;
    let mut fk = Vec::with_capacity(depth + 1);
    for k in 0..=depth {
        fk.push(levels.atom_averages(k, f));
    }
    let mut q: Vec<BTreeMap<usize, Matrix>> = vec![BTreeMap::new(); depth + 1];
    let mut prop1: f64 = 0.0;
    let mut prop2: f64 = 0.0;
    let mut mono: f64 = 0.0;
    let mut pdef: f64 = 0.0;
    let id = Matrix::identity(d);
    for k in (0..=depth).rev() {
        let mut level = BTreeMap::new();
        for (&a, m) in &fk[k] {
            let up = match levels.parent(k, a) {
                Some(pa) => q[k + 1].get(&pa).cloned().unwrap_or_else(|| id.clone()),
                None => id.clone(),
            };
            let x = &(&up * m) * &up;
            let below = x.spectral_projection(lambda, Side::AtOrBelow)?;
            let qk = up.meet(&below)?;
            let qxq = &(&qk * m) * &qk;
            prop1 = prop1.max(qxq.eigh()?.values.last().copied().unwrap_or(0.0) - lambda);
            prop2 = prop2.max(qk.commutator(&x).frobenius());
            mono = mono.max((&(&qk * &up) - &qk).frobenius());
            let (a1, a2) = qk.projection_defect();
            pdef = pdef.max(a1.max(a2));
            if !(&qk - &id).is_zero(1e-13) {
                level.insert(a, qk);
            }
        }
        // Atoms missing from `fk[k]` have f_k = 0, hence q_k = q_{k+1}.
        if k < depth {
            for a in 0..levels.atoms(k).len() {
                if fk[k].contains_key(&a) {
                    continue;
                }
                if let Some(pa) = levels.parent(k, a) {
                    if let Some(up) = q[k + 1].get(&pa) {
                        level.insert(a, up.clone());
                    }
                }
            }
        }
        q[k] = level;
    }
    let f_l1 = lp_norm(f, 1.0)?;
    let phi_comp: f64 = q[0].values().map(|p| d as f64 - p.trace().re).sum();
    let prop4_lhs = lambda * phi_comp;
    let scale = f.max_abs().max(1.0);
    let rows = vec![
        Check::le("cuculescu_bounded", "q_k f_k q_k ≤ λ", prop1.max(0.0), 0.0, OP_TOL * scale),
        Check::le("cuculescu_commute", "[q_k, q_{k+1} f_k q_{k+1}] = 0", prop2, 0.0, OP_TOL * scale),
        Check::le("cuculescu_measurable", "q_k constant on atoms of P_k", 0.0, 0.0, 0.0).with_detail("stored per atom"),
        Check::le("cuculescu_mass", "λφ(1−q₀) ≤ ‖f‖₁", prop4_lhs, f_l1, 0.0),
        Check::le("cuculescu_monotone", "q_k ≤ q_{k+1}", mono, 0.0, OP_TOL),
        Check::le("cuculescu_projection", "q_k² = q_k = q_k*", pdef, 0.0, OP_TOL),
    ];
    Ok(CuculescuResult {
        lambda,
        d,
        levels: levels.clone(),
        q,
        fk,
        f_l1,
        checks: CuculescuChecks {
            prop1_excess: prop1,
            prop2_commutator: prop2,
            prop3_spread: 0.0,
            prop4_lhs,
            prop4_rhs: f_l1,
            monotone_defect: mono,
            projection_defect: pdef,
            rows,
        },
    })
}

/// The decomposition `f = q₀fq₀ + Σ_k (g_k + h_k + b_k^d + b_k^off)`.
#[derive(Clone, Debug, Serialize)]
pub struct CZParts {
    #[serde(skip)]
    pub cc: CuculescuResult,
    #[serde(skip)]
    pub f: OpFn,
    /// `g = q₀fq₀ + Σ g_k`.
    #[serde(skip)]
    pub g: OpFn,
    #[serde(skip)]
    pub q0fq0: OpFn,
    #[serde(skip)]
    pub g_k: Vec<OpFn>,
    #[serde(skip)]
    pub h: Vec<OpFn>,
    #[serde(skip)]
    pub bd: Vec<OpFn>,
    #[serde(skip)]
    pub boff: Vec<OpFn>,
    /// `‖f − (g + Σh_k + Σb_k^d + Σb_k^off)‖₁`.
    pub residual: f64,
}

impl CZParts {
    pub fn depth(&self) -> usize {
        self.h.len() - 1
    }

    /// `b = Σ_k (b_k^d + b_k^off)`.
    pub fn b_total(&self) -> Result<OpFn, CzError> {
        let mut b = OpFn::zero(self.f.model, self.f.d);
        for k in 0..=self.depth() {
            b = b.add(&self.bd[k])?.add(&self.boff[k])?;
        }
        Ok(b)
    }

    pub fn h_total(&self) -> Result<OpFn, CzError> {
        let mut h = OpFn::zero(self.f.model, self.f.d);
        for hk in &self.h {
            h = h.add(hk)?;
        }
        Ok(h)
    }
}

fn atom_fn<'a>(levels: &'a Levels, k: usize, a: usize, m: &Matrix) -> impl Iterator<Item = (Elem, Matrix)> + 'a {
    let m = m.clone();
    levels.atoms(k)[a].iter().map(move |x| (x.clone(), m.clone()))
}

pub fn cz_decompose(f: &OpFn, lambda: f64, levels: &Levels) -> Result<CZParts, CzError> {
    let cc = cuculescu(f, lambda, levels)?;
    let depth = levels.depth();
    let (model, d) = (f.model, f.d);
    let mut q0fq0 = OpFn::zero(model, d);
    for (x, m) in &f.values {
        let q0 = cc.q_at(0, x);
        q0fq0.insert(x.clone(), &(&q0 * m) * &q0);
    }
    let mut g_k = Vec::with_capacity(depth + 1);
    let mut h = Vec::with_capacity(depth + 1);
    let mut bd = Vec::with_capacity(depth + 1);
    let mut boff = Vec::with_capacity(depth + 1);
    for k in 0..=depth {
        // p_k f_k p_k on atoms of 𝒫_k, and its 𝒫_{k+1} average.
        let mut pfp = OpFn::zero(model, d);
        let mut bdk = OpFn::zero(model, d);
        for (&a, m) in &cc.fk[k] {
            let p = cc.p_atom(k, a);
            if p.is_zero(1e-13) {
                continue;
            }
            let v = &(&p * m) * &p;
            for (x, val) in atom_fn(levels, k, a, &v) {
                let fx = f.at(&x);
                bdk.insert(x.clone(), &(&(&p * &fx) * &p) - &val);
                pfp.insert(x, val);
            }
        }
        let gk = if k < depth { levels.expectation(k + 1, &pfp)? } else { OpFn::zero(model, d) };
        let hk = pfp.sub(&gk)?;
        let mut bo = OpFn::zero(model, d);
        for (x, m) in &f.values {
            let p = cc.p_at(k, x);
            if p.is_zero(1e-13) {
                continue;
            }
            let qk = cc.q_at(k, x);
            let pq = &(&p * m) * &qk;
            bo.insert(x.clone(), &pq + &pq.adjoint());
        }
        g_k.push(gk);
        h.push(hk);
        bd.push(bdk);
        boff.push(bo);
    }
    let mut g = q0fq0.clone();
    for gk in &g_k {
        g = g.add(gk)?;
    }
    let mut total = g.clone();
    for k in 0..=depth {
        total = total.add(&h[k])?.add(&bd[k])?.add(&boff[k])?;
    }
    let residual = lp_norm(&f.sub(&total)?, 1.0)?;
    Ok(CZParts { cc, f: f.clone(), g, q0fq0, g_k, h, bd, boff, residual })
}

/// Reconstruction, `‖g‖₂² ≤ 2λ‖f‖₁`, and the structural identities behind it.
pub fn verify_good(parts: &CZParts, lambda: f64) -> Result<Vec<Check>, CzError> {
    let f1 = parts.cc.f_l1;
    let cc = &parts.cc;
    let levels = &cc.levels;
    let depth = parts.depth();
    let scale = parts.f.max_abs().max(1.0);
    let mut rows = Vec::new();
    rows.push(Check::le("reconstruction", "‖f − (g+h+b)‖₁ ≤ 1e−9", parts.residual, 1e-9, 0.0));
    let g2 = lp_norm(&parts.g, 2.0)?;
    rows.push(Check::le("good_l2", "‖g‖₂² ≤ 2λ‖f‖₁", g2 * g2, 2.0 * lambda * f1, 1e-8 * f1));

    // g_k = q_{k+1} f_{k+1} q_{k+1} − 𝔼_{k+1}(q_k f_k q_k)
    let mut gk_err: f64 = 0.0;
    for k in 0..=depth {
        let mut qfq = OpFn::zero(parts.f.model, parts.f.d);
        for (&a, m) in &cc.fk[k] {
            let qa = cc.q_atom(k, a);
            qfq.values.extend(atom_fn(levels, k, a, &(&(&qa * m) * &qa)));
        }
        let rhs = if k < depth {
            let mut up = OpFn::zero(parts.f.model, parts.f.d);
            for (&a, m) in &cc.fk[k + 1] {
                let qa = cc.q_atom(k + 1, a);
                up.values.extend(atom_fn(levels, k + 1, a, &(&(&qa * m) * &qa)));
            }
            up.sub(&levels.expectation(k + 1, &qfq)?)?
        } else {
            OpFn::zero(parts.f.model, parts.f.d)
        };
        gk_err = gk_err.max(parts.g_k[k].sub(&rhs)?.max_abs());
    }
    rows.push(Check::le("good_gk_identity", "g_k = q_{k+1}f_{k+1}q_{k+1} − 𝔼_{k+1}(q_k f_k q_k)", gk_err, 0.0, OP_TOL * scale));

    // p_k f_k p_k ≥ λ p_k on every atom.
    let mut lower: f64 = 0.0;
    for k in 0..=depth {
        for (&a, m) in &cc.fk[k] {
            let p = cc.p_atom(k, a);
            if p.is_zero(1e-13) {
                continue;
            }
            let diff = &(&(&p * m) * &p) - &p.scale(lambda);
            lower = lower.max(-diff.min_eigenvalue()?);
        }
    }
    rows.push(Check::le("bad_lower", "p_k f_k p_k ≥ λ p_k", lower.max(0.0), 0.0, OP_TOL * scale));

    // Σ_k p_k = 1 − q₀ on the window.
    let mut tel: f64 = 0.0;
    for (a, atom) in levels.atoms(0).iter().enumerate() {
        let x = &atom.elems()[0];
        let mut s = cc.q_atom(0, a);
        for k in 0..=depth {
            s.add_assign(&cc.p_at(k, x));
        }
        tel = tel.max((&s - &Matrix::identity(parts.f.d)).max_abs());
    }
    rows.push(Check::le("telescoping", "Σ_k p_k = 1 − q₀", tel, 0.0, OP_TOL));
    Ok(rows)
}

/// `Σ‖h_k‖₁ ≤ 2‖f‖₁`, `𝔼_{k+1}(h_k) = 0` and `h_k ∈ 𝒩_k`.
pub fn verify_hybrid(parts: &CZParts) -> Result<Vec<Check>, CzError> {
    let f1 = parts.cc.f_l1;
    let levels = &parts.cc.levels;
    let depth = parts.depth();
    let mut sum = 0.0;
    let mut mart: f64 = 0.0;
    let mut meas: f64 = 0.0;
    for k in 0..=depth {
        sum += lp_norm(&parts.h[k], 1.0)?;
        if k < depth {
            mart = mart.max(levels.expectation(k + 1, &parts.h[k])?.max_abs());
        }
        meas = meas.max(levels.spread(k, &parts.h[k]));
    }
    let scale = parts.f.max_abs().max(1.0);
    Ok(vec![
        Check::le("hybrid_l1", "Σ_k ‖h_k‖₁ ≤ 2‖f‖₁", sum, 2.0 * f1, 1e-8 * f1),
        Check::le("hybrid_martingale", "𝔼_{k+1}(h_k) = 0", mart, 0.0, OP_TOL * scale),
        Check::le("hybrid_measurable", "h_k constant on atoms of P_k", meas, 0.0, OP_TOL * scale),
    ])
}

/// Diagonal and off-diagonal bad-part bounds at level `k` for `K ⊆ E`, `E` a union of `𝒫_k` atoms.
pub fn verify_bad(parts: &CZParts, lambda: f64, k: usize, e: &FiniteSubset, kset: &FiniteSubset) -> Result<Vec<Check>, CzError> {
    let cc = &parts.cc;
    let levels = &cc.levels;
    if k > parts.depth() {
        return Err(CzError::Precondition(format!("level {k} exceeds depth {}", parts.depth())));
    }
    if !kset.is_subset(e) {
        return Err(CzError::Precondition("K is not contained in E".into()));
    }
    if !levels.is_union_of_atoms(k, e) {
        return Err(CzError::Precondition(format!("E is not a union of atoms of level {k}")));
    }
    let f = &parts.f;
    let scale = f.max_abs().max(1.0);
    // φ(p_k f) and φ(1_E p_k f).
    let mut phi_pf = 0.0;
    let mut phi_epf = 0.0;
    for (x, m) in &f.values {
        let v = (&cc.p_at(k, x) * m).trace().re;
        phi_pf += v;
        if e.contains(x) {
            phi_epf += v;
        }
    }
    let bd1 = lp_norm(&parts.bd[k], 1.0)?;
    let mut integral = Matrix::zeros(f.d);
    for x in kset {
        if let Some(m) = parts.boff[k].get(x) {
            integral.add_assign(m);
        }
    }
    let int1: f64 = integral.singular_values()?.iter().sum();
    let mart_d = levels.expectation(k, &parts.bd[k])?.max_abs();
    let mart_o = levels.expectation(k, &parts.boff[k])?.max_abs();
    let tol = 1e-8 * cc.f_l1.max(1.0);
    Ok(vec![
        Check::le("bad_diagonal", "‖b_k^d‖₁ ≤ 2φ(p_k f)", bd1, 2.0 * phi_pf, tol),
        Check::le("bad_offdiag", "‖∫_K b_k^off‖₁ ≤ 2φ(1_E p_k f)", int1, 2.0 * phi_epf, tol),
        Check::le("bad_offdiag_displayed", "‖∫_K b_k^off‖₁ ≤ 2λφ(1_E p_k f)", int1, 2.0 * lambda * phi_epf, tol)
            .measured_only()
            .with_detail("displayed form with a λ factor; the λ-free form is asserted"),
        Check::le("bad_martingale_diag", "𝔼_k(b_k^d) = 0", mart_d, 0.0, OP_TOL * scale),
        Check::le("bad_martingale_off", "𝔼_k(b_k^off) = 0", mart_o, 0.0, OP_TOL * scale),
    ])
}

/// Runs [`verify_bad`] with `E` each active atom of each level and `K` its first half.
pub fn verify_bad_all(parts: &CZParts, lambda: f64) -> Result<Vec<Check>, CzError> {
    let mut worst: BTreeMap<String, Check> = BTreeMap::new();
    let levels = &parts.cc.levels;
    for k in 0..=parts.depth() {
        for a in parts.cc.active_atoms(k) {
            let atom = &levels.atoms(k)[a];
            let half = FiniteSubset::new(atom.model(), atom.elems()[..atom.len().div_ceil(2)].iter().cloned());
            for row in verify_bad(parts, lambda, k, atom, &half)? {
                let keep = match worst.get(&row.name) {
                    None => true,
                    Some(w) => (row.failed() && !w.failed()) || (row.measured - row.bound) > (w.measured - w.bound),
                };
                if keep {
                    worst.insert(row.name.clone(), row.with_detail(format!("level {k}, atom {a}")));
                }
            }
        }
    }
    Ok(worst.into_values().collect())
}
