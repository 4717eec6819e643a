//! Matrix-valued functions on a group: the algebra `𝕄_d ⊗ ℓ_∞(G)` restricted
//! to finitely supported elements, with trace `φ(f) = Σₓ tr f(x)`.

mod matrix;
mod square;

use std::collections::BTreeMap;

use rand::Rng;
use rustc_hash::FxHashMap;
use serde::Serialize;
use thiserror::Error;

use crate::group::{Elem, FiniteSubset, GroupError, GroupModel};

pub use matrix::{Eigen, Matrix, Side, C, HERMITIAN_TOL, JACOBI_TOL, THRESHOLD_TOL};
pub use square::{l2_embedding_projection, square_functions, L2Embedding, SquareReport};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NcError {
    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal mass {off_diagonal:e}, norm {norm:e})")]
    NonConvergence { off_diagonal: f64, sweeps: usize, norm: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("support leaks outside the partition at {elements:?}")]
    SupportLeak { elements: Vec<String> },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Finitely supported `𝕄_d`-valued function; absent points are zero.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OpFn {
    pub model: GroupModel,
    pub d: usize,
    pub values: BTreeMap<Elem, Matrix>,
}

impl OpFn {
    pub fn zero(model: GroupModel, d: usize) -> Self {
        OpFn { model, d, values: BTreeMap::new() }
    }

    /// `1_S ⊗ m`.
    pub fn indicator(set: &FiniteSubset, m: &Matrix) -> Self {
        OpFn { model: set.model(), d: m.dim(), values: set.iter().map(|x| (x.clone(), m.clone())).collect() }
    }

    pub fn from_values(model: GroupModel, d: usize, values: impl IntoIterator<Item = (Elem, Matrix)>) -> Result<Self, NcError> {
        let mut f = OpFn::zero(model, d);
        for (x, m) in values {
            if m.dim() != d {
                return Err(NcError::Dimension(format!("value at {x} has dimension {}", m.dim())));
            }
            model.validate(&x)?;
            f.values.insert(x, m);
        }
        Ok(f)
    }

    pub fn support(&self) -> FiniteSubset {
        FiniteSubset::new(self.model, self.values.keys().cloned())
    }

    pub fn get(&self, x: &Elem) -> Option<&Matrix> {
        self.values.get(x)
    }

    /// Value at `x`, zero off the support.
    pub fn at(&self, x: &Elem) -> Matrix {
        self.values.get(x).cloned().unwrap_or_else(|| Matrix::zeros(self.d))
    }

    pub fn insert(&mut self, x: Elem, m: Matrix) {
        self.values.insert(x, m);
    }

    pub fn add_at(&mut self, x: &Elem, m: &Matrix, s: f64) {
        match self.values.get_mut(x) {
            Some(v) => v.add_scaled(m, s),
            None => {
                self.values.insert(x.clone(), m.scale(s));
            }
        }
    }

    fn check(&self, o: &OpFn) -> Result<(), NcError> {
        self.model.check_same(&o.model)?;
        if self.d != o.d {
            return Err(NcError::Dimension(format!("{} vs {}", self.d, o.d)));
        }
        Ok(())
    }

    pub fn add(&self, o: &OpFn) -> Result<OpFn, NcError> {
        self.check(o)?;
        let mut r = self.clone();
        for (x, m) in &o.values {
            r.add_at(x, m, 1.0);
        }
        Ok(r)
    }

    pub fn sub(&self, o: &OpFn) -> Result<OpFn, NcError> {
        self.check(o)?;
        let mut r = self.clone();
        for (x, m) in &o.values {
            r.add_at(x, m, -1.0);
        }
        Ok(r)
    }

    pub fn scale(&self, s: f64) -> OpFn {
        self.map(|m| m.scale(s))
    }

    pub fn adjoint(&self) -> OpFn {
        self.map(|m| m.adjoint())
    }

    pub fn map(&self, f: impl Fn(&Matrix) -> Matrix) -> OpFn {
        OpFn { model: self.model, d: self.d, values: self.values.iter().map(|(x, m)| (x.clone(), f(m))).collect() }
    }

    pub fn try_map(&self, f: impl Fn(&Matrix) -> Result<Matrix, NcError>) -> Result<OpFn, NcError> {
        let mut values = BTreeMap::new();
        for (x, m) in &self.values {
            values.insert(x.clone(), f(m)?);
        }
        Ok(OpFn { model: self.model, d: self.d, values })
    }

    /// Pointwise product `f(x)g(x)`.
    pub fn mul(&self, o: &OpFn) -> Result<OpFn, NcError> {
        self.check(o)?;
        let values = self.values.iter().filter_map(|(x, m)| o.values.get(x).map(|n| (x.clone(), m * n))).collect();
        Ok(OpFn { model: self.model, d: self.d, values })
    }

    /// `1_S f`.
    pub fn restrict(&self, s: &FiniteSubset) -> OpFn {
        OpFn {
            model: self.model,
            d: self.d,
            values: self.values.iter().filter(|(x, _)| s.contains(x)).map(|(x, m)| (x.clone(), m.clone())).collect(),
        }
    }

    /// Drops points whose value is within `tol` of zero.
    pub fn pruned(&self, tol: f64) -> OpFn {
        OpFn {
            model: self.model,
            d: self.d,
            values: self.values.iter().filter(|(_, m)| !m.is_zero(tol)).map(|(x, m)| (x.clone(), m.clone())).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.values().map(|m| m.max_abs()).fold(0.0, f64::max)
    }

    pub fn is_psd(&self, tol: f64) -> Result<bool, NcError> {
        for m in self.values.values() {
            if !m.is_psd(tol)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `(x, min eigenvalue)` of the first non-PSD point.
    pub fn first_non_psd(&self, tol: f64) -> Result<Option<(Elem, f64)>, NcError> {
        for (x, m) in &self.values {
            if !m.is_psd(tol)? {
                return Ok(Some((x.clone(), m.min_eigenvalue()?)));
            }
        }
        Ok(None)
    }
}

/// `φ(f) = Σₓ tr f(x)`, real part.
pub fn trace_phi(f: &OpFn) -> f64 {
    trace_phi_complex(f).re
}

pub fn trace_phi_complex(f: &OpFn) -> C {
    f.values.values().map(|m| m.trace()).sum()
}

/// All singular values of `f`, descending.
pub fn singular_profile(f: &OpFn) -> Result<Vec<f64>, NcError> {
    let mut s = Vec::with_capacity(f.values.len() * f.d);
    for m in f.values.values() {
        s.extend(m.singular_values()?);
    }
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

fn lp_from_profile(s: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        s.first().copied().unwrap_or(0.0)
    } else if p == 1.0 {
        s.iter().sum()
    } else {
        s.iter().map(|x| x.powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// `sup_t t·#{σ > t}`, approached as `t → σⱼ⁻`.
fn weak_from_profile(s: &[f64]) -> f64 {
    let mut best: f64 = 0.0;
    let mut j = 0;
    while j < s.len() {
        let v = s[j];
        let mut k = j;
        while k < s.len() && s[k] == v {
            k += 1;
        }
        best = best.max(v * k as f64);
        j = k;
    }
    best
}

/// `‖f‖_p = φ(|f|^p)^{1/p}`, `p ∈ [1, ∞]`.
pub fn lp_norm(f: &OpFn, p: f64) -> Result<f64, NcError> {
    if !(p >= 1.0) {
        return Err(NcError::Precondition(format!("p = {p} outside [1, ∞]")));
    }
    Ok(lp_from_profile(&singular_profile(f)?, p))
}

/// `‖f‖_{1,∞} = sup_{t>0} t·φ(1_{(t,∞)}(|f|))`.
pub fn weak_l1(f: &OpFn) -> Result<f64, NcError> {
    Ok(weak_from_profile(&singular_profile(f)?))
}

/// `φ({|f| > λ})`.
pub fn distribution(f: &OpFn, lambda: f64) -> Result<usize, NcError> {
    let mut n = 0;
    for m in f.values.values() {
        n += m.count_above(lambda)?;
    }
    Ok(n)
}

#[derive(Clone, Debug, Serialize)]
pub struct NormReport {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub weak_l1: f64,
    pub profile: Vec<f64>,
}

pub fn norm_report(f: &OpFn) -> Result<NormReport, NcError> {
    let s = singular_profile(f)?;
    Ok(NormReport {
        l1: lp_from_profile(&s, 1.0),
        l2: lp_from_profile(&s, 2.0),
        linf: lp_from_profile(&s, f64::INFINITY),
        weak_l1: weak_from_profile(&s),
        profile: s,
    })
}

/// Pointwise spectral projection of `f`; points off the support are evaluated at `0`.
pub fn spectral_projection_fn(f: &OpFn, lambda: f64, side: Side) -> Result<ProjField, NcError> {
    let mut e = ProjField::identity(f.model, f.d);
    let zero_kept = match side {
        Side::Above => 0.0 > lambda + THRESHOLD_TOL,
        Side::AtOrBelow => 0.0 <= lambda + THRESHOLD_TOL,
    };
    if !zero_kept {
        return Err(NcError::Precondition("projection would be zero off the support (infinite trace)".into()));
    }
    for (x, m) in &f.values {
        e.set(x.clone(), m.spectral_projection(lambda, side)?);
    }
    Ok(e)
}

/// Partition lookup for repeated conditional expectations.
#[derive(Clone, Debug)]
pub struct AtomIndex {
    pub atoms: Vec<FiniteSubset>,
    of: FxHashMap<Elem, u32>,
}

impl AtomIndex {
    pub fn new(atoms: Vec<FiniteSubset>) -> Self {
        let mut of = FxHashMap::default();
        for (i, a) in atoms.iter().enumerate() {
            for x in a {
                of.insert(x.clone(), i as u32);
            }
        }
        AtomIndex { atoms, of }
    }

    pub fn atom_of(&self, x: &Elem) -> Option<usize> {
        self.of.get(x).map(|&i| i as usize)
    }

    /// `Σ_A |A|⁻¹ (Σ_{y∈A} f(y)) 1_A`; fails if `f` has mass off the atoms.
    pub fn expectation(&self, f: &OpFn) -> Result<OpFn, NcError> {
        let mut sums: BTreeMap<usize, Matrix> = BTreeMap::new();
        let mut leak = Vec::new();
        for (x, m) in &f.values {
            match self.atom_of(x) {
                Some(i) => sums.entry(i).or_insert_with(|| Matrix::zeros(f.d)).add_assign(m),
                None if m.is_zero(0.0) => {}
                None => leak.push(x.to_string()),
            }
        }
        if !leak.is_empty() {
            leak.truncate(16);
            return Err(NcError::SupportLeak { elements: leak });
        }
        let mut out = OpFn::zero(f.model, f.d);
        for (i, s) in sums {
            let a = &self.atoms[i];
            let avg = s.scale(1.0 / a.len() as f64);
            for x in a {
                out.values.insert(x.clone(), avg.clone());
            }
        }
        Ok(out)
    }

    /// `(Σ_{y∈A} f(y))` for the atom containing `x`.
    pub fn atom_integral(&self, f: &OpFn, atom: usize) -> Matrix {
        let mut s = Matrix::zeros(f.d);
        for x in &self.atoms[atom] {
            if let Some(m) = f.get(x) {
                s.add_assign(m);
            }
        }
        s
    }
}

/// `𝔼f` for the partition given by `atoms`.
pub fn conditional_expectation(f: &OpFn, atoms: &[FiniteSubset]) -> Result<OpFn, NcError> {
    AtomIndex::new(atoms.to_vec()).expectation(f)
}

/// `𝔸_F f(x) = |F|⁻¹ Σ_{g∈F} f(xg)`, supported on `supp(f)·F⁻¹`.
pub fn averaging(f: &OpFn, fset: &FiniteSubset) -> Result<OpFn, NcError> {
    f.model.check_same(&fset.model())?;
    if fset.is_empty() {
        return Err(NcError::Precondition("averaging over an empty set".into()));
    }
    let model = f.model;
    let w = 1.0 / fset.len() as f64;
    let inv: Vec<Elem> = fset.iter().map(|g| model.inverse(g)).collect();
    let mut acc: FxHashMap<Elem, Matrix> = FxHashMap::default();
    for (y, m) in &f.values {
        for gi in &inv {
            let x = model.multiply(y, gi);
            match acc.get_mut(&x) {
                Some(v) => v.add_scaled(m, w),
                None => {
                    acc.insert(x, m.scale(w));
                }
            }
        }
    }
    Ok(OpFn { model, d: f.d, values: acc.into_iter().collect() })
}

/// `𝔸_F f(x)` at a single point.
pub fn averaging_at(f: &OpFn, fset: &FiniteSubset, x: &Elem) -> Matrix {
    let model = f.model;
    let mut s = Matrix::zeros(f.d);
    if f.values.len() < fset.len() {
        let xi = model.inverse(x);
        for (y, m) in &f.values {
            if fset.contains(&model.multiply(&xi, y)) {
                s.add_assign(m);
            }
        }
    } else {
        for g in fset {
            if let Some(m) = f.get(&model.multiply(x, g)) {
                s.add_assign(m);
            }
        }
    }
    s.scale(1.0 / fset.len() as f64)
}

/// Projection-valued function; absent points carry the identity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjField {
    pub model: GroupModel,
    pub d: usize,
    pub values: BTreeMap<Elem, Matrix>,
}

impl ProjField {
    pub fn identity(model: GroupModel, d: usize) -> Self {
        ProjField { model, d, values: BTreeMap::new() }
    }

    pub fn at(&self, x: &Elem) -> Matrix {
        self.values.get(x).cloned().unwrap_or_else(|| Matrix::identity(self.d))
    }

    pub fn set(&mut self, x: Elem, p: Matrix) {
        self.values.insert(x, p);
    }

    /// `φ(1 − e)`.
    pub fn complement_trace(&self) -> f64 {
        self.values.values().map(|p| self.d as f64 - p.trace().re).sum()
    }

    /// `1 − e` as a finitely supported function.
    pub fn complement(&self) -> OpFn {
        let id = Matrix::identity(self.d);
        OpFn {
            model: self.model,
            d: self.d,
            values: self.values.iter().map(|(x, p)| (x.clone(), &id - p)).collect(),
        }
    }

    fn combine(&self, o: &ProjField, f: impl Fn(&Matrix, &Matrix) -> Result<Matrix, NcError>) -> Result<ProjField, NcError> {
        self.model.check_same(&o.model)?;
        let mut out = ProjField::identity(self.model, self.d);
        let keys: std::collections::BTreeSet<&Elem> = self.values.keys().chain(o.values.keys()).collect();
        for x in keys {
            out.set(x.clone(), f(&self.at(x), &o.at(x))?);
        }
        Ok(out)
    }

    /// Pointwise `e ∧ e'`.
    pub fn meet(&self, o: &ProjField) -> Result<ProjField, NcError> {
        self.combine(o, |a, b| a.meet(b))
    }

    /// Pointwise `e ∨ e'`.
    pub fn join(&self, o: &ProjField) -> Result<ProjField, NcError> {
        self.combine(o, |a, b| a.join(b))
    }

    /// Largest pointwise projection defect.
    pub fn max_defect(&self) -> f64 {
        self.values.values().map(|p| {
            let (a, b) = p.projection_defect();
            a.max(b)
        }).fold(0.0, f64::max)
    }

    /// `e ≤ e'` at every point.
    pub fn le(&self, o: &ProjField, tol: f64) -> bool {
        let keys: std::collections::BTreeSet<&Elem> = self.values.keys().chain(o.values.keys()).collect();
        keys.into_iter().all(|x| self.at(x).proj_le(&o.at(x), tol))
    }

    /// Drops points equal to the identity within `tol`.
    pub fn pruned(&self, tol: f64) -> ProjField {
        let id = Matrix::identity(self.d);
        ProjField {
            model: self.model,
            d: self.d,
            values: self
                .values
                .iter()
                .filter(|(_, p)| !(*p - &id).is_zero(tol))
                .map(|(x, p)| (x.clone(), p.clone()))
                .collect(),
        }
    }
}

/// Random PSD matrix `A*A` with Gaussian-free uniform entries in `[−1, 1]`, scaled by `s`.
pub fn random_psd(rng: &mut impl Rng, d: usize, s: f64) -> Matrix {
    let mut a = Matrix::zeros(d);
    for i in 0..d {
        for j in 0..d {
            a[(i, j)] = C::new(rng.gen_range(-1.0..1.0), if d > 1 { rng.gen_range(-1.0..1.0) } else { 0.0 });
        }
    }
    (&a.adjoint() * &a).scale(s)
}

/// Random Hermitian matrix with entries in `[−1, 1]`.
pub fn random_hermitian(rng: &mut impl Rng, d: usize) -> Matrix {
    let mut a = Matrix::zeros(d);
    for i in 0..d {
        a[(i, i)] = C::new(rng.gen_range(-1.0..1.0), 0.0);
        for j in i + 1..d {
            let z = C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            a[(i, j)] = z;
            a[(j, i)] = z.conj();
        }
    }
    a
}

/// Random PSD function on `support`; each point is kept with probability `density`.
pub fn random_psd_fn(rng: &mut impl Rng, support: &FiniteSubset, d: usize, density: f64) -> OpFn {
    let mut f = OpFn::zero(support.model(), d);
    for x in support {
        if rng.gen_bool(density) {
            let s = rng.gen_range(0.1..4.0);
            f.insert(x.clone(), random_psd(rng, d, s));
        }
    }
    f
}

/// Text form: header `# group <name> d <d>`, then one line per point:
/// element coordinates, `;`, then `d²` complex entries row-major as `re im` pairs.
pub fn write_opfn(f: &OpFn) -> String {
    let mut s = format!("# group {} d {}\n", f.model.name(), f.d);
    for (x, m) in &f.values {
        s.push_str(&x.to_string());
        s.push_str(" ;");
        for z in m.entries() {
            s.push_str(&format!(" {:e} {:e}", z.re, z.im));
        }
        s.push('\n');
    }
    s
}

/// Inverse of [`write_opfn`]; the header may be omitted if `d` is given.
pub fn parse_opfn(model: GroupModel, d: Option<usize>, text: &str) -> Result<OpFn, NcError> {
    let mut dim = d;
    let mut values = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('#') {
            let toks: Vec<&str> = h.split_whitespace().collect();
            if let Some(p) = toks.iter().position(|t| *t == "d") {
                let v = toks.get(p + 1).and_then(|t| t.parse().ok());
                if v.is_none() {
                    return Err(NcError::Parse { line: i + 1, msg: "bad dimension in header".into() });
                }
                if dim.is_some() && dim != v {
                    return Err(NcError::Parse { line: i + 1, msg: "dimension disagrees with header".into() });
                }
                dim = v;
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| NcError::Parse { line: i + 1, msg };
        let d = dim.ok_or_else(|| err("dimension unknown; add a `# d <n>` header".into()))?;
        let (lhs, rhs) = line.split_once(';').ok_or_else(|| err("missing ';' between element and entries".into()))?;
        let coords: Vec<i64> = lhs
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse().map_err(|_| err(format!("bad integer {t:?}"))))
            .collect::<Result<_, _>>()?;
        let x = Elem::new(&coords);
        model.validate(&x).map_err(|e| err(e.to_string()))?;
        let nums: Vec<f64> = rhs
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| err(format!("bad number {t:?}"))))
            .collect::<Result<_, _>>()?;
        if nums.len() != 2 * d * d {
            return Err(err(format!("expected {} numbers, found {}", 2 * d * d, nums.len())));
        }
        let rows: Vec<Vec<C>> = (0..d).map(|r| (0..d).map(|c| C::new(nums[2 * (r * d + c)], nums[2 * (r * d + c) + 1])).collect()).collect();
        values.push((x, Matrix::from_rows(&rows)?));
    }
    let d = dim.ok_or_else(|| NcError::Parse { line: 0, msg: "empty input without dimension".into() })?;
    OpFn::from_values(model, d, values)
}
