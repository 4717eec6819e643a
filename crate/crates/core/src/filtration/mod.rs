//! Quasi-partitions and regular filtered Følner sequences on a finite window.
//!
//! Levels run `0..=depth`. The window is `D_depth`; every level partitions it.

mod partition;
mod validate;

use rustc_hash::FxHashMap;
use serde::Serialize;
use thiserror::Error;

use crate::group::{
    folner_shape, folner_size, is_boundary_invariant, is_invariant, q, q_str, ser_q, ser_q_vec, Clause, ClauseKind, Elem, FiniteSubset,
    GroupError, GroupModel, InvarianceCondition, Locator, Schedule, Q,
};
use crate::tiling::TilingError;

pub use partition::{
    build_quasi_partition, disjointify_tiles, DisjointTileCheck, DisjointifyResult, PartitionAtom, QuasiPartition,
};
pub use validate::{
    admissible_region, is_admissible_atom, validate_regular, AdmissibilityTag, RegularityReport, RegularityRow,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FiltrationError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Tiling(#[from] TilingError),
    #[error("window exhausted at level {level}: {detail}; use a finer or longer side-length schedule or raise max_window")]
    WindowExhausted { level: usize, detail: String },
    #[error("precondition failed: {0}")]
    Precondition(String),
}

/// One atom of a level partition.
#[derive(Clone, Debug, Serialize)]
pub struct Atom {
    pub set: FiniteSubset,
    /// Tagged admissible by construction.
    pub admissible: bool,
    /// `g` with `g·A ⊆ B_level`, when known.
    pub witness: Option<Elem>,
    /// Singleton added to complete the partition of the window.
    pub completion: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Partition {
    pub level: usize,
    pub atoms: Vec<Atom>,
}

impl Partition {
    pub fn union(&self, model: GroupModel) -> FiniteSubset {
        FiniteSubset::union_all(model, self.atoms.iter().map(|a| &a.set))
    }

    pub fn admissible_union(&self, model: GroupModel) -> FiniteSubset {
        FiniteSubset::union_all(model, self.atoms.iter().filter(|a| a.admissible).map(|a| &a.set))
    }
}

/// Per-shell coverage bookkeeping `(level, covered, shell size, δᵢ)`.
#[derive(Clone, Debug, Serialize)]
pub struct ShellCoverage {
    pub shell: usize,
    pub size: usize,
    pub levels: Vec<(usize, usize, String)>,
    pub ok: bool,
}

/// The triple `(Fₙ, Bₙ, 𝒫ₙ)` with witnesses `Dₙ`.
#[derive(Clone, Debug, Serialize)]
pub struct FilteredSequence {
    pub model: GroupModel,
    pub f: Vec<FiniteSubset>,
    pub b: Vec<FiniteSubset>,
    pub p: Vec<Partition>,
    pub d: Vec<FiniteSubset>,
    #[serde(serialize_with = "ser_q")]
    pub c: Q,
    #[serde(serialize_with = "ser_q")]
    pub eps: Q,
    #[serde(serialize_with = "ser_q_vec")]
    pub eps_n: Vec<Q>,
    /// Schedule indices of `Fₙ` and `Dₙ`.
    pub f_index: Vec<usize>,
    pub d_index: Vec<usize>,
    pub schedule: Schedule,
    pub shells: Vec<ShellCoverage>,
    #[serde(skip)]
    atom_of: Vec<Vec<u32>>,
}

impl FilteredSequence {
    pub fn depth(&self) -> usize {
        self.p.len() - 1
    }

    /// The window `D_depth`.
    pub fn window(&self) -> &FiniteSubset {
        self.d.last().unwrap()
    }

    /// For each window element (canonical order), the index of its atom in `𝒫_level`.
    pub fn atom_index(&self, level: usize) -> &[u32] {
        &self.atom_of[level]
    }

    /// Assembles a sequence from explicit parts; atom indices are recomputed.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        model: GroupModel,
        f: Vec<FiniteSubset>,
        b: Vec<FiniteSubset>,
        p: Vec<Partition>,
        d: Vec<FiniteSubset>,
        c: Q,
        eps: Q,
        schedule: Schedule,
    ) -> Result<Self, FiltrationError> {
        let depth = p.len().checked_sub(1).ok_or_else(|| FiltrationError::Precondition("no levels".into()))?;
        if f.len() != depth + 1 || b.len() != depth + 1 || d.len() != depth + 1 {
            return Err(FiltrationError::Precondition("F, B, P, D lengths differ".into()));
        }
        let eps_n = eps_schedule(&eps, depth + 1);
        let mut s = FilteredSequence {
            model,
            f,
            b,
            p,
            d,
            c,
            eps,
            eps_n,
            f_index: vec![],
            d_index: vec![],
            schedule,
            shells: vec![],
            atom_of: vec![],
        };
        s.index_atoms()?;
        Ok(s)
    }

    fn index_atoms(&mut self) -> Result<(), FiltrationError> {
        let window = self.window().clone();
        let loc = Locator::new(&window);
        self.atom_of.clear();
        for part in &self.p {
            let mut idx = vec![u32::MAX; window.len()];
            for (ai, a) in part.atoms.iter().enumerate() {
                for e in &a.set {
                    let pos = loc.get(e).ok_or_else(|| {
                        FiltrationError::Precondition(format!("atom element {e} outside the window at level {}", part.level))
                    })?;
                    if idx[pos] != u32::MAX {
                        return Err(FiltrationError::Precondition(format!("atoms overlap at level {}", part.level)));
                    }
                    idx[pos] = ai as u32;
                }
            }
            if idx.iter().any(|&v| v == u32::MAX) {
                return Err(FiltrationError::Precondition(format!("level {} does not cover the window", part.level)));
            }
            self.atom_of.push(idx);
        }
        Ok(())
    }
}

/// Builder configuration.
#[derive(Clone, Debug)]
pub struct FiltrationConfig {
    pub model: GroupModel,
    pub eps: Q,
    pub c: Q,
    pub depth: usize,
    pub schedule: Schedule,
    /// Largest Følner set (elements) the builder may construct.
    pub max_window: u128,
    /// Optional extra requirement: shells are `(θ, B_{n−1})`-boundary-invariant.
    pub shell_threshold: Option<Q>,
}

impl FiltrationConfig {
    pub fn new(model: GroupModel, eps: Q, c: Q, depth: usize, schedule: Schedule) -> Self {
        FiltrationConfig { model, eps, c, depth, schedule, max_window: 1 << 22, shell_threshold: None }
    }
}

/// `εₙ = ε / 2ⁿ⁺¹`, so that `Π(1−εₙ) ≥ 1−ε`.
pub fn eps_schedule(eps: &Q, n: usize) -> Vec<Q> {
    (0..n).map(|i| eps / Q::from_integer(num_bigint::BigInt::from(2u8).pow(i as u32 + 1))).collect()
}

fn pow2(e: i64) -> Q {
    if e >= 0 {
        q(1 << e, 1)
    } else {
        q(1, 1 << (-e))
    }
}

/// `Iₙ`: `(2^{k−n}, F_k)`-invariance for all `k < n`.
pub fn atom_condition(f: &[FiniteSubset], n: usize) -> InvarianceCondition {
    InvarianceCondition {
        clauses: (0..n.min(f.len()))
            .map(|k| Clause { kind: ClauseKind::Invariant, eps: pow2(k as i64 - n as i64), k: f[k].clone() })
            .collect(),
    }
}

/// `Jₙ` (B_k reading): `(2^{k−n}, B_k)`-boundary-invariance for all `k ≤ n`.
fn j_holds(fset: &FiniteSubset, b: &[FiniteSubset], n: usize) -> Result<bool, FiltrationError> {
    for k in (0..=n).rev() {
        if !is_boundary_invariant(fset, &pow2(k as i64 - n as i64), &b[k])?.holds {
            return Ok(false);
        }
    }
    Ok(true)
}

fn condition_holds(set: &FiniteSubset, cond: &InvarianceCondition) -> Result<bool, FiltrationError> {
    for c in &cond.clauses {
        let ok = match c.kind {
            ClauseKind::Invariant => is_invariant(set, &c.eps, &c.k)?.holds,
            ClauseKind::BoundaryInvariant => is_boundary_invariant(set, &c.eps, &c.k)?.holds,
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Nested partitions of one shell, indexed by level `0..k`.
struct ShellBuild {
    levels: Vec<Vec<(FiniteSubset, Elem)>>,
    coverage: ShellCoverage,
}

/// Partitions the shell `D_k ∖ D_{k−1}` at level `k−1` by `B_{k−1}` and refines
/// each atom descending to level 0.
fn build_shell(
    shell: &FiniteSubset,
    k: usize,
    b: &[FiniteSubset],
    f: &[FiniteSubset],
    eps_n: &[Q],
) -> Result<ShellBuild, FiltrationError> {
    let mut levels: Vec<Vec<(FiniteSubset, Elem)>> = vec![Vec::new(); k];
    let top = build_quasi_partition(shell, &b[k - 1], &atom_condition(f, k - 1), &eps_n[k - 1])?;
    levels[k - 1] = top.atoms.into_iter().map(|a| (a.set, a.witness)).collect();
    for i in (1..k).rev() {
        let cond = atom_condition(f, i - 1);
        let mut next = Vec::new();
        for (a, _) in &levels[i] {
            let qp = build_quasi_partition(a, &b[i - 1], &cond, &eps_n[i - 1])?;
            next.extend(qp.atoms.into_iter().map(|x| (x.set, x.witness)));
        }
        levels[i - 1] = next;
    }
    let mut rows = Vec::new();
    let mut ok = true;
    let mut prod = q(1, 1);
    for i in (0..k).rev() {
        prod *= q(1, 1) - &eps_n[i];
        let delta = q(1, 1) - &prod;
        let covered: usize = levels[i].iter().map(|(a, _)| a.len()).sum();
        if !crate::group::le_scaled(shell.len() - covered, &delta, shell.len()) {
            ok = false;
        }
        rows.push((i, covered, q_str(&delta)));
    }
    rows.reverse();
    Ok(ShellBuild { levels, coverage: ShellCoverage { shell: k, size: shell.len(), levels: rows, ok } })
}

/// Runs the inductive construction of a regular filtered Følner sequence.
pub fn build_filtered_sequence(cfg: &FiltrationConfig) -> Result<FilteredSequence, FiltrationError> {
    let zero = q(0, 1);
    let one = q(1, 1);
    if cfg.eps <= zero || cfg.eps >= one || cfg.c <= zero || cfg.c >= one {
        return Err(FiltrationError::Precondition("ε and c must lie in (0,1)".into()));
    }
    if cfg.depth < 1 {
        return Err(FiltrationError::Precondition("depth must be at least 1".into()));
    }
    let model = cfg.model;
    let depth = cfg.depth;
    let eps_n = eps_schedule(&cfg.eps, depth + 1);
    let id = FiniteSubset::identity_set(model);
    let mut f = Vec::new();
    let mut b = vec![id.clone()];
    let mut d = vec![id.clone()];
    let mut f_index = Vec::new();
    let mut d_index = vec![0usize];
    let mut shells: Vec<ShellBuild> = Vec::new();

    let fits = |idx: usize| -> Option<i64> {
        let l = cfg.schedule.side(idx)?;
        (folner_size(model, l) <= cfg.max_window).then_some(l)
    };

    // F₀
    let (i0, f0) = find_f(cfg, &b, 0, 0, &fits)?;
    f.push(f0);
    f_index.push(i0);

    for n in 1..=depth {
        let cond = atom_condition(&f, n);
        let prev = d[n - 1].clone();
        let mut idx = d_index[n - 1];
        let chosen = loop {
            let Some(l) = fits(idx) else {
                return Err(FiltrationError::WindowExhausted {
                    level: n,
                    detail: format!("no Følner set up to index {idx} satisfies the atom condition and shell coverage"),
                });
            };
            let cand = folner_shape(model, l);
            if prev.is_subset(&cand) && condition_holds(&cand, &cond)? {
                let shell = cand.difference(&prev);
                let thr_ok = match (&cfg.shell_threshold, shell.is_empty()) {
                    (Some(t), false) => is_boundary_invariant(&shell, t, &b[n - 1])?.holds,
                    _ => true,
                };
                if thr_ok {
                    let sb = build_shell(&shell, n, &b, &f, &eps_n)?;
                    if sb.coverage.ok {
                        break (idx, cand, sb);
                    }
                }
            }
            idx += 1;
        };
        let (di, dn, sb) = chosen;
        d.push(dn.clone());
        d_index.push(di);
        b.push(dn);
        shells.push(sb);
        let (fi, fset) = find_f(cfg, &b, n, f_index[n - 1] + 1, &fits)?;
        f.push(fset);
        f_index.push(fi);
    }

    // Assemble 𝒫ₙ = ∪_{k>n} 𝒫ₙ^{(k)} ∪ {Dₙ}, completed by singletons.
    let window = d[depth].clone();
    let mut p = Vec::with_capacity(depth + 1);
    for n in 0..=depth {
        let mut atoms = vec![Atom { set: d[n].clone(), admissible: true, witness: Some(model.identity()), completion: false }];
        let mut covered: rustc_hash::FxHashSet<Elem> = d[n].iter().cloned().collect();
        for sb in shells.iter().skip(n) {
            for (a, w) in &sb.levels[n] {
                covered.extend(a.iter().cloned());
                atoms.push(Atom { set: a.clone(), admissible: true, witness: Some(w.clone()), completion: false });
            }
        }
        for e in &window {
            if !covered.contains(e) {
                atoms.push(Atom { set: FiniteSubset::singleton(model, e.clone()), admissible: false, witness: None, completion: true });
            }
        }
        p.push(Partition { level: n, atoms });
    }
    let mut seq = FilteredSequence {
        model,
        f,
        b,
        p,
        d,
        c: cfg.c.clone(),
        eps: cfg.eps.clone(),
        eps_n,
        f_index,
        d_index,
        schedule: cfg.schedule.clone(),
        shells: shells.into_iter().map(|s| s.coverage).collect(),
        atom_of: vec![],
    };
    seq.index_atoms()?;
    Ok(seq)
}

/// Smallest schedule index `≥ start` whose set satisfies `Jₙ`, by galloping then bisection.
fn find_f(
    cfg: &FiltrationConfig,
    b: &[FiniteSubset],
    n: usize,
    start: usize,
    fits: &dyn Fn(usize) -> Option<i64>,
) -> Result<(usize, FiniteSubset), FiltrationError> {
    let model = cfg.model;
    let mut cache: FxHashMap<usize, bool> = FxHashMap::default();
    let mut test = |i: usize| -> Result<Option<bool>, FiltrationError> {
        if let Some(&v) = cache.get(&i) {
            return Ok(Some(v));
        }
        let Some(l) = fits(i) else { return Ok(None) };
        let v = j_holds(&folner_shape(model, l), b, n)?;
        cache.insert(i, v);
        Ok(Some(v))
    };
    let exhausted = |i: usize| FiltrationError::WindowExhausted {
        level: n,
        detail: format!("no Følner set from index {start} up to {i} is (2^(k−n), B_k)-boundary-invariant"),
    };
    let mut lo = start; // candidate index
    let mut step = 1;
    let mut last_fail: Option<usize> = None;
    let hit = loop {
        match test(lo)? {
            Some(true) => break lo,
            Some(false) => {
                last_fail = Some(lo);
                lo += step;
                step *= 2;
            }
            None => {
                // Past the limit: probe the gap before giving up.
                let from = last_fail.map(|x| x + 1).unwrap_or(start);
                let mut found = None;
                let mut i = from;
                while fits(i).is_some() && i < lo {
                    if test(i)? == Some(true) {
                        found = Some(i);
                        break;
                    }
                    i += 1;
                }
                match found {
                    Some(i) => break i,
                    None => return Err(exhausted(lo)),
                }
            }
        }
    };
    let mut l = last_fail.map(|x| x + 1).unwrap_or(start);
    let mut h = hit;
    while l < h {
        let m = l + (h - l) / 2;
        if test(m)? == Some(true) {
            h = m;
        } else {
            l = m + 1;
        }
    }
    let side = fits(h).unwrap();
    Ok((h, folner_shape(model, side)))
}
