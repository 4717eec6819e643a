use serde::Serialize;

use crate::group::{
    check_condition, interior, is_boundary_invariant, is_invariant, le_scaled, q, q_str, ratio, ConditionReport, Elem,
    FiniteSubset, InvarianceCondition, Q,
};
use crate::tiling::{quasi_tile_with, TileOptions};

use super::FiltrationError;

/// Per-tile conclusions of the disjointification lemma.
#[derive(Clone, Debug, Serialize)]
pub struct DisjointTileCheck {
    pub size: usize,
    pub tile_size: usize,
    /// `|Iᵢ| ≥ (1−2ε)|Eᵢ|`.
    pub size_ok: bool,
    /// `(4ε, K)`-boundary-invariant.
    pub boundary_ok: bool,
    /// `(6δ, L)`-invariant.
    pub invariance_ok: bool,
    /// Tile satisfies `(ε,K⁻¹K)`-boundary-invariance and `(δ,L)`-invariance.
    pub hypotheses_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DisjointifyResult {
    pub atoms: Vec<FiniteSubset>,
    pub checks: Vec<DisjointTileCheck>,
    /// The family is ε-disjoint in the given order and `ε < δ < 1/4`.
    pub family_hypotheses_ok: bool,
}

impl DisjointifyResult {
    /// Every asserted conclusion holds for tiles whose hypotheses hold.
    pub fn passes(&self) -> bool {
        !self.family_hypotheses_ok
            || self.checks.iter().all(|c| !c.hypotheses_ok || (c.size_ok && c.boundary_ok && c.invariance_ok))
    }
}

/// `Iᵢ = Int_K(Eᵢ) ∖ ∪_{j<i} Int_K(E_j)`, so a tile yields to those built before it.
pub(crate) fn disjointify(tiles: &[FiniteSubset], k: &FiniteSubset) -> Result<Vec<FiniteSubset>, FiltrationError> {
    let trivial = k.len() == 1 && k.elems()[0] == k.model().identity();
    let mut taken: rustc_hash::FxHashSet<Elem> = rustc_hash::FxHashSet::default();
    let mut out = Vec::with_capacity(tiles.len());
    for t in tiles {
        let int = if trivial { t.clone() } else { interior(k, t)? };
        let atom = int.filter(|e| !taken.contains(e));
        taken.extend(int.iter().cloned());
        out.push(atom);
    }
    Ok(out)
}

/// Disjointifies ε-disjoint tiles and checks every conclusion exactly.
pub fn disjointify_tiles(
    tiles: &[FiniteSubset],
    k: &FiniteSubset,
    eps: &Q,
    delta: &Q,
    l: &FiniteSubset,
) -> Result<DisjointifyResult, FiltrationError> {
    let atoms = disjointify(tiles, k)?;
    let model = k.model();
    let kk = FiniteSubset::new(model, k.iter().flat_map(|a| k.iter().map(move |b| model.multiply(&model.inverse(a), b))));
    let dis = crate::tiling::eps_disjoint_check(tiles, eps);
    let family_hypotheses_ok = dis.holds && *eps < *delta && *delta < q(1, 4);
    let four = q(4, 1) * eps;
    let six = q(6, 1) * delta;
    let one_minus = q(1, 1) - q(2, 1) * eps;
    let mut checks = Vec::with_capacity(atoms.len());
    for (t, a) in tiles.iter().zip(&atoms) {
        let hyp = !t.is_empty() && is_boundary_invariant(t, eps, &kk)?.holds && is_invariant(t, delta, l)?.holds;
        let size_ok = ratio(a.len(), 1) >= &one_minus * ratio(t.len(), 1);
        let (boundary_ok, invariance_ok) = if a.is_empty() {
            (false, false)
        } else {
            (is_boundary_invariant(a, &four, k)?.holds, is_invariant(a, &six, l)?.holds)
        };
        checks.push(DisjointTileCheck { size: a.len(), tile_size: t.len(), size_ok, boundary_ok, invariance_ok, hypotheses_ok: hyp });
    }
    Ok(DisjointifyResult { atoms, checks, family_hypotheses_ok })
}

/// An atom of a quasi-partition with its translate witness (`γA ⊆ B`).
#[derive(Clone, Debug)]
pub struct PartitionAtom {
    pub set: FiniteSubset,
    pub witness: Elem,
    pub condition: Option<ConditionReport>,
}

/// Output of the quasi-partition builder.
#[derive(Clone, Debug)]
pub struct QuasiPartition {
    pub atoms: Vec<PartitionAtom>,
    pub covered: usize,
    pub total: usize,
    /// Disjointified pieces discarded because they fail the condition.
    pub dropped: usize,
    /// `|∪A| ≥ (1−ε)|D|`.
    pub coverage_ok: bool,
    pub diagnostics: Vec<String>,
}

impl QuasiPartition {
    pub fn covered_set(&self) -> FiniteSubset {
        let model = self.atoms.first().map(|a| a.set.model());
        match model {
            Some(m) => FiniteSubset::union_all(m, self.atoms.iter().map(|a| &a.set)),
            None => FiniteSubset::empty(crate::group::GroupModel::Zd(1)),
        }
    }
}

/// Builds an `(ε, B, I)`-partition of `d` from a quasi-tiling by translates of `b`.
///
/// Atoms are translates of `b` inside `d` with overlaps removed; pieces failing
/// the condition are dropped. A translate witness `γ` with `γA ⊆ B` is stored
/// for each atom.
pub fn build_quasi_partition(
    d: &FiniteSubset,
    b: &FiniteSubset,
    cond: &InvarianceCondition,
    eps: &Q,
) -> Result<QuasiPartition, FiltrationError> {
    let model = d.model();
    let mut diagnostics = Vec::new();
    if d.is_empty() {
        return Ok(QuasiPartition { atoms: vec![], covered: 0, total: 0, dropped: 0, coverage_ok: true, diagnostics });
    }
    let id = model.identity();
    let singleton_template = b.len() == 1;
    let (tiles, centers): (Vec<FiniteSubset>, Vec<Elem>) = if singleton_template {
        // Translates of a one-point template are exactly the points of D.
        let g = &b.elems()[0];
        let ginv = model.inverse(g);
        d.iter().map(|x| (FiniteSubset::singleton(model, x.clone()), model.multiply(x, &ginv))).unzip()
    } else {
        let run = quasi_tile_with(d, std::slice::from_ref(b), eps, &TileOptions { check_hypotheses: false, track_residual: false })?;
        let centers = run.tiling.scales[0].1.clone();
        (centers.iter().map(|x| b.left_translate(x)).collect(), centers)
    };
    let pieces = disjointify(&tiles, &FiniteSubset::singleton(model, id))?;
    let mut atoms = Vec::new();
    let mut dropped = 0;
    let mut covered = 0;
    for (piece, x) in pieces.into_iter().zip(centers) {
        if piece.is_empty() {
            continue;
        }
        let rep = if cond.is_empty() { None } else { Some(check_condition(&piece, cond)?) };
        if rep.as_ref().map(|r| r.holds).unwrap_or(true) {
            covered += piece.len();
            atoms.push(PartitionAtom { set: piece, witness: model.inverse(&x), condition: rep });
        } else {
            dropped += 1;
        }
    }
    let coverage_ok = le_scaled(d.len() - covered, eps, d.len());
    if !coverage_ok {
        diagnostics.push(format!("coverage {}/{} below 1 − {}", covered, d.len(), q_str(eps)));
    }
    Ok(QuasiPartition { atoms, covered, total: d.len(), dropped, coverage_ok, diagnostics })
}
