use std::collections::BTreeMap;

use crate::filtration::FilteredSequence;
use crate::group::{Elem, FiniteSubset, GroupModel};
use crate::ncalg::{AtomIndex, Matrix, OpFn};

use super::CzError;

/// Nested partitions `𝒫_0 ⊂ … ⊂ 𝒫_K` of a window, with parent links and
/// optional Følner sets and admissibility tags.
#[derive(Clone, Debug)]
pub struct Levels {
    pub model: GroupModel,
    pub window: FiniteSubset,
    index: Vec<AtomIndex>,
    parent: Vec<Vec<u32>>,
    /// `F_n` per level, when the partitions come from a filtered sequence.
    pub folner: Vec<FiniteSubset>,
    /// Admissibility tag per atom.
    pub admissible: Vec<Vec<bool>>,
}

impl Levels {
    pub fn from_sequence(seq: &FilteredSequence) -> Result<Self, CzError> {
        let parts: Vec<Vec<FiniteSubset>> = seq.p.iter().map(|p| p.atoms.iter().map(|a| a.set.clone()).collect()).collect();
        let mut l = Self::from_partitions(seq.model, parts)?;
        l.folner = seq.f.clone();
        l.admissible = seq.p.iter().map(|p| p.atoms.iter().map(|a| a.admissible).collect()).collect();
        Ok(l)
    }

    /// Validates that level 0 is singletons, every level partitions the same
    /// window, and each level refines the next.
    pub fn from_partitions(model: GroupModel, levels: Vec<Vec<FiniteSubset>>) -> Result<Self, CzError> {
        let pre = |s: String| CzError::Precondition(s);
        if levels.is_empty() {
            return Err(pre("no levels".into()));
        }
        if levels[0].iter().any(|a| a.len() != 1) {
            return Err(pre("level-0 atoms must be singletons".into()));
        }
        let window = FiniteSubset::union_all(model, levels[0].iter());
        let index: Vec<AtomIndex> = levels.into_iter().map(AtomIndex::new).collect();
        for (k, ix) in index.iter().enumerate() {
            let total: usize = ix.atoms.iter().map(|a| a.len()).sum();
            if total != window.len() || window.iter().any(|x| ix.atom_of(x).is_none()) {
                return Err(pre(format!("level {k} does not partition the window")));
            }
            if ix.atoms.iter().any(|a| a.is_empty()) {
                return Err(pre(format!("level {k} has an empty atom")));
            }
        }
        let mut parent = Vec::with_capacity(index.len());
        for k in 0..index.len() {
            if k + 1 == index.len() {
                parent.push(Vec::new());
                continue;
            }
            let mut par = Vec::with_capacity(index[k].atoms.len());
            for a in &index[k].atoms {
                let p = index[k + 1].atom_of(&a.elems()[0]).unwrap();
                if a.iter().any(|x| index[k + 1].atom_of(x) != Some(p)) {
                    return Err(pre(format!("level {k} does not refine level {}", k + 1)));
                }
                par.push(p as u32);
            }
            parent.push(par);
        }
        let admissible = index.iter().map(|ix| vec![true; ix.atoms.len()]).collect();
        Ok(Levels { model, window, index, parent, folner: Vec::new(), admissible })
    }

    /// Dyadic blocks `[j·2^k, (j+1)·2^k)` of `[0, 2^depth)` in Z.
    pub fn dyadic(depth: u32, leaf: u32) -> Result<Self, CzError> {
        let z = GroupModel::Zd(1);
        let n = 1i64 << (depth + leaf);
        let levels = (0..=depth)
            .map(|k| {
                let w = if k == 0 { 1 } else { 1i64 << (k + leaf) };
                (0..n / w).map(|j| FiniteSubset::new(z, (j * w..(j + 1) * w).map(|x| Elem::new(&[x])))).collect()
            })
            .collect();
        Self::from_partitions(z, levels)
    }

    pub fn depth(&self) -> usize {
        self.index.len() - 1
    }

    pub fn atoms(&self, k: usize) -> &[FiniteSubset] {
        &self.index[k].atoms
    }

    pub fn atom_of(&self, k: usize, x: &Elem) -> Option<usize> {
        self.index.get(k)?.atom_of(x)
    }

    /// Atom of `𝒫_{k+1}` containing atom `a` of `𝒫_k`; `None` at the top level.
    pub fn parent(&self, k: usize, a: usize) -> Option<usize> {
        self.parent.get(k)?.get(a).map(|&p| p as usize)
    }

    /// Averages of `f` over atoms of `𝒫_k` that meet its support.
    pub fn atom_averages(&self, k: usize, f: &OpFn) -> BTreeMap<usize, Matrix> {
        let ix = &self.index[k];
        let mut sums: BTreeMap<usize, Matrix> = BTreeMap::new();
        for (x, m) in &f.values {
            if let Some(a) = ix.atom_of(x) {
                sums.entry(a).or_insert_with(|| Matrix::zeros(f.d)).add_assign(m);
            }
        }
        for (a, s) in sums.iter_mut() {
            *s = s.scale(1.0 / ix.atoms[*a].len() as f64);
        }
        sums
    }

    /// `𝔼_k f`; `𝔼_{K+1} = 0`.
    pub fn expectation(&self, k: usize, f: &OpFn) -> Result<OpFn, CzError> {
        if k > self.depth() {
            return Ok(OpFn::zero(f.model, f.d));
        }
        Ok(self.index[k].expectation(f)?)
    }

    /// Largest deviation of `f` from its value at the first point of each atom of `𝒫_k`.
    pub fn spread(&self, k: usize, f: &OpFn) -> f64 {
        let mut worst: f64 = 0.0;
        let mut seen = std::collections::BTreeSet::new();
        for x in f.values.keys() {
            let Some(a) = self.atom_of(k, x) else { continue };
            if !seen.insert(a) {
                continue;
            }
            let atom = &self.atoms(k)[a];
            let base = f.at(&atom.elems()[0]);
            for y in atom {
                worst = worst.max((&f.at(y) - &base).max_abs());
            }
        }
        worst
    }

    pub fn is_union_of_atoms(&self, k: usize, e: &FiniteSubset) -> bool {
        e.iter().all(|x| match self.atom_of(k, x) {
            Some(a) => self.atoms(k)[a].is_subset(e),
            None => false,
        })
    }
}
