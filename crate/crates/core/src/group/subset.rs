use std::sync::OnceLock;

use rustc_hash::FxHashSet;

use super::{Elem, GroupError, GroupModel};

/// A finite set of elements of one group, stored in canonical order.
///
/// The cardinality is the counting measure `|E|`. A hash index for membership
/// queries is built on first use.
#[derive(Clone)]
pub struct FiniteSubset {
    model: GroupModel,
    elems: Vec<Elem>,
    index: OnceLock<FxHashSet<Elem>>,
}

impl std::fmt::Debug for FiniteSubset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{:?}", self.model.name(), self.elems)
    }
}

impl PartialEq for FiniteSubset {
    fn eq(&self, other: &Self) -> bool {
        self.model == other.model && self.elems == other.elems
    }
}

impl Eq for FiniteSubset {}

impl FiniteSubset {
    /// Builds a set, sorting and removing duplicates.
    pub fn new(model: GroupModel, elems: impl IntoIterator<Item = Elem>) -> Self {
        let mut v: Vec<Elem> = elems.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        FiniteSubset { model, elems: v, index: OnceLock::new() }
    }

    /// Builds a set from elements already sorted and deduplicated.
    pub(crate) fn from_sorted(model: GroupModel, elems: Vec<Elem>) -> Self {
        debug_assert!(elems.windows(2).all(|w| w[0] < w[1]));
        FiniteSubset { model, elems, index: OnceLock::new() }
    }

    /// Like [`FiniteSubset::new`] but rejects non-canonical encodings.
    pub fn try_new(model: GroupModel, elems: impl IntoIterator<Item = Elem>) -> Result<Self, GroupError> {
        let s = Self::new(model, elems);
        for e in &s.elems {
            model.validate(e)?;
        }
        Ok(s)
    }

    pub fn empty(model: GroupModel) -> Self {
        FiniteSubset { model, elems: Vec::new(), index: OnceLock::new() }
    }

    pub fn singleton(model: GroupModel, e: Elem) -> Self {
        FiniteSubset { model, elems: vec![e], index: OnceLock::new() }
    }

    pub fn identity_set(model: GroupModel) -> Self {
        Self::singleton(model, model.identity())
    }

    pub fn model(&self) -> GroupModel {
        self.model
    }

    /// The counting measure `|E|`.
    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn elems(&self) -> &[Elem] {
        &self.elems
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Elem> {
        self.elems.iter()
    }

    pub fn into_vec(self) -> Vec<Elem> {
        self.elems
    }

    pub fn contains(&self, e: &Elem) -> bool {
        if self.elems.len() <= 16 {
            return self.elems.iter().any(|x| x == e);
        }
        self.index.get_or_init(|| self.elems.iter().cloned().collect()).contains(e)
    }

    /// Position of `e` in canonical order.
    pub fn position(&self, e: &Elem) -> Option<usize> {
        self.elems.binary_search(e).ok()
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (a, b) = (&self.elems, &other.elems);
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i].clone());
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Self::from_sorted(self.model, out)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let (small, large) = if self.len() <= other.len() { (self, other) } else { (other, self) };
        let out: Vec<Elem> = small.elems.iter().filter(|e| large.contains(e)).cloned().collect();
        Self::from_sorted(self.model, out)
    }

    pub fn difference(&self, other: &Self) -> Self {
        let out: Vec<Elem> = self.elems.iter().filter(|e| !other.contains(e)).cloned().collect();
        Self::from_sorted(self.model, out)
    }

    pub fn intersection_len(&self, other: &Self) -> usize {
        let (small, large) = if self.len() <= other.len() { (self, other) } else { (other, self) };
        small.elems.iter().filter(|e| large.contains(e)).count()
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.len() <= other.len() && self.elems.iter().all(|e| other.contains(e))
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.intersection_len(other) == 0
    }

    /// `gE`.
    pub fn left_translate(&self, g: &Elem) -> Self {
        Self::new(self.model, self.elems.iter().map(|e| self.model.multiply(g, e)))
    }

    /// `Eg`.
    pub fn right_translate(&self, g: &Elem) -> Self {
        Self::new(self.model, self.elems.iter().map(|e| self.model.multiply(e, g)))
    }

    /// `E⁻¹`.
    pub fn inverse(&self) -> Self {
        Self::new(self.model, self.elems.iter().map(|e| self.model.inverse(e)))
    }

    pub fn filter(&self, mut keep: impl FnMut(&Elem) -> bool) -> Self {
        let out: Vec<Elem> = self.elems.iter().filter(|e| keep(e)).cloned().collect();
        Self::from_sorted(self.model, out)
    }

    /// Union of many sets over the same model.
    pub fn union_all<'a>(model: GroupModel, sets: impl IntoIterator<Item = &'a FiniteSubset>) -> Self {
        Self::new(model, sets.into_iter().flat_map(|s| s.elems.iter().cloned()))
    }

    /// True when `self` is a Zᵈ set equal to its bounding box.
    pub fn is_box(&self) -> bool {
        match self.bounding_box() {
            Some((lo, hi)) => {
                let vol: u128 = lo.iter().zip(&hi).map(|(a, b)| (b - a + 1) as u128).product();
                vol == self.len() as u128
            }
            None => false,
        }
    }

    /// Coordinate-wise bounds (inclusive) for Zᵈ sets.
    pub fn bounding_box(&self) -> Option<(Vec<i64>, Vec<i64>)> {
        let GroupModel::Zd(d) = self.model else { return None };
        let first = self.elems.first()?;
        let mut lo = first.0.to_vec();
        let mut hi = first.0.to_vec();
        for e in &self.elems {
            for i in 0..d {
                lo[i] = lo[i].min(e.0[i]);
                hi[i] = hi[i].max(e.0[i]);
            }
        }
        Some((lo, hi))
    }
}

impl<'a> IntoIterator for &'a FiniteSubset {
    type Item = &'a Elem;
    type IntoIter = std::slice::Iter<'a, Elem>;
    fn into_iter(self) -> Self::IntoIter {
        self.elems.iter()
    }
}

impl serde::Serialize for FiniteSubset {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("FiniteSubset", 3)?;
        st.serialize_field("group", &self.model().name())?;
        st.serialize_field("size", &self.len())?;
        st.serialize_field("elements", self.elems())?;
        st.end()
    }
}
