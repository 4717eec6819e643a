use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::group::{Elem, FiniteSubset, GroupModel, Locator};

/// Greedy low-overlap packing of translates `xK` into a fixed domain.
///
/// Tracks a coverage bitmap over the domain and selects, at each step, the
/// candidate `x` minimising `|xK ∩ covered|`, ties broken by canonical order.
/// Overlaps only grow, so a lazy min-heap of stale keys yields the exact argmin.
pub(crate) struct Packer<'a> {
    model: GroupModel,
    loc: Locator,
    covered: Vec<bool>,
    covered_count: usize,
    shape: &'a FiniteSubset,
    cands: Vec<Elem>,
    heap: BinaryHeap<Reverse<(usize, usize)>>,
    used: Vec<bool>,
}

impl<'a> Packer<'a> {
    /// `cands` must be sorted canonically and satisfy `xK ⊆ domain`.
    pub fn new(domain: &'a FiniteSubset, shape: &'a FiniteSubset, cands: Vec<Elem>) -> Self {
        let loc = Locator::new(domain);
        let heap = (0..cands.len()).map(|i| Reverse((0, i))).collect();
        let used = vec![false; cands.len()];
        Packer {
            model: domain.model(),
            loc,
            covered: vec![false; domain.len()],
            covered_count: 0,
            shape,
            cands,
            heap,
            used,
        }
    }

    /// Marks `set ∩ domain` as covered before packing starts.
    pub fn preload(&mut self, set: &FiniteSubset) {
        for e in set {
            if let Some(i) = self.loc.get(e) {
                if !self.covered[i] {
                    self.covered[i] = true;
                    self.covered_count += 1;
                }
            }
        }
        let n = self.cands.len();
        let keys: Vec<usize> = (0..n).map(|i| self.overlap(i)).collect();
        self.heap = keys.into_iter().enumerate().map(|(i, k)| Reverse((k, i))).collect();
    }

    pub fn covered_count(&self) -> usize {
        self.covered_count
    }

    fn overlap(&self, i: usize) -> usize {
        let x = &self.cands[i];
        self.shape
            .iter()
            .filter(|k| {
                let y = self.model.multiply(x, k);
                self.loc.get(&y).map(|j| self.covered[j]).unwrap_or(false)
            })
            .count()
    }

    /// Exact argmin `(x, overlap)` over unused candidates, without committing it.
    pub fn peek_best(&mut self) -> Option<(Elem, usize)> {
        while let Some(Reverse((key, i))) = self.heap.pop() {
            if self.used[i] {
                continue;
            }
            let cur = self.overlap(i);
            if cur == key {
                self.heap.push(Reverse((key, i)));
                return Some((self.cands[i].clone(), cur));
            }
            self.heap.push(Reverse((cur, i)));
        }
        None
    }

    /// Commits the current argmin; returns `(x, overlap, newly covered)`.
    pub fn take_best(&mut self) -> Option<(Elem, usize, usize)> {
        let (x, ov) = self.peek_best()?;
        let Reverse((_, i)) = self.heap.pop().unwrap();
        self.used[i] = true;
        let mut fresh = 0;
        for k in self.shape {
            let y = self.model.multiply(&x, k);
            if let Some(j) = self.loc.get(&y) {
                if !self.covered[j] {
                    self.covered[j] = true;
                    fresh += 1;
                }
            }
        }
        self.covered_count += fresh;
        Some((x, ov, fresh))
    }
}
