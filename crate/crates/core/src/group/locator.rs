use rustc_hash::FxHashMap;

use super::dense::Grid;
use super::{Elem, FiniteSubset};

const NONE: u32 = u32::MAX;

/// Maps the elements of a fixed set to their canonical positions.
///
/// Zᵈ sets with a compact bounding box use a dense lookup table; every other
/// set uses a hash map.
pub enum Locator {
    Dense { grid: Grid, slots: Vec<u32> },
    Hashed(FxHashMap<Elem, u32>),
}

impl Locator {
    pub fn new(set: &FiniteSubset) -> Self {
        if let Some((lo, hi)) = set.bounding_box() {
            let grid = Grid::new(lo, hi);
            if grid.volume() <= (set.len().max(1) * 16).max(1 << 16) && grid.volume() <= Grid::MAX_CELLS {
                let mut slots = vec![NONE; grid.volume()];
                for (i, e) in set.iter().enumerate() {
                    slots[grid.index(e.coords()).unwrap()] = i as u32;
                }
                return Locator::Dense { grid, slots };
            }
        }
        Locator::Hashed(set.iter().enumerate().map(|(i, e)| (e.clone(), i as u32)).collect())
    }

    pub fn get(&self, e: &Elem) -> Option<usize> {
        match self {
            Locator::Dense { grid, slots } => {
                let i = grid.index(e.coords())?;
                let s = slots[i];
                (s != NONE).then_some(s as usize)
            }
            Locator::Hashed(m) => m.get(e).map(|&i| i as usize),
        }
    }
}
