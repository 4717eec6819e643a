use std::collections::VecDeque;

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use super::{Elem, FiniteSubset, GroupModel};

/// Side-length schedule `n ↦ Lₙ` for the canonical Følner shapes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Schedule {
    /// `Lₙ = baseⁿ`.
    Geometric { base: i64 },
    /// `Lₙ = 1 + step·n`.
    Linear { step: i64 },
    /// `Lₙ = values[n]`.
    Explicit { values: Vec<i64> },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::Geometric { base: 4 }
    }
}

impl Schedule {
    /// `Lₙ`, or `None` past the end of an explicit list or on overflow.
    pub fn side(&self, n: usize) -> Option<i64> {
        match self {
            Schedule::Geometric { base } => base.checked_pow(u32::try_from(n).ok()?),
            Schedule::Linear { step } => step.checked_mul(n as i64)?.checked_add(1),
            Schedule::Explicit { values } => values.get(n).copied(),
        }
    }

    pub fn len_hint(&self) -> Option<usize> {
        match self {
            Schedule::Explicit { values } => Some(values.len()),
            _ => None,
        }
    }

    /// True when the side lengths are positive and nondecreasing up to `n`.
    pub fn is_monotone(&self, n: usize) -> bool {
        let mut prev = 0;
        for i in 0..=n {
            match self.side(i) {
                Some(l) if l >= prev && l > 0 => prev = l,
                _ => return false,
            }
        }
        true
    }
}

/// Number of elements of the canonical shape with side `l`, without building it.
pub fn folner_size(model: GroupModel, l: i64) -> u128 {
    let l = l.max(0) as u128;
    match model {
        GroupModel::Zd(d) => l.pow(d as u32),
        GroupModel::Heisenberg => (2 * l + 1) * (2 * l + 1) * (2 * l * l + 1),
        GroupModel::Lamplighter => {
            if 2 * l + 1 >= 100 {
                u128::MAX
            } else {
                (1u128 << (2 * l + 1)) * (2 * l + 1)
            }
        }
    }
}

/// Canonical shape with side `l`.
pub fn folner_shape(model: GroupModel, l: i64) -> FiniteSubset {
    let mut out = Vec::new();
    match model {
        GroupModel::Zd(d) => {
            let total = (l.max(0) as usize).pow(d as u32);
            out.reserve(total);
            for idx in 0..total {
                let mut c = vec![0i64; d];
                let mut r = idx;
                for i in (0..d).rev() {
                    c[i] = (r % l as usize) as i64;
                    r /= l as usize;
                }
                out.push(Elem::new(&c));
            }
        }
        GroupModel::Heisenberg => {
            for a in -l..=l {
                for b in -l..=l {
                    for c in -l * l..=l * l {
                        out.push(Elem::new(&[a, b, c]));
                    }
                }
            }
        }
        GroupModel::Lamplighter => {
            let w = (2 * l + 1) as u32;
            for t in -l..=l {
                for mask in 0u64..(1u64 << w) {
                    let mut v = vec![t];
                    for j in 0..w {
                        if mask >> j & 1 == 1 {
                            v.push(-l + j as i64);
                        }
                    }
                    out.push(Elem::new(&v));
                }
            }
        }
    }
    FiniteSubset::new(model, out)
}

/// The `n`-th canonical Følner set: `[0,Lₙ)ᵈ` in Zᵈ, `[−Lₙ,Lₙ]²×[−Lₙ²,Lₙ²]` in the
/// Heisenberg group, lamps and cursor in `[−Lₙ,Lₙ]` in the lamplighter group.
pub fn folner_set(model: GroupModel, n: usize, schedule: &Schedule) -> Option<FiniteSubset> {
    schedule.side(n).map(|l| folner_shape(model, l))
}

/// Closed ball of radius `r` in the word metric of the standard generators.
pub fn word_ball(model: GroupModel, r: usize) -> FiniteSubset {
    let gens = model.generators();
    let mut seen: FxHashSet<Elem> = FxHashSet::default();
    let mut queue = VecDeque::new();
    let id = model.identity();
    seen.insert(id.clone());
    queue.push_back((id, 0usize));
    while let Some((x, dist)) = queue.pop_front() {
        if dist == r {
            continue;
        }
        for g in &gens {
            let y = model.multiply(&x, g);
            if seen.insert(y.clone()) {
                queue.push_back((y, dist + 1));
            }
        }
    }
    FiniteSubset::new(model, seen)
}
