use rustc_hash::FxHashMap;

use super::{dense, Elem, FiniteSubset, GroupError};

fn same(a: &FiniteSubset, b: &FiniteSubset) -> Result<(), GroupError> {
    a.model().check_same(&b.model())
}

/// `E·K`.
pub fn product_set(e: &FiniteSubset, k: &FiniteSubset) -> Result<FiniteSubset, GroupError> {
    same(e, k)?;
    if e.is_empty() || k.is_empty() {
        return Ok(FiniteSubset::empty(e.model()));
    }
    if let Some(s) = dense::product(e, k) {
        return Ok(s);
    }
    let m = e.model();
    let mut out = Vec::with_capacity(e.len() * k.len());
    for x in e {
        for y in k {
            out.push(m.multiply(x, y));
        }
    }
    Ok(FiniteSubset::new(m, out))
}

/// `|gK ∩ E|` for every `g` with a nonzero count.
fn translate_counts(k: &FiniteSubset, e: &FiniteSubset) -> FxHashMap<Elem, u32> {
    let m = e.model();
    let kinv: Vec<Elem> = k.iter().map(|x| m.inverse(x)).collect();
    let mut counts: FxHashMap<Elem, u32> = FxHashMap::default();
    counts.reserve(e.len() * 2);
    for x in e {
        for ki in &kinv {
            *counts.entry(m.multiply(x, ki)).or_insert(0) += 1;
        }
    }
    counts
}

/// `∂_K(E)`: the union of left translates `gK` meeting both `E` and its complement.
pub fn boundary(k: &FiniteSubset, e: &FiniteSubset) -> Result<FiniteSubset, GroupError> {
    same(e, k)?;
    if e.is_empty() || k.is_empty() {
        return Ok(FiniteSubset::empty(e.model()));
    }
    if let Some(s) = dense::boundary(k, e) {
        return Ok(s);
    }
    let m = e.model();
    let kn = k.len() as u32;
    let counts = translate_counts(k, e);
    let mut out = Vec::new();
    for (g, c) in counts {
        if c < kn {
            for y in k {
                out.push(m.multiply(&g, y));
            }
        }
    }
    Ok(FiniteSubset::new(m, out))
}

/// Reference boundary computed by scanning each translate `gK` for `g ∈ E·K⁻¹`.
pub fn boundary_by_definition(k: &FiniteSubset, e: &FiniteSubset) -> Result<FiniteSubset, GroupError> {
    same(e, k)?;
    let m = e.model();
    let kinv = k.inverse();
    let cands = {
        let mut v = Vec::new();
        for x in e {
            for y in &kinv {
                v.push(m.multiply(x, y));
            }
        }
        FiniteSubset::new(m, v)
    };
    let mut out = Vec::new();
    for g in &cands {
        let t = k.left_translate(g);
        let meets_in = t.iter().any(|x| e.contains(x));
        let meets_out = t.iter().any(|x| !e.contains(x));
        if meets_in && meets_out {
            out.extend(t.into_vec());
        }
    }
    Ok(FiniteSubset::new(m, out))
}

/// `Int_K(E) = E ∖ ∂_K(E)`.
pub fn interior(k: &FiniteSubset, e: &FiniteSubset) -> Result<FiniteSubset, GroupError> {
    Ok(e.difference(&boundary(k, e)?))
}

/// `Cl_K(E) = E ∪ ∂_K(E)`.
pub fn closure(k: &FiniteSubset, e: &FiniteSubset) -> Result<FiniteSubset, GroupError> {
    Ok(e.union(&boundary(k, e)?))
}

/// `|E·K ∖ E|`.
pub fn excess(e: &FiniteSubset, k: &FiniteSubset) -> Result<usize, GroupError> {
    same(e, k)?;
    if e.is_empty() || k.is_empty() {
        return Ok(0);
    }
    if let Some(n) = dense::excess(e, k) {
        return Ok(n);
    }
    let m = e.model();
    let mut seen: rustc_hash::FxHashSet<Elem> = rustc_hash::FxHashSet::default();
    for x in e {
        for y in k {
            let z = m.multiply(x, y);
            if !e.contains(&z) {
                seen.insert(z);
            }
        }
    }
    Ok(seen.len())
}

/// `{x : xK ⊆ D}`.
pub fn core_translates(k: &FiniteSubset, d: &FiniteSubset) -> Result<FiniteSubset, GroupError> {
    same(d, k)?;
    if k.is_empty() {
        return Err(GroupError::Degenerate("empty translate shape".into()));
    }
    if d.is_empty() {
        return Ok(FiniteSubset::empty(d.model()));
    }
    if let Some(s) = dense::core(k, d) {
        return Ok(s);
    }
    let kn = k.len() as u32;
    let counts = translate_counts(k, d);
    Ok(FiniteSubset::new(d.model(), counts.into_iter().filter(|(_, c)| *c == kn).map(|(g, _)| g)))
}
