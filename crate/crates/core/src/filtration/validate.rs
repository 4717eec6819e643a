use serde::Serialize;

use crate::group::{is_boundary_invariant, is_invariant, le_scaled, q, q_str, ratio, Elem, FiniteSubset, GroupModel, Q};

use super::{pow2, FilteredSequence, FiltrationError};

/// Exact evaluation of both admissibility clauses for one atom.
#[derive(Clone, Debug, Serialize)]
pub struct AdmissibilityTag {
    /// `g` with `g·A ⊆ B_k`.
    pub translate_witness: Option<Elem>,
    /// `(n, worst ratio, bound 2^{n−k}, holds)` for each `n < k`.
    pub invariance_margins: Vec<(usize, String, String, bool)>,
    pub admissible: bool,
}

fn maps_into(model: GroupModel, g: &Elem, a: &FiniteSubset, b: &FiniteSubset) -> bool {
    a.iter().all(|x| b.contains(&model.multiply(g, x)))
}

fn find_witness(a: &FiniteSubset, b: &FiniteSubset, hint: Option<&Elem>) -> Option<Elem> {
    let model = a.model();
    if let Some(g) = hint {
        if maps_into(model, g, a, b) {
            return Some(g.clone());
        }
    }
    let a0 = a.elems().first()?;
    if a.len() > b.len() {
        return None;
    }
    let a0inv = model.inverse(a0);
    let boxes = match model {
        GroupModel::Zd(_) => a.bounding_box().zip(b.bounding_box()),
        _ => None,
    };
    // Every witness sends a0 into B, so g ranges over B·a0⁻¹.
    b.iter().map(|y| model.multiply(y, &a0inv)).find(|g| {
        if let Some(((alo, ahi), (blo, bhi))) = &boxes {
            let c = g.coords();
            if (0..c.len()).any(|i| alo[i] + c[i] < blo[i] || ahi[i] + c[i] > bhi[i]) {
                return false;
            }
        }
        maps_into(model, g, a, b)
    })
}

/// Evaluates the admissibility clauses of `a` at level `k`.
///
/// A stored witness for the matching atom of `𝒫_k` is tried first; otherwise
/// candidates `B_k·a⁻¹` are scanned.
pub fn is_admissible_atom(a: &FiniteSubset, k: usize, seq: &FilteredSequence) -> Result<AdmissibilityTag, FiltrationError> {
    let hint = seq
        .p
        .get(k)
        .and_then(|p| p.atoms.iter().find(|x| x.set.elems().first() == a.elems().first() && x.set == *a))
        .and_then(|x| x.witness.as_ref());
    let translate_witness = match seq.b.get(k) {
        Some(b) if !a.is_empty() => find_witness(a, b, hint),
        _ => None,
    };
    let mut invariance_margins = Vec::new();
    let mut all = translate_witness.is_some();
    for n in 0..k.min(seq.f.len()) {
        let bound = pow2(n as i64 - k as i64);
        if a.is_empty() {
            invariance_margins.push((n, "n/a".into(), q_str(&bound), false));
            all = false;
            continue;
        }
        let r = is_invariant(a, &bound, &seq.f[n])?;
        all &= r.holds;
        invariance_margins.push((n, q_str(&r.worst()), q_str(&bound), r.holds));
    }
    Ok(AdmissibilityTag { translate_witness, invariance_margins, admissible: all })
}

/// `Adm(𝒮)`: window elements lying in an admissible atom at every level.
pub fn admissible_region(seq: &FilteredSequence) -> FiniteSubset {
    let window = seq.window();
    let mut keep = vec![true; window.len()];
    for (lvl, part) in seq.p.iter().enumerate() {
        let idx = seq.atom_index(lvl);
        for (i, k) in keep.iter_mut().enumerate() {
            *k &= part.atoms[idx[i] as usize].admissible;
        }
    }
    let mut it = keep.into_iter();
    window.filter(|_| it.next().unwrap())
}

/// One checked clause.
#[derive(Clone, Debug, Serialize)]
pub struct RegularityRow {
    pub clause: String,
    pub n: usize,
    pub k: Option<usize>,
    pub holds: bool,
    /// Counts toward the overall verdict.
    pub asserted: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularityReport {
    pub rows: Vec<RegularityRow>,
    pub adm_size: usize,
    pub holds: bool,
    pub warnings: Vec<String>,
}

impl RegularityReport {
    pub fn failures(&self) -> impl Iterator<Item = &RegularityRow> {
        self.rows.iter().filter(|r| r.asserted && !r.holds)
    }
}

/// Checks every regularity clause exactly over the built levels.
///
/// Asserted: nesting, admissibility of tagged atoms, `(2^{k−n}, B_k)`-boundary
/// invariance of `Fₙ`, `|Dₙ ∩ Adm| ≥ c|Dₙ|`, and shell coverage. The
/// `(2^{k−n}, Bₙ)` reading is reported only.
pub fn validate_regular(seq: &FilteredSequence, c: &Q) -> Result<RegularityReport, FiltrationError> {
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let depth = seq.depth();
    let window = seq.window();
    if depth == 0 {
        warnings.push("depth 0: clauses are vacuous".into());
    }

    for part in &seq.p {
        let empty = part.atoms.iter().filter(|a| a.set.is_empty()).count();
        rows.push(RegularityRow {
            clause: "atoms_nonempty".into(),
            n: part.level,
            k: None,
            holds: empty == 0,
            asserted: true,
            detail: format!("{} atoms, {} empty", part.atoms.len(), empty),
        });
    }

    for n in 0..=depth {
        let lo = seq.atom_index(n);
        for m in n + 1..=depth {
            let hi = seq.atom_index(m);
            let mut parent = vec![u32::MAX; seq.p[n].atoms.len()];
            let mut bad = 0usize;
            for i in 0..window.len() {
                let p = &mut parent[lo[i] as usize];
                if *p == u32::MAX {
                    *p = hi[i];
                } else if *p != hi[i] {
                    bad += 1;
                }
            }
            rows.push(RegularityRow {
                clause: "nesting".into(),
                n,
                k: Some(m),
                holds: bad == 0,
                asserted: true,
                detail: format!("{bad} elements outside their parent atom"),
            });
        }
    }

    for (k, part) in seq.p.iter().enumerate() {
        let mut tagged = 0;
        let mut failed = Vec::new();
        for (ai, atom) in part.atoms.iter().enumerate() {
            if !atom.admissible {
                continue;
            }
            tagged += 1;
            let tag = is_admissible_atom(&atom.set, k, seq)?;
            if !tag.admissible {
                failed.push(ai);
            }
        }
        rows.push(RegularityRow {
            clause: "admissible_tags".into(),
            n: k,
            k: None,
            holds: failed.is_empty(),
            asserted: true,
            detail: format!("{tagged} tagged admissible, failing atoms {failed:?}"),
        });
    }

    for n in 0..=depth {
        for k in 0..=n {
            let bound = pow2(k as i64 - n as i64);
            let rk = is_boundary_invariant(&seq.f[n], &bound, &seq.b[k])?;
            rows.push(RegularityRow {
                clause: "folner_boundary_bk".into(),
                n,
                k: Some(k),
                holds: rk.holds,
                asserted: true,
                detail: format!("|∂|/|F| = {} ≤ {}", q_str(&rk.worst()), q_str(&bound)),
            });
            let rn = is_boundary_invariant(&seq.f[n], &bound, &seq.b[n])?;
            rows.push(RegularityRow {
                clause: "folner_boundary_bn".into(),
                n,
                k: Some(k),
                holds: rn.holds,
                asserted: false,
                detail: format!("|∂|/|F| = {} ≤ {}", q_str(&rn.worst()), q_str(&bound)),
            });
        }
    }

    let adm = admissible_region(seq);
    for n in 0..=depth {
        let dn = &seq.d[n];
        let inter = dn.intersection_len(&adm);
        rows.push(RegularityRow {
            clause: "adm_coverage".into(),
            n,
            k: None,
            holds: ratio(inter, 1) >= c * ratio(dn.len(), 1),
            asserted: true,
            detail: format!("|Dₙ ∩ Adm| = {inter}, c|Dₙ| = {}", q_str(&(c * ratio(dn.len(), 1)))),
        });
    }

    for sh in &seq.shells {
        rows.push(RegularityRow {
            clause: "shell_coverage".into(),
            n: sh.shell,
            k: None,
            holds: sh.ok,
            asserted: true,
            detail: format!("{:?}", sh.levels),
        });
        let level0 = sh.levels.first().map(|x| x.1).unwrap_or(0);
        rows.push(RegularityRow {
            clause: "shell_level0_coverage".into(),
            n: sh.shell,
            k: None,
            holds: le_scaled(sh.size - level0, &seq.eps, sh.size),
            asserted: true,
            detail: format!("{level0}/{} at level 0", sh.size),
        });
    }

    let mut prod = q(1, 1);
    for (i, e) in seq.eps_n.iter().enumerate() {
        prod *= q(1, 1) - e;
        let delta = q(1, 1) - &prod;
        rows.push(RegularityRow {
            clause: "delta_bookkeeping".into(),
            n: i,
            k: None,
            holds: delta <= seq.eps,
            asserted: true,
            detail: format!("1 − Π_{{j≤{i}}}(1−εⱼ) = {}", q_str(&delta)),
        });
    }

    let holds = rows.iter().all(|r| !r.asserted || r.holds);
    Ok(RegularityReport { rows, adm_size: adm.len(), holds, warnings })
}
