use std::collections::BTreeMap;

use serde::Serialize;

use crate::group::{product_set, Elem, FiniteSubset};
use crate::ncalg::{Matrix, NcError, ProjField, Side};
use crate::report::Check;

use super::{CZParts, CuculescuResult, CzError};

#[derive(Clone, Debug, Serialize)]
pub struct ZetaResult {
    #[serde(skip)]
    pub zeta: ProjField,
    /// `φ(1−ζ)`.
    pub complement_trace: f64,
    /// `2‖f‖₁/λ`.
    pub bound: f64,
    /// Every active atom at levels `k ≥ 1` is admissible.
    pub hypothesis: bool,
    pub rows: Vec<Check>,
}

/// `ζ = (∨_{k≥1} ∨_{A admissible} p_A 1_{A·(∪_{n<k}F_n)⁻¹})^⊥`.
pub fn zeta_projection(cc: &CuculescuResult) -> Result<ZetaResult, CzError> {
    let levels = &cc.levels;
    let depth = cc.depth();
    if levels.folner.len() < depth {
        return Err(CzError::Precondition("zeta needs Følner sets for every level below the top".into()));
    }
    let model = levels.model;
    let d = cc.d;
    let mut acc: BTreeMap<Elem, Matrix> = BTreeMap::new();
    let mut hypothesis = true;
    for k in 1..=depth {
        let u = FiniteSubset::union_all(model, levels.folner[..k].iter()).inverse();
        for a in cc.active_atoms(k) {
            if !levels.admissible[k][a] {
                hypothesis = false;
                continue;
            }
            let p = cc.p_atom(k, a);
            let dil = product_set(&levels.atoms(k)[a], &u).map_err(NcError::from)?;
            for y in &dil {
                match acc.get_mut(y) {
                    Some(s) => s.add_assign(&p),
                    None => {
                        acc.insert(y.clone(), p.clone());
                    }
                }
            }
        }
    }
    // ζ(y) = 1 − projection onto the joined ranges = kernel of Σ p_A.
    let mut zeta = ProjField::identity(model, d);
    for (y, s) in acc {
        zeta.set(y, s.spectral_projection(1e-9, Side::AtOrBelow)?);
    }
    let complement_trace = zeta.complement_trace();
    let bound = 2.0 * cc.f_l1 / cc.lambda;
    let rows = vec![
        Check::le("zeta_mass", "φ(1−ζ) ≤ 2‖f‖₁/λ", complement_trace, bound, 1e-8 * bound.max(1.0)).with_hypothesis(hypothesis),
        Check::le("zeta_projection", "ζ² = ζ = ζ*", zeta.max_defect(), 0.0, 1e-10),
    ];
    Ok(ZetaResult { zeta, complement_trace, bound, hypothesis, rows })
}

/// `ζ(x) b_k(y) ζ(x) = 0` for `n < k`, `y ∈ xF_n`, for both bad parts.
pub fn zeta_vanishing_check(parts: &CZParts, z: &ZetaResult) -> Result<Check, CzError> {
    let levels = &parts.cc.levels;
    let model = levels.model;
    let mut worst: f64 = 0.0;
    let mut scanned = 0usize;
    for k in 1..=parts.depth() {
        for n in 0..k {
            let finv = levels.folner[n].inverse();
            for b in [&parts.bd[k], &parts.boff[k]] {
                for (y, m) in &b.values {
                    for g in &finv {
                        let x = model.multiply(y, g);
                        let zx = z.zeta.at(&x);
                        worst = worst.max((&(&zx * m) * &zx).max_abs());
                        scanned += 1;
                    }
                }
            }
        }
    }
    Ok(Check::le("zeta_vanishing", "ζ(x) b_k(y) ζ(x) = 0 for y ∈ xF_n, n < k", worst, 0.0, 1e-12)
        .with_hypothesis(z.hypothesis)
        .with_detail(format!("{scanned} pairs scanned")))
}
