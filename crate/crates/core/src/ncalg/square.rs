use serde::Serialize;

use super::{weak_l1, NcError, OpFn, ProjField, Side};

#[derive(Clone, Debug, Serialize)]
pub struct SquareReport {
    /// `‖(Σ|f_k|²)^{1/2}‖_{1,∞}`.
    pub column_weak: f64,
    /// `‖(Σ|f_k*|²)^{1/2}‖_{1,∞}`.
    pub row_weak: f64,
    /// `min(column, row)`, an upper bound for the `ℓ₂^{cr}` infimum.
    pub cr_proxy: f64,
    #[serde(skip)]
    pub column: OpFn,
    #[serde(skip)]
    pub row: OpFn,
}

fn check_family(family: &[OpFn]) -> Result<(), NcError> {
    let Some(first) = family.first() else { return Ok(()) };
    for f in family {
        first.model.check_same(&f.model)?;
        if f.d != first.d {
            return Err(NcError::Dimension(format!("family mixes d = {} and d = {}", first.d, f.d)));
        }
    }
    Ok(())
}

/// `(Σ_k f_k* f_k)^{1/2}` if `column`, else `(Σ_k f_k f_k*)^{1/2}`.
fn square_fn(family: &[OpFn], column: bool) -> Result<OpFn, NcError> {
    let first = &family[0];
    let mut acc = OpFn::zero(first.model, first.d);
    for f in family {
        for (x, m) in &f.values {
            let sq = if column { &m.adjoint() * m } else { m * &m.adjoint() };
            acc.add_at(x, &sq, 1.0);
        }
    }
    acc.try_map(|m| m.apply_fn(|v| v.max(0.0).sqrt()))
}

pub fn square_functions(family: &[OpFn]) -> Result<SquareReport, NcError> {
    check_family(family)?;
    if family.is_empty() {
        return Err(NcError::Precondition("empty family".into()));
    }
    let column = square_fn(family, true)?;
    let row = square_fn(family, false)?;
    let column_weak = weak_l1(&column)?;
    let row_weak = weak_l1(&row)?;
    Ok(SquareReport { column_weak, row_weak, cr_proxy: column_weak.min(row_weak), column, row })
}

#[derive(Clone, Debug, Serialize)]
pub struct L2Embedding {
    #[serde(skip)]
    pub e: ProjField,
    pub lambda: f64,
    /// `sup_k ‖e f_k e‖_∞`.
    pub sup_norm: f64,
    /// `2λ`.
    pub bound: f64,
    pub sup_holds: bool,
    /// `φ(1−e)`.
    pub complement_trace: f64,
    /// `λφ(1−e)` divided by the column/row proxy of the decomposition.
    pub measured_constant: f64,
}

/// `e = 1_{[0,λ]}((Σ|g_k|²)^{1/2}) ∧ 1_{[0,λ]}((Σ|h_k*|²)^{1/2})` for `f_k = g_k + h_k`.
///
/// With no decomposition, `g_k = f_k` and `h_k = 0`.
pub fn l2_embedding_projection(
    family: &[OpFn],
    lambda: f64,
    decomposition: Option<(&[OpFn], &[OpFn])>,
) -> Result<L2Embedding, NcError> {
    check_family(family)?;
    if family.is_empty() {
        return Err(NcError::Precondition("empty family".into()));
    }
    let (g, h): (Vec<OpFn>, Vec<OpFn>) = match decomposition {
        Some((g, h)) => {
            if g.len() != family.len() || h.len() != family.len() {
                return Err(NcError::Precondition("decomposition length differs from the family".into()));
            }
            for ((f, a), b) in family.iter().zip(g).zip(h) {
                if f.sub(&a.add(b)?)?.max_abs() > 1e-10 * f.max_abs().max(1.0) {
                    return Err(NcError::Precondition("decomposition does not sum to the family".into()));
                }
            }
            (g.to_vec(), h.to_vec())
        }
        None => (family.to_vec(), family.iter().map(|f| OpFn::zero(f.model, f.d)).collect()),
    };
    let col = square_fn(&g, true)?;
    let row = square_fn(&h, false)?;
    let pc = super::spectral_projection_fn(&col, lambda, Side::AtOrBelow)?;
    let pr = super::spectral_projection_fn(&row, lambda, Side::AtOrBelow)?;
    let e = pc.meet(&pr)?.pruned(1e-12);
    let mut sup: f64 = 0.0;
    for f in family {
        for (x, m) in &f.values {
            let ex = e.at(x);
            sup = sup.max((&(&ex * m) * &ex).op_norm()?);
        }
    }
    let complement_trace = e.complement_trace();
    let proxy = weak_l1(&col)? + weak_l1(&row)?;
    let measured_constant = if proxy > 0.0 { lambda * complement_trace / proxy } else { 0.0 };
    let bound = 2.0 * lambda;
    Ok(L2Embedding {
        e,
        lambda,
        sup_norm: sup,
        bound,
        sup_holds: sup <= bound * (1.0 + 1e-10) + 1e-12,
        complement_trace,
        measured_constant,
    })
}
