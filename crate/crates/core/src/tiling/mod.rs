//! Ornstein–Weiss quasi-tilings of finite windows.
//!
//! All measures are exact counts and every ε-comparison is exact rational.

mod packer;

use rustc_hash::FxHashSet;
use serde::Serialize;
use thiserror::Error;

use crate::group::{
    boundary, core_translates, interior, is_boundary_invariant, is_invariant, le_scaled, q, q_str, ratio, Elem,
    FiniteSubset, GroupError, Q,
};
pub(crate) use packer::Packer;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TilingError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("insufficient invariance: no translate of the shape fits in the domain ({detail})")]
    InsufficientInvariance { detail: String },
    #[error("precondition failed: {0}")]
    Precondition(String),
}

fn one() -> Q {
    q(1, 1)
}

fn ser_q<S: serde::Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&q_str(x))
}

/// Boundary-invariance that treats the empty set as invariant.
fn bi(e: &FiniteSubset, eps: &Q, k: &FiniteSubset) -> Result<(bool, usize), GroupError> {
    if e.is_empty() {
        return Ok((true, 0));
    }
    let r = is_boundary_invariant(e, eps, k)?;
    Ok((r.holds, r.counts[0]))
}

// ---------------------------------------------------------------- ε-disjointness

#[derive(Clone, Debug, Serialize)]
pub struct EpsDisjointReport {
    pub holds: bool,
    /// `(|Eₙ ∖ ∪_{m<n} E_m|, |Eₙ|)` in the given order.
    pub fresh: Vec<(usize, usize)>,
    /// First index violating the bound, if any.
    pub first_failure: Option<usize>,
    /// Greedy reordering attempt, reported when the given order fails.
    pub reorder: Option<Vec<usize>>,
    pub reorder_holds: Option<bool>,
    pub warnings: Vec<String>,
}

fn fresh_counts(sets: &[&FiniteSubset], order: &[usize]) -> Vec<(usize, usize)> {
    let mut seen: FxHashSet<&Elem> = FxHashSet::default();
    let mut out = Vec::with_capacity(order.len());
    for &i in order {
        let mut f = 0;
        for e in sets[i] {
            if seen.insert(e) {
                f += 1;
            }
        }
        out.push((f, sets[i].len()));
    }
    out
}

fn fresh_ok(fresh: usize, size: usize, eps: &Q) -> bool {
    // |new| ≥ (1−ε)|E|  ⇔  |E| − |new| ≤ ε|E|
    le_scaled(size - fresh, eps, size)
}

/// Checks `|Eₙ ∖ ∪_{m<n} E_m| ≥ (1−ε)|Eₙ|` in the given order.
pub fn eps_disjoint_check(sets: &[FiniteSubset], eps: &Q) -> EpsDisjointReport {
    let refs: Vec<&FiniteSubset> = sets.iter().collect();
    eps_disjoint_check_refs(&refs, eps)
}

pub(crate) fn eps_disjoint_check_refs(sets: &[&FiniteSubset], eps: &Q) -> EpsDisjointReport {
    let mut warnings = Vec::new();
    if sets.is_empty() {
        warnings.push("empty family is trivially ε-disjoint".to_string());
    }
    if *eps <= q(0, 1) || *eps >= one() {
        warnings.push(format!("ε = {} outside (0,1)", q_str(eps)));
    }
    let order: Vec<usize> = (0..sets.len()).collect();
    let fresh = fresh_counts(sets, &order);
    let first_failure = fresh.iter().position(|&(f, s)| !fresh_ok(f, s, eps));
    let holds = first_failure.is_none();
    let (reorder, reorder_holds) = if holds {
        (None, None)
    } else {
        let ord = greedy_reorder(sets);
        let fr = fresh_counts(sets, &ord);
        let ok = fr.iter().all(|&(f, s)| fresh_ok(f, s, eps));
        (Some(ord), Some(ok))
    };
    EpsDisjointReport { holds, fresh, first_failure, reorder, reorder_holds, warnings }
}

/// Repeatedly appends the remaining set with the largest fraction of new elements.
fn greedy_reorder(sets: &[&FiniteSubset]) -> Vec<usize> {
    let mut seen: FxHashSet<&Elem> = FxHashSet::default();
    let mut left: Vec<usize> = (0..sets.len()).collect();
    let mut out = Vec::with_capacity(sets.len());
    while !left.is_empty() {
        let mut best = 0;
        let mut best_q = q(-1, 1);
        for (pos, &i) in left.iter().enumerate() {
            let f = sets[i].iter().filter(|e| !seen.contains(e)).count();
            let r = if sets[i].is_empty() { one() } else { ratio(f, sets[i].len()) };
            if r > best_q {
                best_q = r;
                best = pos;
            }
        }
        let i = left.remove(best);
        seen.extend(sets[i].iter());
        out.push(i);
    }
    out
}

// ---------------------------------------------------------------- center search

#[derive(Clone, Debug, Serialize)]
pub struct CenterChoice {
    pub center: Elem,
    pub overlap: usize,
    /// Right-hand side `|A|·|K| / ((1−ε)|D|)` of the guaranteed bound.
    #[serde(serialize_with = "ser_q")]
    pub bound: Q,
    pub bound_holds: bool,
    /// Whether `D` is `(ε,K)`-boundary-invariant.
    pub hypothesis_holds: bool,
    pub candidates: usize,
}

fn overlap_bound(a: usize, k: usize, eps: &Q, d: usize) -> Q {
    ratio(a * k, d) / (one() - eps)
}

/// Exact argmin of `|xK ∩ A|` over `{x : xK ⊆ D}`.
pub fn find_low_overlap_center(
    d: &FiniteSubset,
    k: &FiniteSubset,
    a: &FiniteSubset,
    eps: &Q,
) -> Result<CenterChoice, TilingError> {
    let hyp = bi(d, eps, k)?.0;
    let cands = core_translates(k, d)?;
    if cands.is_empty() {
        return Err(TilingError::InsufficientInvariance { detail: format!("|D| = {}, |K| = {}", d.len(), k.len()) });
    }
    let n = cands.len();
    let mut p = Packer::new(d, k, cands.into_vec());
    p.preload(a);
    let (x, ov) = p.peek_best().expect("nonempty candidates");
    let bound = overlap_bound(a.len(), k.len(), eps, d.len());
    Ok(CenterChoice { center: x, overlap: ov, bound_holds: ratio(ov, 1) <= bound, bound, hypothesis_holds: hyp, candidates: n })
}

// ---------------------------------------------------------------- greedy centers

#[derive(Clone, Debug, Serialize)]
pub struct GreedyResult {
    /// Centers in construction order.
    pub centers: Vec<Elem>,
    /// `|C·K|`.
    pub covered: usize,
    pub domain_size: usize,
    /// Per-step `(overlap with earlier translates, bound from the center lemma)`.
    pub steps: Vec<(usize, String)>,
    pub hypothesis_holds: bool,
    /// `|C·K| ≥ ε|D|`.
    pub coverage_holds: bool,
    /// Translates are `2ε`-disjoint in construction order.
    pub disjoint_holds: bool,
    /// Number of centers that lie in `Int_K(D)`.
    pub centers_in_interior: usize,
    pub step_limit: usize,
}

/// Greedy center selection: add argmin-overlap translates until `|C·K| > ε|D|`.
pub fn greedy_centers(d: &FiniteSubset, k: &FiniteSubset, eps: &Q) -> Result<GreedyResult, TilingError> {
    if *eps >= q(1, 2) || *eps <= q(0, 1) {
        return Err(TilingError::Precondition(format!("ε = {} must lie in (0, 1/2)", q_str(eps))));
    }
    if d.is_empty() || k.is_empty() {
        return Err(TilingError::Precondition("empty domain or shape".into()));
    }
    let (hyp, bcount) = bi(d, eps, k)?;
    let cands = core_translates(k, d)?;
    if cands.is_empty() {
        return Err(TilingError::InsufficientInvariance {
            detail: format!("|∂_K(D)|/|D| = {}", q_str(&ratio(bcount, d.len()))),
        });
    }
    // (1−2ε)|K| new elements per step bounds the number of steps.
    let step_limit = {
        let per = (one() - q(2, 1) * eps) * ratio(k.len(), 1);
        let lim = ratio(d.len(), 1) / per;
        num_traits::ToPrimitive::to_usize(&lim.floor().to_integer()).unwrap_or(usize::MAX).saturating_add(1)
    };
    let mut p = Packer::new(d, k, cands.into_vec());
    let mut centers = Vec::new();
    let mut steps = Vec::new();
    let mut disjoint = true;
    let two_eps = q(2, 1) * eps;
    while le_scaled(p.covered_count(), eps, d.len()) {
        let bound = overlap_bound(p.covered_count(), k.len(), eps, d.len());
        let Some((x, ov, _)) = p.take_best() else { break };
        if !le_scaled(ov, &two_eps, k.len()) {
            disjoint = false;
        }
        steps.push((ov, q_str(&bound)));
        centers.push(x);
    }
    let covered = p.covered_count();
    let int = interior(k, d)?;
    let centers_in_interior = centers.iter().filter(|c| int.contains(c)).count();
    Ok(GreedyResult {
        coverage_holds: ratio(covered, 1) >= eps * ratio(d.len(), 1),
        centers,
        covered,
        domain_size: d.len(),
        steps,
        hypothesis_holds: hyp,
        disjoint_holds: disjoint,
        centers_in_interior,
        step_limit,
    })
}

// ---------------------------------------------------------------- quasi-tilings

/// A multi-scale family of shapes with center sets over a finite window.
#[derive(Clone, Debug, Serialize)]
pub struct QuasiTiling {
    /// `(Sᵢ, Cᵢ)` in increasing scale order; centers in construction order.
    pub scales: Vec<(FiniteSubset, Vec<Elem>)>,
    #[serde(serialize_with = "ser_q")]
    pub epsilon: Q,
    pub target: FiniteSubset,
}

impl QuasiTiling {
    pub fn tiles(&self, i: usize) -> Vec<FiniteSubset> {
        let (s, c) = &self.scales[i];
        c.iter().map(|x| s.left_translate(x)).collect()
    }

    pub fn scale_union(&self, i: usize) -> FiniteSubset {
        let (s, c) = &self.scales[i];
        let m = s.model();
        FiniteSubset::new(m, c.iter().flat_map(|x| s.iter().map(move |k| m.multiply(x, k))))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScaleStep {
    pub scale: usize,
    pub shape_size: usize,
    pub centers: usize,
    pub new_cover: usize,
    /// Overlap fraction allowed when packing this scale.
    pub overlap_param: String,
    /// Residual before this scale is `(2ε, Sᵢ)`-boundary-invariant.
    pub residual_invariant: Option<bool>,
    pub residual_boundary_ratio: Option<String>,
    /// Residual after this scale, as a fraction of `|D|`.
    pub residual_fraction: String,
    /// `max(ε, (1−ε)^{N+1−i})`.
    pub residual_bound: String,
    pub residual_bound_holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    /// `(1−ε)^N ≤ ε`.
    pub count_condition: bool,
    /// `Sᵢ` is `(ε³, S_j)`-invariant for all `j < i`, with the worst measured ratio per pair.
    pub nesting: Vec<(usize, usize, bool, String)>,
    /// `D` is `(ε², Sᵢ)`-invariant.
    pub window: Vec<(usize, bool, String)>,
    pub all_hold: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TilingRun {
    pub tiling: QuasiTiling,
    pub hypotheses: HypothesisReport,
    pub steps: Vec<ScaleStep>,
    pub warnings: Vec<String>,
    /// Intermediate parameters used by the construction.
    pub parameters: Vec<(String, String)>,
    pub covered: usize,
    pub stopped_early: bool,
}

#[derive(Clone, Debug)]
pub struct TileOptions {
    /// Skip the `Sᵢ`/`S_j` and window hypothesis evaluation.
    pub check_hypotheses: bool,
    /// Evaluate residual boundary-invariance before each scale.
    pub track_residual: bool,
}

impl Default for TileOptions {
    fn default() -> Self {
        TileOptions { check_hypotheses: true, track_residual: true }
    }
}

fn check_hypotheses(d: &FiniteSubset, scales: &[FiniteSubset], eps: &Q, full: bool) -> Result<HypothesisReport, TilingError> {
    let n = scales.len();
    let count_condition = num_traits::pow(one() - eps, n) <= *eps;
    let mut nesting = Vec::new();
    let mut window = Vec::new();
    if full {
        let e3 = eps * eps * eps;
        let e2 = eps * eps;
        for i in 0..n {
            for j in 0..i {
                let r = is_invariant(&scales[i], &e3, &scales[j])?;
                nesting.push((i, j, r.holds, q_str(&r.worst())));
            }
            if !d.is_empty() {
                let r = is_invariant(d, &e2, &scales[i])?;
                window.push((i, r.holds, q_str(&r.worst())));
            }
        }
    }
    let all_hold = count_condition && nesting.iter().all(|x| x.2) && window.iter().all(|x| x.1);
    Ok(HypothesisReport { count_condition, nesting, window, all_hold })
}

/// Builds a quasi-tiling of `d` by the increasing shapes `scales`, processing
/// scales from largest to smallest on the residual window.
pub fn quasi_tile(d: &FiniteSubset, scales: &[FiniteSubset], eps: &Q) -> Result<TilingRun, TilingError> {
    quasi_tile_with(d, scales, eps, &TileOptions::default())
}

pub fn quasi_tile_with(
    d: &FiniteSubset,
    scales: &[FiniteSubset],
    eps: &Q,
    opts: &TileOptions,
) -> Result<TilingRun, TilingError> {
    if scales.is_empty() {
        return Err(TilingError::Precondition("no scales".into()));
    }
    for s in scales {
        d.model().check_same(&s.model())?;
        if s.is_empty() {
            return Err(TilingError::Precondition("empty scale".into()));
        }
    }
    let n = scales.len();
    let hyp = check_hypotheses(d, scales, eps, opts.check_hypotheses)?;
    let mut warnings = Vec::new();
    if !hyp.count_condition {
        warnings.push(format!("(1−ε)^N ≤ ε fails for N = {n}, ε = {}", q_str(eps)));
    }
    if hyp.nesting.iter().any(|x| !x.2) {
        warnings.push("some scale is not (ε³, S_j)-invariant for a smaller scale".into());
    }
    if hyp.window.iter().any(|x| !x.1) {
        warnings.push("window is not (ε², Sᵢ)-invariant for every scale".into());
    }
    let eps2 = eps * eps;
    let top_param = q(2, 1) * &eps2;
    let low_param = q(4, 1) * eps;
    let two_eps = q(2, 1) * eps;
    let target = (one() - q(4, 1) * eps) * ratio(d.len(), 1);
    let parameters = vec![
        ("window invariance".to_string(), q_str(&eps2)),
        ("scale nesting invariance".to_string(), q_str(&(&eps2 * eps))),
        ("top scale disjointness".to_string(), q_str(&top_param)),
        ("lower scale disjointness".to_string(), q_str(&low_param)),
        ("residual boundary invariance".to_string(), q_str(&two_eps)),
        ("union boundary invariance".to_string(), q_str(&eps2)),
        ("output quasi-tiling parameter".to_string(), q_str(&(q(4, 1) * eps))),
    ];

    let model = d.model();
    let mut residual = d.clone();
    let mut chosen: Vec<Vec<Elem>> = vec![Vec::new(); n];
    let mut steps = Vec::new();
    let mut covered = 0usize;
    let mut stopped_early = false;
    for i in (0..n).rev() {
        if ratio(covered, 1) >= target && covered > 0 {
            stopped_early = true;
            break;
        }
        let s = &scales[i];
        let (res_inv, res_ratio) = if opts.track_residual && !residual.is_empty() && i + 1 < n {
            let r = is_boundary_invariant(&residual, &two_eps, s)?;
            (Some(r.holds), Some(q_str(&r.ratios[0])))
        } else {
            (None, None)
        };
        let param = if i + 1 == n { &top_param } else { &low_param };
        let cands = core_translates(s, &residual)?;
        let mut centers = Vec::new();
        let mut new_cover = 0;
        if !cands.is_empty() {
            let mut p = Packer::new(&residual, s, cands.into_vec());
            while let Some((_, ov)) = p.peek_best() {
                if !le_scaled(ov, param, s.len()) {
                    break;
                }
                let (x, _, fresh) = p.take_best().unwrap();
                new_cover += fresh;
                centers.push(x);
            }
        }
        covered += new_cover;
        if !centers.is_empty() {
            let placed = FiniteSubset::new(model, centers.iter().flat_map(|x| s.iter().map(move |k| model.multiply(x, k))));
            residual = residual.difference(&placed);
        }
        let frac = ratio(residual.len(), d.len().max(1));
        let pow = num_traits::pow(one() - eps, n - i);
        let bound = if pow > *eps { pow } else { eps.clone() };
        steps.push(ScaleStep {
            scale: i,
            shape_size: s.len(),
            centers: centers.len(),
            new_cover,
            overlap_param: q_str(param),
            residual_invariant: res_inv,
            residual_boundary_ratio: res_ratio,
            residual_bound_holds: frac <= bound,
            residual_fraction: q_str(&frac),
            residual_bound: q_str(&bound),
        });
        chosen[i] = centers;
    }
    if steps.iter().any(|s| s.residual_invariant == Some(false)) {
        warnings.push("residual window lost (2ε, Sᵢ)-boundary-invariance at some scale".into());
    }
    let tiling = QuasiTiling {
        scales: scales.iter().cloned().zip(chosen).collect(),
        epsilon: eps.clone(),
        target: d.clone(),
    };
    Ok(TilingRun { tiling, hypotheses: hyp, steps, warnings, parameters, covered, stopped_early })
}

// ---------------------------------------------------------------- validation

#[derive(Clone, Debug, Serialize)]
pub struct ScaleCoverage {
    pub shape_size: usize,
    pub centers: usize,
    pub union_size: usize,
    /// Smallest `|gSᵢ ∖ earlier| / |Sᵢ|` along the construction order.
    pub worst_fresh_ratio: String,
    pub eps_disjoint: bool,
    pub contained: bool,
}

/// Result of checking the four quasi-tiling clauses.
#[derive(Clone, Debug, Serialize)]
pub struct CoverageReport {
    pub covered: usize,
    pub total: usize,
    #[serde(serialize_with = "ser_q")]
    pub epsilon: Q,
    pub clause_eps_disjoint: bool,
    pub clause_disjoint_scales: bool,
    pub clause_contained: bool,
    pub clause_coverage: bool,
    pub per_scale: Vec<ScaleCoverage>,
    pub holds: bool,
}

pub fn validate_quasi_tiling(t: &QuasiTiling, d: &FiniteSubset, eps: &Q) -> CoverageReport {
    let mut per_scale = Vec::new();
    let mut all_seen: FxHashSet<Elem> = FxHashSet::default();
    let mut disjoint_scales = true;
    for (i, (s, c)) in t.scales.iter().enumerate() {
        let tiles = t.tiles(i);
        let refs: Vec<&FiniteSubset> = tiles.iter().collect();
        let fresh = fresh_counts(&refs, &(0..refs.len()).collect::<Vec<_>>());
        let eps_ok = fresh.iter().all(|&(f, sz)| fresh_ok(f, sz, eps));
        let worst = fresh.iter().map(|&(f, sz)| ratio(f, sz)).min().unwrap_or_else(one);
        let u = t.scale_union(i);
        let contained = u.is_subset(d);
        for e in &u {
            if !all_seen.insert(e.clone()) {
                disjoint_scales = false;
            }
        }
        per_scale.push(ScaleCoverage {
            shape_size: s.len(),
            centers: c.len(),
            union_size: u.len(),
            worst_fresh_ratio: q_str(&worst),
            eps_disjoint: eps_ok,
            contained,
        });
    }
    let covered = d.iter().filter(|e| all_seen.contains(*e)).count();
    let clause_coverage = le_scaled(d.len() - covered, eps, d.len());
    let clause_eps_disjoint = per_scale.iter().all(|s| s.eps_disjoint);
    let clause_contained = per_scale.iter().all(|s| s.contained);
    CoverageReport {
        covered,
        total: d.len(),
        epsilon: eps.clone(),
        holds: clause_eps_disjoint && disjoint_scales && clause_contained && clause_coverage,
        clause_eps_disjoint,
        clause_disjoint_scales: disjoint_scales,
        clause_contained,
        clause_coverage,
        per_scale,
    }
}

// ---------------------------------------------------------------- lemma checks

/// Outcome of an exact lemma check. The conclusion is asserted only when the
/// hypotheses hold.
#[derive(Clone, Debug, Serialize)]
pub struct LemmaCheck {
    pub hypotheses_hold: bool,
    pub conclusion_holds: bool,
    pub lhs: String,
    pub rhs: String,
    pub diagnostics: Vec<String>,
}

impl LemmaCheck {
    /// False only when hypotheses hold and the conclusion fails.
    pub fn passes(&self) -> bool {
        !self.hypotheses_hold || self.conclusion_holds
    }
}

/// Union of ε-disjoint `(δ,K)`-boundary-invariant tiles is `(δ/(1−ε), K)`-boundary-invariant.
pub fn union_invariance_bound(tiles: &[FiniteSubset], eps: &Q, delta: &Q, k: &FiniteSubset) -> Result<LemmaCheck, TilingError> {
    let mut diagnostics = Vec::new();
    let dis = eps_disjoint_check(tiles, eps);
    if !dis.holds {
        diagnostics.push(format!("tiles not ε-disjoint (first failure at {:?})", dis.first_failure));
    }
    let mut inv = true;
    for (i, t) in tiles.iter().enumerate() {
        if !bi(t, delta, k)?.0 {
            inv = false;
            diagnostics.push(format!("tile {i} not (δ,K)-boundary-invariant"));
        }
    }
    let model = k.model();
    let u = FiniteSubset::union_all(model, tiles.iter());
    let lhs = if u.is_empty() { 0 } else { boundary(k, &u)?.len() };
    let rhs = delta / (one() - eps) * ratio(u.len(), 1);
    Ok(LemmaCheck {
        hypotheses_hold: dis.holds && inv,
        conclusion_holds: ratio(lhs, 1) <= rhs,
        lhs: lhs.to_string(),
        rhs: q_str(&rhs),
        diagnostics,
    })
}

/// For `A ⊆ B`, `|A| ≤ (1−ε)|B|`, both `(ε²,K)`-boundary-invariant: `B∖A` is `(2ε,K)`-boundary-invariant.
pub fn difference_invariance_bound(a: &FiniteSubset, b: &FiniteSubset, eps: &Q, k: &FiniteSubset) -> Result<LemmaCheck, TilingError> {
    let mut diagnostics = Vec::new();
    let e2 = eps * eps;
    let sub = a.is_subset(b);
    if !sub {
        diagnostics.push("A ⊄ B".into());
    }
    let small = ratio(a.len(), 1) <= (one() - eps) * ratio(b.len(), 1);
    if !small {
        diagnostics.push("|A| > (1−ε)|B|".into());
    }
    let ai = bi(a, &e2, k)?.0;
    let bi_ = bi(b, &e2, k)?.0;
    if !ai {
        diagnostics.push("A not (ε²,K)-boundary-invariant".into());
    }
    if !bi_ {
        diagnostics.push("B not (ε²,K)-boundary-invariant".into());
    }
    let diff = b.difference(a);
    let lhs = if diff.is_empty() { 0 } else { boundary(k, &diff)?.len() };
    let rhs = q(2, 1) * eps * ratio(diff.len(), 1);
    Ok(LemmaCheck {
        hypotheses_hold: sub && small && ai && bi_,
        conclusion_holds: ratio(lhs, 1) <= rhs,
        lhs: lhs.to_string(),
        rhs: q_str(&rhs),
        diagnostics,
    })
}
