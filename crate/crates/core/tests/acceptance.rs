//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use ncfolner::czdec::*;
use ncfolner::ergodic::*;
use ncfolner::filtration::{admissible_region, build_filtered_sequence, disjointify_tiles, validate_regular, FilteredSequence, FiltrationConfig};
use ncfolner::group::*;
use ncfolner::ncalg::*;
use ncfolner::report::{all_hold, Check};
use ncfolner::tiling::*;
use num_complex::Complex64 as C;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! req {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn failures(rows: &[Check]) -> String {
    rows.iter().filter(|c| c.failed()).map(|c| format!("{} {:e} > {:e} ({})", c.name, c.measured, c.bound, c.detail)).collect::<Vec<_>>().join("; ")
}

fn z1() -> GroupModel {
    GroupModel::Zd(1)
}

fn z2() -> GroupModel {
    GroupModel::Zd(2)
}

fn interval(a: i64, b: i64) -> FiniteSubset {
    FiniteSubset::new(z1(), (a..b).map(|x| Elem::new(&[x])))
}

fn rect(x0: i64, y0: i64, w: i64, h: i64) -> FiniteSubset {
    FiniteSubset::new(z2(), (x0..x0 + w).flat_map(|x| (y0..y0 + h).map(move |y| Elem::new(&[x, y]))))
}

/// Random subset of the box `[−r, r]^dim` containing the identity.
fn small_set(rng: &mut ChaCha8Rng, model: GroupModel, r: i64, p: f64) -> FiniteSubset {
    let dim = if model == z1() { 1 } else { 2 };
    let cube: Vec<Elem> = if dim == 1 {
        (-r..=r).map(|x| Elem::new(&[x])).collect()
    } else {
        (-r..=r).flat_map(|x| (-r..=r).map(move |y| Elem::new(&[x, y]))).collect()
    };
    let mut v: Vec<Elem> = cube.into_iter().filter(|_| rng.gen_bool(p)).collect();
    v.push(model.identity());
    FiniteSubset::new(model, v)
}

fn boundary_ratio(e: &FiniteSubset, k: &FiniteSubset) -> Q {
    ratio(boundary(k, e).unwrap().len(), e.len())
}

/// Smallest `j/den`, `j ≥ 1`, with `pred` true, if any below `limit`.
fn smallest_grid(den: i64, limit: &Q, pred: impl Fn(&Q) -> bool) -> Option<Q> {
    (1..).map(|j| q(j, den)).take_while(|x| x < limit).find(|x| pred(x))
}

// ---------------------------------------------------------------- fixtures

struct Fixture {
    name: &'static str,
    seq: FilteredSequence,
    levels: Levels,
    adm: FiniteSubset,
}

fn fixtures() -> &'static [Fixture] {
    static CELL: OnceLock<Vec<Fixture>> = OnceLock::new();
    CELL.get_or_init(|| {
        [
            ("Z ε=1/4", FiltrationConfig::new(z1(), q(1, 4), q(1, 2), 3, Schedule::default())),
            ("Z ε=1/8", FiltrationConfig::new(z1(), q(1, 8), q(1, 2), 3, Schedule::default())),
        ]
        .into_iter()
        .map(|(name, cfg)| {
            let seq = build_filtered_sequence(&cfg).expect("fixture filtration");
            let levels = Levels::from_sequence(&seq).expect("fixture levels");
            let adm = admissible_region(&seq);
            Fixture { name, seq, levels, adm }
        })
        .collect()
    })
}

struct Instance {
    fixture: usize,
    f: OpFn,
    lambda: f64,
}

/// 50 seeded PSD instances on the admissible region of the fixtures, `d ≤ 4`.
fn instances() -> &'static [Instance] {
    static CELL: OnceLock<Vec<Instance>> = OnceLock::new();
    CELL.get_or_init(|| {
        let fx = fixtures();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        (0..50)
            .map(|i| {
                let fixture = i % fx.len();
                let d = 1 + i / 2 % 4;
                let density = rng.gen_range(0.05..0.6);
                let f = random_psd_fn(&mut rng, &fx[fixture].adm, d, density);
                let mut evs: Vec<f64> = f.values.values().flat_map(|m| m.eigh().unwrap().values).filter(|v| *v > 0.0).collect();
                evs.sort_by(f64::total_cmp);
                let quantile = rng.gen_range(0.05..0.9);
                let lambda = evs[((evs.len() as f64 * quantile) as usize).min(evs.len() - 1)] * rng.gen_range(0.1..1.0);
                Instance { fixture, f, lambda }
            })
            .collect()
    })
}

// ---------------------------------------------------------------- 1

fn c1_quasi_tiling() -> Outcome {
    let eps = q(1, 8);
    let four = q(4, 1) * &eps;
    let heis = GroupModel::parse("heisenberg").unwrap();
    let lamp = GroupModel::parse("lamplighter").unwrap();
    let cases: Vec<(&str, FiniteSubset, Vec<FiniteSubset>)> = vec![
        ("Z", interval(0, 1 << 14), [2, 8, 32, 128, 512].iter().map(|&s| interval(0, s)).collect()),
        ("Z²", rect(0, 0, 256, 256), [4, 16, 64].iter().map(|&s| rect(0, 0, s, s)).collect()),
        ("Heisenberg", word_ball(heis, 13), [1, 2, 3].iter().map(|&l| folner_shape(heis, l)).collect()),
        ("lamplighter", word_ball(lamp, 14), [0, 1, 2].iter().map(|&l| folner_shape(lamp, l)).collect()),
    ];
    let mut notes = Vec::new();
    for (name, d, scales) in cases {
        if name != "Z" && name != "Z²" {
            req!(d.len() >= 10_000, "{name}: word ball has only {} elements", d.len());
        }
        let t = Instant::now();
        let run = quasi_tile(&d, &scales, &eps).map_err(|e| format!("{name}: {e}"))?;
        let rep = validate_quasi_tiling(&run.tiling, &d, &four);
        let el = t.elapsed();
        req!(
            rep.clause_eps_disjoint && rep.clause_disjoint_scales && rep.clause_contained && rep.clause_coverage,
            "{name}: clauses {:?}",
            (rep.clause_eps_disjoint, rep.clause_disjoint_scales, rep.clause_contained, rep.clause_coverage)
        );
        req!(ratio(rep.covered, 1) >= (q(1, 1) - &four) * ratio(d.len(), 1), "{name}: coverage {}/{}", rep.covered, d.len());
        req!(el <= Duration::from_secs(120), "{name}: {el:?} over 2 minutes");
        notes.push(format!("{name} {}/{} in {:.1}s", rep.covered, d.len(), el.as_secs_f64()));
    }
    Ok(notes.join(", "))
}

// ---------------------------------------------------------------- 2

/// Exact argmin of `|xK ∩ A|` over all `x` with `xK ⊆ D`, by enumeration.
fn argmin_overlap(d: &FiniteSubset, k: &FiniteSubset, a: &FiniteSubset) -> Option<usize> {
    let m = d.model();
    let cands = FiniteSubset::new(m, d.iter().flat_map(|x| k.iter().map(move |y| m.multiply(x, &m.inverse(y)))).collect::<Vec<_>>());
    cands.iter().filter(|x| k.left_translate(x).is_subset(d)).map(|x| k.left_translate(x).intersection_len(a)).min()
}

fn random_domain(rng: &mut ChaCha8Rng, i: usize) -> FiniteSubset {
    if i % 2 == 0 {
        interval(0, rng.gen_range(40..240))
    } else {
        let s = rng.gen_range(14..36);
        rect(0, 0, s, s)
    }
}

fn c2_lemmas() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let eps_grid = [q(1, 8), q(1, 6), q(1, 4), q(1, 3)];
    let mut held = [0usize; 5];

    // Low-overlap center.
    for i in 0..100 {
        let d = random_domain(&mut rng, i);
        let m = d.model();
        let k = small_set(&mut rng, m, if m == z1() { 3 } else { 1 }, 0.5);
        let density = rng.gen_range(0.0..0.7);
        let a = d.filter(|_| rng.gen_bool(density));
        let eps = eps_grid.choose(&mut rng).unwrap().clone();
        let r = find_low_overlap_center(&d, &k, &a, &eps).map_err(|e| format!("center {i}: {e}"))?;
        req!(Some(r.overlap) == argmin_overlap(&d, &k, &a), "center {i}: overlap {} differs from enumeration", r.overlap);
        req!(ratio(r.overlap, 1) <= ratio(a.len() * k.len(), d.len()) / (q(1, 1) - &eps) || !r.hypothesis_holds, "center {i}: bound");
        if r.hypothesis_holds {
            req!(r.bound_holds, "center {i}: overlap {} above {}", r.overlap, q_str(&r.bound));
            held[0] += 1;
        }
    }

    // Greedy centers.
    for i in 0..100 {
        let d = random_domain(&mut rng, i);
        let m = d.model();
        let k = small_set(&mut rng, m, if m == z1() { 3 } else { 1 }, 0.5);
        let eps = eps_grid.choose(&mut rng).unwrap().clone();
        let r = greedy_centers(&d, &k, &eps).map_err(|e| format!("greedy {i}: {e}"))?;
        let union = FiniteSubset::union_all(m, r.centers.iter().map(|c| k.left_translate(c)).collect::<Vec<_>>().iter());
        req!(union.len() == r.covered, "greedy {i}: |C·K| {} vs reported {}", union.len(), r.covered);
        req!(union.is_subset(&d), "greedy {i}: translates leave D");
        if r.hypothesis_holds {
            req!(ratio(union.len(), 1) >= &eps * ratio(d.len(), 1), "greedy {i}: |C·K| = {} < ε|D|", union.len());
            req!(r.coverage_holds && r.disjoint_holds, "greedy {i}: coverage/disjointness flags");
            held[1] += 1;
        }
    }

    // Union of ε-disjoint boundary-invariant tiles.
    for i in 0..100 {
        let model = if i % 2 == 0 { z1() } else { z2() };
        let k = small_set(&mut rng, model, 1, 0.5);
        let n = rng.gen_range(1..5);
        let mut tiles = Vec::new();
        let mut pos = 0i64;
        for _ in 0..n {
            let len = rng.gen_range(10..30);
            let t = if model == z1() { interval(pos, pos + len) } else { rect(pos, 0, len, rng.gen_range(10..30)) };
            pos += len - rng.gen_range(0..3);
            tiles.push(t);
        }
        let eps = eps_grid.choose(&mut rng).unwrap().clone();
        let delta = tiles.iter().map(|t| boundary_ratio(t, &k)).max().unwrap();
        let r = union_invariance_bound(&tiles, &eps, &delta, &k).map_err(|e| format!("union {i}: {e}"))?;
        let u = FiniteSubset::union_all(model, tiles.iter());
        let lhs = boundary_by_definition(&k, &u).unwrap().len();
        req!(r.lhs == lhs.to_string(), "union {i}: boundary {} vs enumeration {lhs}", r.lhs);
        req!(r.passes(), "union {i}: {} > {}", r.lhs, r.rhs);
        held[2] += r.hypotheses_hold as usize;
    }

    // Difference of nested invariant sets.
    for i in 0..100 {
        let (a, b, k) = if i % 2 == 0 {
            let k = small_set(&mut rng, z1(), 1, 0.5);
            let bl = rng.gen_range(400..1200);
            let al = rng.gen_range(150..bl / 2);
            let off = rng.gen_range(0..bl - al);
            (interval(off, off + al), interval(0, bl), k)
        } else {
            let k = FiniteSubset::new(z2(), vec![Elem::new(&[0, 0]), Elem::new(&[1, 0]), Elem::new(&[0, 1])]);
            let bs = rng.gen_range(90..130);
            let a_s = rng.gen_range(50..bs * 3 / 4);
            let (ox, oy) = (rng.gen_range(0..bs - a_s), rng.gen_range(0..bs - a_s));
            (rect(ox, oy, a_s, a_s), rect(0, 0, bs, bs), k)
        };
        let worst = boundary_ratio(&a, &k).max(boundary_ratio(&b, &k));
        let small = |e: &Q| ratio(a.len(), 1) <= (q(1, 1) - e) * ratio(b.len(), 1);
        let eps = smallest_grid(100, &q(1, 2), |e| e * e >= worst && small(e)).unwrap_or_else(|| q(1, 4));
        let r = difference_invariance_bound(&a, &b, &eps, &k).map_err(|e| format!("difference {i}: {e}"))?;
        req!(r.passes(), "difference {i}: {} > {}", r.lhs, r.rhs);
        held[3] += r.hypotheses_hold as usize;
    }

    // Disjointified tiles.
    for i in 0..100 {
        let k = small_set(&mut rng, z1(), 1, 0.5);
        let l = small_set(&mut rng, z1(), 2, 0.4);
        let kk = FiniteSubset::new(z1(), k.iter().flat_map(|a| k.iter().map(move |b| z1().multiply(&z1().inverse(a), b))).collect::<Vec<_>>());
        let n = rng.gen_range(2..6);
        let mut tiles = Vec::new();
        let mut pos = 0i64;
        for _ in 0..n {
            let len = rng.gen_range(60..200);
            tiles.push(interval(pos, pos + len));
            pos += len - rng.gen_range(0..4);
        }
        let eps = smallest_grid(200, &q(1, 4), |e| {
            eps_disjoint_check(&tiles, e).holds && tiles.iter().all(|t| boundary_ratio(t, &kk) <= *e)
        })
        .unwrap_or_else(|| q(1, 8));
        let inv = tiles.iter().map(|t| is_invariant(t, &q(1, 1), &l).unwrap().ratios.into_iter().max().unwrap()).max().unwrap();
        let delta = if inv > eps { inv } else { &eps + q(1, 200) };
        let r = disjointify_tiles(&tiles, &k, &eps, &delta, &l).map_err(|e| format!("disjointify {i}: {e}"))?;
        for (x, a) in r.atoms.iter().enumerate() {
            for b in &r.atoms[x + 1..] {
                req!(a.is_disjoint(b), "disjointify {i}: atoms overlap");
            }
        }
        req!(r.passes(), "disjointify {i}: {:?}", r.checks);
        if r.family_hypotheses_ok && r.checks.iter().all(|c| c.hypotheses_ok) {
            held[4] += 1;
        }
    }

    for (name, h) in ["center", "greedy", "union", "difference", "disjointify"].iter().zip(held) {
        req!(h >= 25, "{name}: hypotheses held on only {h}/100 instances");
    }
    Ok(format!("500 instances, hypotheses held on {held:?} per lemma"))
}

// ---------------------------------------------------------------- 3

fn c3_regular() -> Outcome {
    let mut notes = Vec::new();
    for (name, model, schedule) in [("Z", z1(), Schedule::default()), ("Z²", z2(), Schedule::Linear { step: 1 })] {
        let t = Instant::now();
        let cfg = FiltrationConfig::new(model, q(1, 4), q(1, 2), 3, schedule);
        let seq = build_filtered_sequence(&cfg).map_err(|e| format!("{name}: {e}"))?;
        let rep = validate_regular(&seq, &q(1, 2)).map_err(|e| format!("{name}: {e}"))?;
        let el = t.elapsed();
        let bad: Vec<String> = rep.rows.iter().filter(|r| r.asserted && !r.holds).map(|r| format!("{} n={}", r.clause, r.n)).collect();
        req!(rep.holds && bad.is_empty(), "{name}: {bad:?}");
        for clause in ["nesting", "admissible_tags", "folner_boundary_bk", "adm_coverage"] {
            req!(rep.rows.iter().any(|r| r.clause == clause && r.asserted), "{name}: clause {clause} not checked");
        }
        req!(el <= Duration::from_secs(300), "{name}: {el:?} over 5 minutes");
        notes.push(format!("{name} {} rows in {:.1}s", rep.rows.len(), el.as_secs_f64()));
    }
    Ok(notes.join(", "))
}

// ---------------------------------------------------------------- 4

/// Classical stopping time over arbitrary nested partitions, scalar case.
fn stopping_oracle(f: &OpFn, lambda: f64, levels: &Levels, k: usize, x: &Elem) -> bool {
    (k..=levels.depth()).all(|j| {
        let atom = &levels.atoms(j)[levels.atom_of(j, x).unwrap()];
        let s: f64 = atom.iter().map(|y| f.at(y)[(0, 0)].re).sum();
        s / atom.len() as f64 <= lambda
    })
}

fn c4_cuculescu() -> Outcome {
    let fx = fixtures();
    let mut scalar = 0;
    for (i, inst) in instances().iter().enumerate() {
        let levels = &fx[inst.fixture].levels;
        req!(levels.window.len() <= 4096 && levels.depth() == 3 && inst.f.d <= 4, "instance {i}: outside the instance class");
        let cc = cuculescu(&inst.f, inst.lambda, levels).map_err(|e| format!("instance {i}: {e}"))?;
        req!(cc.all_hold(), "instance {i}: {}", failures(&cc.checks.rows));
        let mass = cc.checks.rows.iter().find(|c| c.name == "cuculescu_mass").unwrap();
        req!(mass.measured <= mass.bound, "instance {i}: λφ(1−q₀) = {} > ‖f‖₁ = {}", mass.measured, mass.bound);
        if inst.f.d == 1 {
            scalar += 1;
            for k in 0..=3 {
                for x in &levels.window {
                    let got = cc.q_at(k, x)[(0, 0)].re > 0.5;
                    req!(got == stopping_oracle(&inst.f, inst.lambda, levels, k, x), "instance {i}: stopping time differs at k={k}");
                }
            }
        }
    }
    // Dyadic scalar instances with values exact in binary.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let dyadic = Levels::dyadic(3, 3).unwrap();
    for i in 0..30 {
        let mut vals: Vec<(Elem, Matrix)> = Vec::new();
        for x in 0..64 {
            if rng.gen_bool(0.4) {
                vals.push((Elem::new(&[x]), Matrix::diag(&[rng.gen_range(1..40) as f64 / 4.0])));
            }
        }
        let f = OpFn::from_values(z1(), 1, vals).unwrap();
        let lambda = rng.gen_range(1..30) as f64 / 4.0 + 1.0 / 7.0;
        let cc = cuculescu(&f, lambda, &dyadic).map_err(|e| format!("dyadic {i}: {e}"))?;
        req!(cc.all_hold(), "dyadic {i}: {}", failures(&cc.checks.rows));
        for k in 0..=3 {
            for x in &dyadic.window {
                req!((cc.q_at(k, x)[(0, 0)].re > 0.5) == stopping_oracle(&f, lambda, &dyadic, k, x), "dyadic {i}: stopping time differs");
            }
        }
        scalar += 1;
    }
    Ok(format!("50 instances, {scalar} scalar oracle comparisons exact"))
}

// ---------------------------------------------------------------- 5

fn c5_decomposition() -> Outcome {
    let fx = fixtures();
    let mut worst_res: f64 = 0.0;
    let mut nontrivial = 0;
    for (i, inst) in instances().iter().enumerate() {
        let levels = &fx[inst.fixture].levels;
        let parts = cz_decompose(&inst.f, inst.lambda, levels).map_err(|e| format!("instance {i}: {e}"))?;
        worst_res = worst_res.max(parts.residual);
        req!(parts.residual <= 1e-9, "instance {i}: residual {:e}", parts.residual);
        let mut rows = verify_good(&parts, inst.lambda).map_err(|e| e.to_string())?;
        rows.extend(verify_hybrid(&parts).map_err(|e| e.to_string())?);
        rows.extend(verify_bad_all(&parts, inst.lambda).map_err(|e| e.to_string())?);
        let zr = zeta_projection(&parts.cc).map_err(|e| e.to_string())?;
        req!(zr.hypothesis, "instance {i}: active non-admissible atom");
        rows.extend(zr.rows.clone());
        for name in ["good_l2", "hybrid_l1", "bad_diagonal", "bad_offdiag", "zeta_mass"] {
            req!(rows.iter().any(|r| r.name == name && r.asserted), "instance {i}: {name} missing");
        }
        req!(all_hold(&rows), "instance {i}: {}", failures(&rows));
        if parts.b_total().unwrap().max_abs() > 0.0 {
            nontrivial += 1;
        }
    }
    req!(nontrivial >= 25, "only {nontrivial} instances have a nonzero bad part");
    Ok(format!("50 instances ({nontrivial} with b ≠ 0), worst residual {worst_res:.1e}"))
}

// ---------------------------------------------------------------- 6

fn c6_cancellation() -> Outcome {
    let fx = fixtures();
    let mut worst: f64 = 0.0;
    for (i, inst) in instances().iter().enumerate() {
        let levels = &fx[inst.fixture].levels;
        let parts = cz_decompose(&inst.f, inst.lambda, levels).map_err(|e| e.to_string())?;
        let zr = zeta_projection(&parts.cc).map_err(|e| e.to_string())?;
        let c = cancellation_check(&parts, &zr).map_err(|e| e.to_string())?;
        worst = worst.max(c.measured);
        req!(c.hypothesis == Some(true) && c.holds && c.bound == 0.0, "instance {i}: {c:?}");
        let v = zeta_vanishing_check(&parts, &zr).map_err(|e| e.to_string())?;
        req!(v.holds, "instance {i}: {v:?}");
    }
    Ok(format!("50 instances, worst ‖ζ𝔻ₙ(b_k)ζ‖ = {worst:.1e}"))
}

// ---------------------------------------------------------------- 7

fn c7_local() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut count = 0;
    for fx in fixtures() {
        let levels = &fx.levels;
        for k in 1..=levels.depth() {
            let atoms: Vec<&FiniteSubset> =
                levels.atoms(k).iter().enumerate().filter(|(a, s)| levels.admissible[k][*a] && s.is_subset(&fx.adm)).map(|(_, s)| s).collect();
            req!(!atoms.is_empty(), "{}: no admissible fixture atom at level {k}", fx.name);
            for a in atoms.iter().take(4) {
                for d in [1, 3] {
                    let f = OpFn::indicator(a, &random_psd(&mut rng, d, 1.0));
                    for n in 0..k {
                        let c = local_estimate_report(&f, n, k, 1.0, levels).map_err(|e| e.to_string())?;
                        req!(c.asserted && c.holds, "{}: case 1 n={n} k={k}: {c:?}", fx.name);
                        count += 1;
                    }
                    let mut g = OpFn::zero(levels.model, d);
                    for x in a.iter() {
                        g.insert(x.clone(), random_hermitian(&mut rng, d));
                    }
                    let g = g.sub(&levels.expectation(k, &g).map_err(|e| e.to_string())?).unwrap();
                    for n in k..=levels.depth() {
                        for p in [1.0, 2.0, f64::INFINITY] {
                            let c = local_estimate_report(&g, n, k, p, levels).map_err(|e| e.to_string())?;
                            req!(c.asserted && c.holds, "{}: case 2 n={n} k={k} p={p}: {c:?}", fx.name);
                            count += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{count} asserted local estimates"))
}

// ---------------------------------------------------------------- 8

fn c8_weak11() -> Outcome {
    let fx = fixtures();
    let mut worst: f64 = 0.0;
    for (i, inst) in instances().iter().enumerate() {
        let levels = &fx[inst.fixture].levels;
        let lambdas: Vec<f64> = [0.25, 0.5, 1.0, 2.0, 4.0].iter().map(|s| s * inst.lambda).collect();
        let w = weak11_check(&inst.f, &lambdas, levels, i as u64, 64.0).map_err(|e| e.to_string())?;
        req!(w.exact_signs, "instance {i}: signs sampled");
        req!(all_hold(&w.checks), "instance {i}: {}", failures(&w.checks));
        req!(w.measured_constant <= 64.0, "instance {i}: constant {}", w.measured_constant);
        worst = worst.max(w.measured_constant);
    }
    Ok(format!("50 instances, exact signs, sup constant {worst:.3} (empirical ceiling 64)"))
}

// ---------------------------------------------------------------- 9

fn c9_ergodic() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let action = Action::generic_unitary(&mut rng, 3).map_err(|e| e.to_string())?;
    let x = Observable::Matrix(random_hermitian(&mut rng, 3));
    let r = ergodic_converge(&action, &x, &Schedule::default(), 6, 1e-2).map_err(|e| e.to_string())?;
    req!(all_hold(&r.checks), "{}", failures(&r.checks));
    let Action::Conjugation { v, theta } = &action else { unreachable!() };
    let Observable::Matrix(m) = &x else { unreachable!() };
    let mut gap: f64 = 0.0;
    for row in &r.rows {
        let o = geometric_sum_oracle(v, theta, m, 4i64.pow(row.n as u32)).map_err(|e| e.to_string())?;
        gap = gap.max((o - row.distance).abs());
    }
    req!(gap <= 1e-10, "oracle gap {gap:e}");
    req!(r.rows[6].distance < 1e-2, "n=6 distance {}", r.rows[6].distance);

    let torus = Action::translation(vec![16, 16]).map_err(|e| e.to_string())?;
    let vals: Vec<f64> = (0..256).map(|_| rng.gen_range(-8..=8) as f64 / 8.0).collect();
    let r2 = ergodic_converge(&torus, &Observable::Grid(vals), &Schedule::default(), 3, 0.0).map_err(|e| e.to_string())?;
    req!(all_hold(&r2.checks), "{}", failures(&r2.checks));
    for row in &r2.rows {
        if row.size >= 256 {
            req!(row.distance == 0.0, "torus n={} distance {}", row.n, row.distance);
        }
    }
    req!(r2.rows.iter().any(|row| row.size >= 256), "no Fₙ covers a period");
    req!(t.elapsed() < Duration::from_secs(30), "took {:?}", t.elapsed());
    Ok(format!("oracle gap {gap:.1e}, n=6 distance {:.2e}, torus exact from |Fₙ| ≥ 256", r.rows[6].distance))
}

// ---------------------------------------------------------------- 10

fn pipeline(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let d = rect(0, 0, 64, 64);
    let run = quasi_tile(&d, &[rect(0, 0, 4, 4), rect(0, 0, 16, 16)], &q(1, 8)).unwrap();
    out.push(serde_json::to_string(&validate_quasi_tiling(&run.tiling, &d, &q(1, 2))).unwrap());
    out.push(serde_json::to_string(&run.tiling).unwrap());
    let fx = &fixtures()[0];
    out.push(serde_json::to_string(&validate_regular(&fx.seq, &q(1, 2)).unwrap().rows.iter().map(|r| (&r.clause, r.holds, &r.detail)).collect::<Vec<_>>()).unwrap());
    let f = random_psd_fn(&mut rng, &fx.adm, 2, 0.3);
    let parts = cz_decompose(&f, 1.0, &fx.levels).unwrap();
    out.push(serde_json::to_string(&verify_bad_all(&parts, 1.0).unwrap()).unwrap());
    out.push(serde_json::to_string(&parts.cc.checks).unwrap());
    let w = weak11_check(&f, &[0.5, 1.0], &fx.levels, seed, 64.0).unwrap();
    out.push(serde_json::to_string(&w.rows).unwrap());
    let u = Action::generic_unitary(&mut rng, 3).unwrap();
    let mut x = Matrix::zeros(3);
    x[(0, 2)] = C::new(1.0, 0.0);
    out.push(serde_json::to_string(&ergodic_converge(&u, &Observable::Matrix(x), &Schedule::default(), 4, 1.0).unwrap().rows).unwrap());
    out.join("\n")
}

fn c10_determinism() -> Outcome {
    let (a, b) = (pipeline(10), pipeline(10));
    req!(a == b, "reports differ between identical runs");
    req!(pipeline(11) != a, "seed has no effect on the report");
    Ok(format!("{} bytes identical across runs", a.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("quasi-tiling validity", c1_quasi_tiling),
        ("lemma-level exact checks", c2_lemmas),
        ("regular filtered sequences", c3_regular),
        ("Cuculescu projections", c4_cuculescu),
        ("CZ decomposition bounds", c5_decomposition),
        ("cancellation", c6_cancellation),
        ("local estimates", c7_local),
        ("weak (1,1) regression", c8_weak11),
        ("ergodic convergence", c9_ergodic),
        ("determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {:>2}. {name} ({secs:.1}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {:>2}. {name} ({secs:.1}s): {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
