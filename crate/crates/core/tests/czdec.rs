use ncfolner::czdec::*;
use ncfolner::filtration::{admissible_region, build_filtered_sequence, FiltrationConfig};
use ncfolner::group::*;
use ncfolner::ncalg::*;
use ncfolner::report::all_hold;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn z() -> GroupModel {
    GroupModel::Zd(1)
}

fn e1(x: i64) -> Elem {
    Elem::new(&[x])
}

fn interval(a: i64, b: i64) -> FiniteSubset {
    FiniteSubset::new(z(), (a..b).map(e1))
}

fn scalar_fn(vals: &[f64]) -> OpFn {
    OpFn::from_values(z(), 1, vals.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, &v)| (e1(i as i64), Matrix::diag(&[v])))).unwrap()
}

/// Classical stopping time: `q_k(x) = 1` iff every dyadic average at levels `j ≥ k` is `≤ λ`.
fn stopping_oracle(vals: &[f64], depth: u32, lambda: f64) -> Vec<Vec<bool>> {
    let avg = |j: u32, x: usize| -> f64 {
        let w = 1usize << j;
        let lo = x / w * w;
        vals[lo..lo + w].iter().sum::<f64>() / w as f64
    };
    (0..=depth)
        .map(|k| (0..vals.len()).map(|x| (k..=depth).all(|j| avg(j, x) <= lambda)).collect())
        .collect()
}

#[test]
fn trivial_lambda_gives_identity() {
    let levels = Levels::dyadic(3, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f = random_psd_fn(&mut rng, &levels.window, 2, 0.8);
    let lambda = 1.0 + lp_norm(&f, f64::INFINITY).unwrap();
    let cc = cuculescu(&f, lambda, &levels).unwrap();
    assert!(cc.q.iter().all(|l| l.is_empty()));
    for k in 0..=3 {
        assert!(cc.active_atoms(k).is_empty());
    }
    let parts = cz_decompose(&f, lambda, &levels).unwrap();
    assert!(parts.g.sub(&f).unwrap().max_abs() < 1e-12);
    assert!(parts.h_total().unwrap().max_abs() < 1e-12 && parts.b_total().unwrap().max_abs() < 1e-12);
    assert!(all_hold(&verify_good(&parts, lambda).unwrap()));
    assert!(all_hold(&verify_hybrid(&parts).unwrap()));
}

#[test]
fn scalar_matches_stopping_time() {
    let levels = Levels::dyadic(2, 0).unwrap();
    let vals = [1.0, 5.0, 0.0, 2.0];
    for lambda in [0.5, 1.5, 2.5, 3.5, 4.5, 6.0] {
        let cc = cuculescu(&scalar_fn(&vals), lambda, &levels).unwrap();
        let oracle = stopping_oracle(&vals, 2, lambda);
        for k in 0..=2 {
            for x in 0..4 {
                let q = cc.q_at(k, &e1(x as i64))[(0, 0)].re;
                assert_eq!(q > 0.5, oracle[k][x], "λ={lambda} k={k} x={x}");
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let levels = Levels::dyadic(5, 0).unwrap();
    for _ in 0..30 {
        let vals: Vec<f64> = (0..32).map(|_| if rng.gen_bool(0.4) { rng.gen_range(1..40) as f64 / 4.0 } else { 0.0 }).collect();
        let lambda = rng.gen_range(1..30) as f64 / 4.0 + 1.0 / 7.0;
        let cc = cuculescu(&scalar_fn(&vals), lambda, &levels).unwrap();
        let oracle = stopping_oracle(&vals, 5, lambda);
        for k in 0..=5 {
            for x in 0..32 {
                assert_eq!(cc.q_at(k, &e1(x as i64))[(0, 0)].re > 0.5, oracle[k][x]);
            }
        }
        let parts = cz_decompose(&scalar_fn(&vals), lambda, &levels).unwrap();
        for bo in &parts.boff {
            assert!(bo.max_abs() < 1e-14);
        }
    }
}

#[test]
fn random_psd_properties() {
    let levels = Levels::dyadic(3, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let f = random_psd_fn(&mut rng, &levels.window, 2, 1.0);
        let mut evs: Vec<f64> = f.values.values().flat_map(|m| m.eigh().unwrap().values).collect();
        evs.sort_by(f64::total_cmp);
        let lambda = evs[evs.len() / 2];
        let cc = cuculescu(&f, lambda, &levels).unwrap();
        assert!(cc.all_hold(), "{:?}", cc.checks.rows);
        let parts = cz_decompose(&f, lambda, &levels).unwrap();
        assert!(parts.residual <= 1e-9);
        let good = verify_good(&parts, lambda).unwrap();
        assert!(all_hold(&good), "{good:?}");
        let hyb = verify_hybrid(&parts).unwrap();
        assert!(all_hold(&hyb), "{hyb:?}");
        let bad = verify_bad_all(&parts, lambda).unwrap();
        assert!(all_hold(&bad), "{bad:?}");
    }
}

#[test]
fn bad_precondition_and_single_atom() {
    let levels = Levels::dyadic(2, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let f = random_psd_fn(&mut rng, &levels.window, 1, 1.0);
    let parts = cz_decompose(&f, 0.8, &levels).unwrap();
    assert!(matches!(verify_bad(&parts, 0.8, 1, &interval(0, 3), &interval(0, 1)), Err(CzError::Precondition(_))));
    assert!(matches!(verify_bad(&parts, 0.8, 1, &interval(0, 4), &interval(3, 6)), Err(CzError::Precondition(_))));
    let rows = verify_bad(&parts, 0.8, 1, &interval(0, 4), &interval(0, 4)).unwrap();
    assert!(all_hold(&rows));
}

#[test]
fn non_psd_rejected() {
    let levels = Levels::dyadic(1, 0).unwrap();
    let f = scalar_fn(&[1.0, -1.0]);
    assert!(matches!(cuculescu(&f, 1.0, &levels), Err(CzError::Precondition(_))));
}

#[test]
fn zeta_examples() {
    let mut levels = Levels::dyadic(2, 0).unwrap();
    levels.folner = vec![interval(0, 2), interval(0, 4), interval(0, 8)];
    let f = OpFn::zero(z(), 2);
    let cc = cuculescu(&f, 1.0, &levels).unwrap();
    let zr = zeta_projection(&cc).unwrap();
    assert!(zr.zeta.values.is_empty() && zr.complement_trace == 0.0);

    // One heavy point at 2: only the level-1 atom {2,3} is active.
    let f = scalar_fn(&[0.0, 0.0, 8.0, 0.0]);
    let cc = cuculescu(&f, 2.5, &levels).unwrap();
    assert_eq!(cc.active_atoms(1), vec![1]);
    assert!(cc.active_atoms(0).is_empty() && cc.active_atoms(2).is_empty());
    let zr = zeta_projection(&cc).unwrap();
    let support: Vec<i64> = zr.zeta.pruned(1e-12).values.keys().map(|x| x.coords()[0]).collect();
    // A·F₀⁻¹ = {2,3} − {0,1}
    assert_eq!(support, vec![1, 2, 3]);
    assert!(all_hold(&zr.rows));
    let parts = cz_decompose(&f, 2.5, &levels).unwrap();
    assert!(zeta_vanishing_check(&parts, &zr).unwrap().holds);
}

#[test]
fn filtered_sequence_run() {
    let cfg = FiltrationConfig::new(z(), q(1, 4), q(1, 2), 3, Schedule::default());
    let seq = build_filtered_sequence(&cfg).unwrap();
    let levels = Levels::from_sequence(&seq).unwrap();
    let adm = admissible_region(&seq);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for d in [1usize, 2, 3] {
        let f = random_psd_fn(&mut rng, &adm, d, 0.3);
        let lambda = rng.gen_range(0.5..3.0);
        let parts = cz_decompose(&f, lambda, &levels).unwrap();
        assert!(parts.cc.all_hold());
        assert!(parts.residual <= 1e-9);
        assert!(all_hold(&verify_good(&parts, lambda).unwrap()));
        assert!(all_hold(&verify_hybrid(&parts).unwrap()));
        assert!(all_hold(&verify_bad_all(&parts, lambda).unwrap()));
        let zr = zeta_projection(&parts.cc).unwrap();
        assert!(zr.hypothesis);
        assert!(all_hold(&zr.rows), "{:?}", zr.rows);
        let v = zeta_vanishing_check(&parts, &zr).unwrap();
        assert!(v.holds, "{v:?}");
    }
}
