use ncfolner::group::*;
use ncfolner::tiling::*;
use proptest::prelude::*;

fn interval(a: i64, b: i64) -> FiniteSubset {
    FiniteSubset::new(GroupModel::Zd(1), (a..b).map(|x| Elem::new(&[x])))
}

fn boxed(n: i64) -> FiniteSubset {
    FiniteSubset::new(GroupModel::Zd(2), (0..n).flat_map(|x| (0..n).map(move |y| Elem::new(&[x, y]))))
}

/// Argmin overlap by direct enumeration of all integer translates.
fn argmin_oracle(d: &FiniteSubset, k: &FiniteSubset, a: &FiniteSubset) -> (Elem, usize) {
    let m = d.model();
    let cands: Vec<Elem> = d.iter().flat_map(|x| k.iter().map(move |y| m.multiply(x, &m.inverse(y)))).collect();
    let cands = FiniteSubset::new(m, cands);
    cands
        .iter()
        .filter(|x| k.left_translate(x).is_subset(d))
        .map(|x| (x.clone(), k.left_translate(x).intersection_len(a)))
        .min_by(|p, q| p.1.cmp(&q.1).then(p.0.cmp(&q.0)))
        .unwrap()
}

#[test]
fn eps_disjoint_examples() {
    let pair = vec![interval(0, 10), interval(8, 18)];
    assert!(eps_disjoint_check(&pair, &q(1, 4)).holds);
    let r = eps_disjoint_check(&pair, &q(1, 10));
    assert!(!r.holds);
    assert_eq!(r.fresh[1], (8, 10));
    assert!(r.reorder.is_some());
    let apart = vec![interval(0, 3), interval(5, 9), interval(20, 21)];
    assert!(eps_disjoint_check(&apart, &q(1, 100)).holds);
    let e = eps_disjoint_check(&[], &q(1, 4));
    assert!(e.holds && !e.warnings.is_empty());
}

#[test]
fn center_examples() {
    let r = find_low_overlap_center(&interval(0, 100), &interval(0, 10), &interval(0, 50), &q(1, 5)).unwrap();
    assert_eq!(r.overlap, 0);
    assert!(r.bound_holds);
    assert_eq!(r.bound, q(25, 4));
    let r = find_low_overlap_center(&interval(0, 20), &interval(0, 10), &interval(0, 15), &q(1, 4)).unwrap();
    assert_eq!((r.center.clone(), r.overlap), (Elem::new(&[10]), 5));
    assert_eq!(r.bound, q(10, 1));
    let r = find_low_overlap_center(&interval(0, 20), &interval(0, 10), &FiniteSubset::empty(GroupModel::Zd(1)), &q(1, 4)).unwrap();
    assert_eq!(r.overlap, 0);
    assert!(matches!(
        find_low_overlap_center(&interval(0, 5), &interval(0, 10), &interval(0, 1), &q(1, 4)),
        Err(TilingError::InsufficientInvariance { .. })
    ));
}

#[test]
fn greedy_examples() {
    let k = interval(0, 8);
    let r = greedy_centers(&k, &k, &q(1, 4)).unwrap();
    assert_eq!(r.centers, vec![Elem::new(&[0])]);
    assert_eq!(r.covered, 8);

    let r = greedy_centers(&interval(0, 64), &k, &q(1, 4)).unwrap();
    assert!(r.centers.len() >= 2);
    assert!(r.covered >= 16 && r.coverage_holds && r.disjoint_holds);
    assert!(r.centers.len() <= r.step_limit);

    let r = greedy_centers(&boxed(32), &boxed(4), &q(1, 8)).unwrap();
    assert!(r.covered >= 128 && r.coverage_holds && r.disjoint_holds);
}

#[test]
fn quasi_tile_trivial_and_forced_violation() {
    let d = interval(0, 37);
    let run = quasi_tile(&d, std::slice::from_ref(&d), &q(1, 8)).unwrap();
    assert_eq!(run.tiling.scales[0].1, vec![Elem::new(&[0])]);
    let rep = validate_quasi_tiling(&run.tiling, &d, &q(1, 8));
    assert!(rep.holds);
    assert_eq!(rep.covered, 37);

    let mut moved = run.tiling.clone();
    moved.scales[0].1 = vec![Elem::new(&[5])];
    let rep = validate_quasi_tiling(&moved, &d, &q(1, 8));
    assert!(!rep.clause_contained && !rep.holds);
}

#[test]
fn quasi_tile_z_and_z2() {
    let d = interval(0, 1 << 14);
    let scales: Vec<FiniteSubset> = [2, 8, 32, 128, 512].iter().map(|&s| interval(0, s)).collect();
    let eps = q(1, 8);
    let run = quasi_tile(&d, &scales, &eps).unwrap();
    let rep = validate_quasi_tiling(&run.tiling, &d, &(q(4, 1) * &eps));
    assert!(rep.holds, "{rep:?}");
    assert!(ratio(rep.covered, 1) >= (q(1, 1) - q(4, 1) * &eps) * ratio(d.len(), 1));

    let d = boxed(256);
    let scales: Vec<FiniteSubset> = [4, 16, 64].iter().map(|&s| boxed(s)).collect();
    let run = quasi_tile(&d, &scales, &eps).unwrap();
    let rep = validate_quasi_tiling(&run.tiling, &d, &(q(4, 1) * &eps));
    assert!(rep.holds, "{rep:?}");
}

#[test]
fn union_bound_examples() {
    let k = FiniteSubset::new(GroupModel::Zd(1), vec![Elem::new(&[0]), Elem::new(&[1])]);
    let single = union_invariance_bound(&[interval(0, 16)], &q(1, 4), &q(1, 4), &k).unwrap();
    assert!(single.hypotheses_hold && single.conclusion_holds);
    let two = union_invariance_bound(&[interval(0, 16), interval(30, 46)], &q(1, 4), &q(1, 4), &k).unwrap();
    assert!(two.hypotheses_hold && two.conclusion_holds);
    let overl = union_invariance_bound(&[interval(0, 10), interval(8, 18)], &q(1, 4), &q(2, 5), &k).unwrap();
    assert!(overl.passes());
}

#[test]
fn difference_bound_examples() {
    let k = FiniteSubset::new(GroupModel::Zd(1), vec![Elem::new(&[0]), Elem::new(&[1])]);
    let r = difference_invariance_bound(&FiniteSubset::empty(GroupModel::Zd(1)), &interval(0, 64), &q(1, 4), &k).unwrap();
    assert!(r.hypotheses_hold && r.conclusion_holds);
    let r = difference_invariance_bound(&interval(0, 16), &interval(0, 64), &q(1, 4), &k).unwrap();
    assert!(r.conclusion_holds);
    assert!(!r.hypotheses_hold);
    // A hugging the boundary of B.
    let r = difference_invariance_bound(&interval(0, 1), &interval(0, 64), &q(1, 4), &k).unwrap();
    assert!(r.passes());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn argmin_matches_enumeration(len in 12i64..60, klen in 1i64..8, a_lo in 0i64..30, a_len in 0i64..30, num in 1i64..4) {
        let d = interval(0, len);
        let k = interval(0, klen);
        let a = interval(a_lo, (a_lo + a_len).min(len));
        let eps = q(num, 8);
        let r = find_low_overlap_center(&d, &k, &a, &eps).unwrap();
        let (x, ov) = argmin_oracle(&d, &k, &a);
        prop_assert_eq!(r.center, x);
        prop_assert_eq!(r.overlap, ov);
        if r.hypothesis_holds {
            prop_assert!(r.bound_holds);
        }
    }

    #[test]
    fn quasi_tile_validates(side in 24i64..60, s1 in 2i64..4, s2 in 5i64..9) {
        let d = boxed(side);
        let scales = vec![boxed(s1), boxed(s2)];
        let eps = q(1, 8);
        let run = quasi_tile(&d, &scales, &eps).unwrap();
        let rep = validate_quasi_tiling(&run.tiling, &d, &(q(4, 1) * &eps));
        prop_assert!(rep.clause_eps_disjoint && rep.clause_disjoint_scales && rep.clause_contained);
        for st in &run.steps {
            if run.hypotheses.all_hold {
                prop_assert!(st.residual_bound_holds);
            }
        }
    }
}
