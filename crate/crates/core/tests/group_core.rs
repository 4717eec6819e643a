use ncfolner::group::*;
use proptest::prelude::*;

fn z(v: &[i64]) -> Elem {
    Elem::new(v)
}

fn interval(a: i64, b: i64) -> FiniteSubset {
    FiniteSubset::new(GroupModel::Zd(1), (a..b).map(|x| z(&[x])))
}

fn square(n: i64) -> FiniteSubset {
    FiniteSubset::new(GroupModel::Zd(2), (0..n).flat_map(|x| (0..n).map(move |y| z(&[x, y]))))
}

fn corner() -> FiniteSubset {
    FiniteSubset::new(GroupModel::Zd(2), vec![z(&[0, 0]), z(&[1, 0]), z(&[0, 1])])
}

/// Brute-force product by explicit pair enumeration.
fn product_oracle(e: &FiniteSubset, k: &FiniteSubset) -> std::collections::BTreeSet<Elem> {
    let m = e.model();
    e.iter().flat_map(|x| k.iter().map(move |y| m.multiply(x, y))).collect()
}

#[test]
fn product_examples() {
    let m = GroupModel::Zd(2);
    assert!(product_set(&FiniteSubset::empty(m), &corner()).unwrap().is_empty());
    let e = square(4);
    assert_eq!(product_set(&e, &FiniteSubset::identity_set(m)).unwrap(), e);
    let p = product_set(&e, &corner()).unwrap();
    assert_eq!(p.len(), product_oracle(&e, &corner()).len());
    assert_eq!(p.len(), 24);
}

#[test]
fn model_mismatch() {
    let r = product_set(&interval(0, 3), &square(2));
    assert!(matches!(r, Err(GroupError::ModelMismatch { .. })));
}

#[test]
fn boundary_and_interior_examples() {
    let e = interval(0, 8);
    let k = FiniteSubset::new(GroupModel::Zd(1), vec![z(&[0]), z(&[1])]);
    let b = boundary(&k, &e).unwrap();
    assert_eq!(b, FiniteSubset::new(GroupModel::Zd(1), [-1, 0, 7, 8].iter().map(|&x| z(&[x]))));
    assert_eq!(interior(&k, &e).unwrap(), interval(1, 7));
    assert!(boundary(&FiniteSubset::identity_set(GroupModel::Zd(1)), &e).unwrap().is_empty());
    assert!(boundary(&k, &FiniteSubset::empty(GroupModel::Zd(1))).unwrap().is_empty());
    assert!(closure(&k, &FiniteSubset::empty(GroupModel::Zd(1))).unwrap().is_empty());
    assert_eq!(interior(&FiniteSubset::identity_set(GroupModel::Zd(1)), &e).unwrap(), e);
}

#[test]
fn invariance_examples() {
    let e = square(4);
    let r = is_invariant(&e, &q(1, 2), &corner()).unwrap();
    assert!(r.holds);
    assert_eq!(r.counts, vec![8, 8]);
    assert!(!is_invariant(&e, &q(1, 4), &corner()).unwrap().holds);
    assert!(is_invariant(&e, &q(1, 100), &FiniteSubset::identity_set(GroupModel::Zd(2))).unwrap().holds);
    assert!(matches!(
        is_invariant(&FiniteSubset::empty(GroupModel::Zd(2)), &q(1, 2), &corner()),
        Err(GroupError::Degenerate(_))
    ));

    let e = interval(0, 8);
    let k = FiniteSubset::new(GroupModel::Zd(1), vec![z(&[0]), z(&[1])]);
    assert!(is_boundary_invariant(&e, &q(1, 2), &k).unwrap().holds);
    assert!(!is_boundary_invariant(&e, &q(1, 4), &k).unwrap().holds);
}

#[test]
fn condition_examples() {
    let e = interval(0, 8);
    let r = check_condition(&e, &InvarianceCondition::default()).unwrap();
    assert!(r.holds && !r.warnings.is_empty());
    let k = FiniteSubset::new(GroupModel::Zd(1), vec![z(&[0]), z(&[1])]);
    let single = InvarianceCondition::single(ClauseKind::Invariant, q(1, 8), k.clone()).unwrap();
    assert_eq!(check_condition(&e, &single).unwrap().holds, is_invariant(&e, &q(1, 8), &k).unwrap().holds);
    let two = InvarianceCondition::new(vec![
        Clause { kind: ClauseKind::Invariant, eps: q(1, 8), k: k.clone() },
        Clause { kind: ClauseKind::BoundaryInvariant, eps: q(1, 2), k: k.clone() },
    ])
    .unwrap();
    assert!(check_condition(&e, &two).unwrap().holds);
    let two_bad = InvarianceCondition::new(vec![
        Clause { kind: ClauseKind::Invariant, eps: q(1, 8), k: k.clone() },
        Clause { kind: ClauseKind::BoundaryInvariant, eps: q(1, 4), k },
    ])
    .unwrap();
    assert!(!check_condition(&e, &two_bad).unwrap().holds);
}

#[test]
fn folner_examples() {
    let s = Schedule::default();
    let m = GroupModel::Zd(1);
    assert_eq!(folner_set(m, 0, &s).unwrap(), interval(0, 1));
    assert_eq!(folner_set(m, 2, &s).unwrap().len(), 16);
    assert_eq!(folner_set(GroupModel::Zd(2), 1, &s).unwrap(), square(4));
    for model in [GroupModel::Heisenberg, GroupModel::Lamplighter] {
        let a = folner_set(model, 0, &s).unwrap();
        let b = folner_set(model, 1, &s).unwrap();
        assert!(a.is_subset(&b));
        assert_eq!(b.len() as u128, folner_size(model, 4));
    }
}

#[test]
fn word_balls() {
    assert_eq!(word_ball(GroupModel::Zd(2), 2).len(), 13);
    assert_eq!(word_ball(GroupModel::Lamplighter, 1).len(), 4);
    assert_eq!(word_ball(GroupModel::Heisenberg, 1).len(), 5);
}

#[test]
fn text_round_trip() {
    for model in [GroupModel::Zd(2), GroupModel::Heisenberg, GroupModel::Lamplighter] {
        let s = word_ball(model, 3);
        let t = write_subset(&s);
        assert_eq!(parse_subset(model, &t).unwrap(), s);
    }
    assert!(matches!(parse_subset(GroupModel::Zd(2), "1 2\n3\n"), Err(GroupError::Parse { line: 2, .. })));
    assert!(parse_subset(GroupModel::Lamplighter, "0 3 1\n").is_err());
}

#[test]
fn parse_rationals() {
    assert_eq!(parse_q("1/8"), Some(q(1, 8)));
    assert_eq!(parse_q("0.125"), Some(q(1, 8)));
    assert_eq!(parse_q("-2"), Some(q(-2, 1)));
    assert_eq!(parse_q("1/0"), None);
}

fn arb_model() -> impl Strategy<Value = GroupModel> {
    prop_oneof![Just(GroupModel::Zd(1)), Just(GroupModel::Zd(2)), Just(GroupModel::Heisenberg), Just(GroupModel::Lamplighter)]
}

fn arb_elem(m: GroupModel) -> BoxedStrategy<Elem> {
    match m {
        GroupModel::Zd(d) => proptest::collection::vec(-6i64..6, d).prop_map(|v| Elem::new(&v)).boxed(),
        GroupModel::Heisenberg => (-3i64..3, -3i64..3, -6i64..6).prop_map(|(a, b, c)| Elem::new(&[a, b, c])).boxed(),
        GroupModel::Lamplighter => (-3i64..3, proptest::collection::btree_set(-3i64..3, 0..4))
            .prop_map(|(t, s)| {
                let mut v = vec![t];
                v.extend(s);
                Elem::new(&v)
            })
            .boxed(),
    }
}

fn arb_set(m: GroupModel, max: usize) -> impl Strategy<Value = FiniteSubset> {
    proptest::collection::vec(arb_elem(m), 1..max).prop_map(move |v| FiniteSubset::new(m, v))
}

fn arb_pair() -> impl Strategy<Value = (FiniteSubset, FiniteSubset)> {
    arb_model().prop_flat_map(|m| (arb_set(m, 40), arb_set(m, 6)))
}

fn arb_triple() -> impl Strategy<Value = (FiniteSubset, FiniteSubset, FiniteSubset)> {
    arb_model().prop_flat_map(|m| (arb_set(m, 40), arb_set(m, 40), arb_set(m, 5)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn group_axioms((m, x, y, w) in arb_model().prop_flat_map(|m| (Just(m), arb_elem(m), arb_elem(m), arb_elem(m)))) {
        let id = m.identity();
        prop_assert_eq!(m.multiply(&m.multiply(&x, &y), &w), m.multiply(&x, &m.multiply(&y, &w)));
        prop_assert_eq!(m.multiply(&x, &m.inverse(&x)), id.clone());
        prop_assert_eq!(m.multiply(&m.inverse(&x), &x), id.clone());
        prop_assert_eq!(m.multiply(&x, &id), x.clone());
        prop_assert!(m.validate(&m.multiply(&x, &y)).is_ok());
    }

    #[test]
    fn product_matches_oracle((e, k) in arb_pair()) {
        let p = product_set(&e, &k).unwrap();
        let o = product_oracle(&e, &k);
        prop_assert_eq!(p.elems().to_vec(), o.into_iter().collect::<Vec<_>>());
        prop_assert!(p.len() <= e.len() * k.len());
        let g = e.elems()[0].clone();
        prop_assert_eq!(e.left_translate(&g).len(), e.len());
        prop_assert_eq!(e.right_translate(&g).len(), e.len());
    }

    #[test]
    fn boundary_two_ways((e, k) in arb_pair()) {
        prop_assert_eq!(boundary(&k, &e).unwrap(), boundary_by_definition(&k, &e).unwrap());
        let int = interior(&k, &e).unwrap();
        let cl = closure(&k, &e).unwrap();
        prop_assert!(int.is_subset(&e) && e.is_subset(&cl));
        let core = core_translates(&k, &e).unwrap();
        for x in &core {
            prop_assert!(k.left_translate(x).is_subset(&e));
        }
    }

    #[test]
    fn boundary_invariance_implies_invariance((e, k) in arb_pair(), num in 1i64..16) {
        let eps = q(num, 16);
        let ke = k.union(&FiniteSubset::identity_set(k.model()));
        if is_boundary_invariant(&e, &eps, &ke).unwrap().holds {
            prop_assert!(is_invariant(&e, &eps, &k).unwrap().holds);
        }
    }

    #[test]
    fn boundary_of_interior_difference((e, f, k) in arb_triple()) {
        let ie = interior(&k, &e).unwrap();
        let i_f = interior(&k, &f).unwrap();
        let lhs = boundary(&k, &ie.difference(&i_f)).unwrap();
        let rhs = boundary(&k, &ie).unwrap().union(&boundary(&k, &i_f).unwrap().intersection(&e));
        prop_assert!(lhs.is_subset(&rhs));
    }

    #[test]
    fn interior_invariance((e, k) in arb_pair(), num in 1i64..8) {
        let eps = q(num, 16);
        let kk = product_set(&k.inverse(), &k).unwrap();
        if is_boundary_invariant(&e, &eps, &kk).unwrap().holds {
            let int = interior(&k, &e).unwrap();
            if !int.is_empty() {
                let one = q(1, 1);
                let eps2 = &eps / (&one - &eps);
                prop_assert!(is_boundary_invariant(&int, &eps2, &k).unwrap().holds);
            }
        }
    }
}

#[test]
fn dense_and_hashed_paths_agree_on_large_z2() {
    // Box K uses prefix sums, the scattered K uses direct counting; both are
    // compared with the definition scan.
    let e = FiniteSubset::new(
        GroupModel::Zd(2),
        (0..30).flat_map(|x| (0..30).filter(move |y| (x * 7 + y * 3) % 5 != 0).map(move |y| z(&[x, y]))),
    );
    let kbox = FiniteSubset::new(GroupModel::Zd(2), (0..3).flat_map(|x| (0..2).map(move |y| z(&[x, y]))));
    let ksc = FiniteSubset::new(GroupModel::Zd(2), vec![z(&[0, 0]), z(&[2, -1]), z(&[-3, 1])]);
    for k in [kbox, ksc] {
        assert_eq!(boundary(&k, &e).unwrap(), boundary_by_definition(&k, &e).unwrap());
        assert_eq!(product_set(&e, &k).unwrap().len(), product_oracle(&e, &k).len());
        let ex = product_oracle(&e, &k).into_iter().filter(|x| !e.contains(x)).count();
        assert_eq!(excess(&e, &k).unwrap(), ex);
    }
}
