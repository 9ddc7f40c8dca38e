mod common;

use std::collections::{BTreeSet, HashSet};

use galcoh::curves::{bundled_curve, CurvePoint, FpCurve};
use galcoh::enumerate::{all_subgroup_classes, enumerate_subgroup_classes, EnumerateOptions};
use galcoh::lift::{lift_classes, LiftOptions};
use galcoh::matgroup::{canonical_key, closure_from_mats, general_linear, mat_conj, mat_mul, Mat2, MatGroup};
use galcoh::modarith::RingSpec;
use galcoh::report::{FlatRow, TableRow};
use proptest::prelude::*;

fn check(r: common::Check) {
    if let Err(e) = r {
        panic!("{e}");
    }
}

#[test]
fn cocycle_identity_on_representatives() {
    let mut rows = common::rows(2, false);
    rows.extend(common::rows(3, false));
    check(common::cocycle_identity(&rows));
}

#[test]
fn h1_matches_cyclic_formula() {
    let mut rows = common::rows(2, false);
    rows.extend(common::rows(3, false));
    check(common::cyclic_agreement(&rows));
}

#[test]
fn h1_matches_brute_force() {
    let mut rows = common::rows(2, false);
    rows.extend(common::rows(3, false));
    check(common::oracle_agreement(&rows));
}

#[test]
fn homothety_forces_vanishing() {
    check(common::homothety_vanishing(&common::rows(3, false)));
}

#[test]
fn hasse_and_group_structure() {
    check(common::hasse_and_structure(1000, 7));
}

#[test]
fn oracle_sees_unipotent_and_kernel() {
    // (1,*;0,1) mod 3 and the trivial group on (Z/4)^2
    let unipotent = [[1, 0, 0, 1], [1, 1, 0, 1], [1, 2, 0, 1]];
    assert_eq!(common::brute_force_h1(3, 3, &unipotent), vec![3]);
    assert_eq!(common::brute_force_h1(4, 2, &[[1, 0, 0, 1]]), Vec::<u64>::new());
    assert_eq!(common::brute_force_h1(4, 2, &[[1, 0, 0, 1], [3, 0, 0, 3]]), vec![2, 2]);
}

/// Conjugacy classes of all subgroups, found by adding one element at a time
/// starting from the trivial group.
fn brute_force_classes(ambient: &MatGroup) -> usize {
    let r = ambient.ring();
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut todo: Vec<MatGroup> = vec![closure_from_mats(r, &[]).unwrap()];
    seen.insert(todo[0].sorted_codes());
    while let Some(h) = todo.pop() {
        for x in ambient.elements() {
            if h.contains(x) {
                continue;
            }
            let mut gens = h.generators().to_vec();
            gens.push(*x);
            let k = closure_from_mats(r, &gens).unwrap();
            if seen.insert(k.sorted_codes()) {
                todo.push(k);
            }
        }
    }
    // orbits under conjugation
    let mut classes: BTreeSet<Vec<u64>> = BTreeSet::new();
    let all: Vec<Vec<u64>> = seen.into_iter().collect();
    let lookup: HashSet<&Vec<u64>> = all.iter().collect();
    let mut done: HashSet<Vec<u64>> = HashSet::new();
    for codes in &all {
        if done.contains(codes) {
            continue;
        }
        let h = group_from_codes(r, codes);
        let mut orbit = Vec::new();
        for g in ambient.elements() {
            let conj: Vec<Mat2> = h.elements().iter().map(|x| mat_conj(r, g, x)).collect();
            let c = closure_from_mats(r, &conj).unwrap().sorted_codes();
            assert!(lookup.contains(&c));
            orbit.push(c);
        }
        classes.insert(orbit.iter().min().unwrap().clone());
        done.extend(orbit);
    }
    classes.len()
}

fn group_from_codes(r: RingSpec, codes: &[u64]) -> MatGroup {
    let m = r.modulus() as u64;
    let mats: Vec<Mat2> = codes
        .iter()
        .map(|&c| {
            let mut out = [0u32; 4];
            let mut c = c;
            for slot in out.iter_mut().rev() {
                *slot = (c % m) as u32;
                c /= m;
            }
            out
        })
        .collect();
    closure_from_mats(r, &mats).unwrap()
}

#[test]
fn enumeration_matches_brute_force_on_small_ambients() {
    for (p, e) in [(2, 1), (3, 1), (2, 2)] {
        let gl = general_linear(RingSpec::new(p, e).unwrap());
        let fast = all_subgroup_classes(&gl, false).unwrap().len();
        assert_eq!(fast, brute_force_classes(&gl), "GL2(Z/{p}^{e})");
    }
}

#[test]
fn lifting_matches_direct_enumeration() {
    for (p, count) in [(2u32, 43usize), (3, 100)] {
        let r2 = RingSpec::new(p, 2).unwrap();
        let gl2 = general_linear(r2);
        let direct: BTreeSet<Vec<u64>> = enumerate_subgroup_classes(&gl2, EnumerateOptions { surjective_det: true, best_effort: false })
            .unwrap()
            .into_iter()
            .map(|c| c.canonical_key)
            .collect();
        let images: Vec<MatGroup> = all_subgroup_classes(&general_linear(r2.with_level(1)), false)
            .unwrap()
            .into_iter()
            .filter(|g| g.det_surjective())
            .collect();
        let lifted: BTreeSet<Vec<u64>> = lift_classes(&images, LiftOptions { surjective_det: true, kernel_dim: None })
            .unwrap()
            .iter()
            .map(|c| canonical_key(&gl2, &c.group()))
            .collect();
        assert_eq!(direct.len(), count);
        assert_eq!(direct, lifted, "p={p}");
    }
}

#[test]
fn table_rows_survive_json_and_flat_round_trips() {
    let mut rows = common::rows(2, true);
    rows.extend(common::rows(3, false));
    for row in &rows {
        let json = serde_json::to_string(row).unwrap();
        assert_eq!(&serde_json::from_str::<TableRow>(&json).unwrap(), row);
        let flat = FlatRow::from(row);
        assert_eq!(&TableRow::try_from(flat).unwrap(), row);
    }
}

#[test]
fn rational_group_law_is_associative() {
    let facts = bundled_curve("243a2").unwrap();
    let c = facts.curve();
    let p: CurvePoint = "(-2,3)".parse().unwrap();
    let pts: Vec<CurvePoint> = (-3..=3).map(|k| c.mul(k, &p)).collect();
    for a in &pts {
        for b in &pts {
            assert_eq!(c.add(a, b), c.add(b, a));
            for d in &pts {
                assert_eq!(c.add(&c.add(a, b), d), c.add(a, &c.add(b, d)));
            }
        }
    }
    assert_eq!(c.add(&c.mul(2, &p), &c.mul(-2, &p)), CurvePoint::Infinity);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fp_group_law_is_associative(a in prop::array::uniform5(-20i64..20), idx in 0usize..8, picks in prop::array::uniform3(0usize..1000)) {
        let ell = [5u64, 7, 11, 13, 17, 19, 23, 29][idx];
        let Ok(c) = FpCurve::new(ell, a) else { return Ok(()) };
        let pts = c.points();
        let [x, y, z] = picks.map(|i| pts[i % pts.len()]);
        prop_assert_eq!(c.add(&c.add(&x, &y), &z), c.add(&x, &c.add(&y, &z)));
        prop_assert_eq!(c.add(&x, &y), c.add(&y, &x));
        prop_assert_eq!(c.add(&x, &c.neg(&x)), None);
        prop_assert_eq!(c.mul(pts.len() as u64, &x), None);
    }

    #[test]
    fn matrix_product_is_associative(x in prop::array::uniform4(0u32..9), y in prop::array::uniform4(0u32..9), z in prop::array::uniform4(0u32..9)) {
        let r = RingSpec::new(3, 2).unwrap();
        prop_assert_eq!(mat_mul(r, &mat_mul(r, &x, &y), &z), mat_mul(r, &x, &mat_mul(r, &y, &z)));
    }
}
