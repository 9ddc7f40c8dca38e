use galcoh::classifier::{classify_mod_p, classify_p_power, cross_check_with_cohomology, h2_verdict, Case, Vanishing};
use galcoh::curves::{
    bundled_curve, bundled_curves, descent5_labels, fetch_curve, frobenius_congruence_filter, load_curve_facts,
    locally_divisible, parse_rational, primes_below, scan_divisibility, trace_pair_scan, CurveError, CurvePoint,
    FetchConfig, SignMode,
};
use galcoh::matgroup::structural_predicates;
use galcoh::report::{table, TableOptions};

fn ints(a: &[i64]) -> Vec<num_rational::BigRational> {
    a.iter().map(|&x| parse_rational(&x.to_string()).unwrap()).collect()
}

#[test]
fn bundled_models() {
    assert_eq!(bundled_curve("121c2").unwrap().a_invariants.to_vec(), ints(&[1, 1, 0, -3632, 82757]));
    let e = bundled_curve("243a2").unwrap();
    assert_eq!(e.a_invariants.to_vec(), ints(&[0, 0, 1, 0, 20]));
    let g = e.generators.as_ref().unwrap();
    assert_eq!(CurvePoint::Affine(g[0].clone()), "(-2,3)".parse().unwrap());
    for label in ["121b1", "121c1", "11a1", "11a2", "11a3", "722a1", "972d2", "9747f1", "49a1"] {
        assert!(bundled_curve(label).is_some(), "{label}");
    }
    assert_eq!(descent5_labels().len(), 42);
}

#[test]
fn schema_errors_carry_the_record_index() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("facts.jsonl");
    let good = serde_json::to_string(&bundled_curve("11a1").unwrap()).unwrap();
    let singular = good.replace("\"-10\"", "\"0\"").replace("\"-20\"", "\"0\"").replace("\"-1\"", "\"0\"").replace("\"1\"", "\"0\"");
    std::fs::write(&path, format!("# comment\n{good}\n\n{singular}\n")).unwrap();
    match load_curve_facts(&path) {
        Err(CurveError::Schema { index, .. }) => assert_eq!(index, 3),
        other => panic!("{other:?}"),
    }
    std::fs::write(&path, format!("{good}\n")).unwrap();
    assert_eq!(load_curve_facts(&path).unwrap().len(), 1);
}

#[test]
fn fetch_uses_cache_then_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = FetchConfig { base_url: Some("http://127.0.0.1:9".into()), cache_dir: Some(dir.path().into()), use_cache: true };
    let e = fetch_curve("243a2", &cfg).unwrap();
    assert_eq!(e.label, "243a2");
    // a cached record wins over the fixture
    let mut cached = bundled_curve("11a1").unwrap();
    cached.label = "zz1".into();
    std::fs::create_dir_all(dir.path().join("curves")).unwrap();
    std::fs::write(dir.path().join("curves/zz1.json"), serde_json::to_string(&cached).unwrap()).unwrap();
    assert_eq!(fetch_curve("zz1", &cfg).unwrap(), cached);
    assert!(fetch_curve("zz2", &cfg).is_err());
}

#[test]
fn level_one_examples() {
    let v = classify_mod_p(&bundled_curve("121c2").unwrap(), 11).unwrap();
    assert_eq!((v.vanishing, v.h_size), (Vanishing::Nonvanishing, Some(11)));
    assert_eq!(classify_mod_p(&bundled_curve("121c1").unwrap(), 11).unwrap().vanishing, Vanishing::Vanishing);
    assert_eq!(classify_mod_p(&bundled_curve("11a3").unwrap(), 5).unwrap().vanishing, Vanishing::Vanishing);
    let v = classify_mod_p(&bundled_curve("243a2").unwrap(), 3).unwrap();
    assert_eq!((v.vanishing, v.case), (Vanishing::Nonvanishing, Case::P3RationalTorsion));
    assert_eq!(classify_mod_p(&bundled_curve("37a1").unwrap(), 5).unwrap().case, Case::NoPIsogeny);
}

#[test]
fn prime_power_examples() {
    let v = classify_p_power(&bundled_curve("11a1").unwrap(), 5).unwrap();
    assert_eq!(v.vanishing, Vanishing::Nonvanishing);
    assert_eq!(classify_p_power(&bundled_curve("121c2").unwrap(), 11).unwrap().vanishing, Vanishing::Nonvanishing);
    let twist = bundled_curves().into_iter().find(|c| c.label == "49a1-tw-4").unwrap();
    let v = classify_p_power(&twist, 7).unwrap();
    assert_eq!((v.vanishing, v.case), (Vanishing::Vanishing, Case::Conductor49Twist));
    for label in ["11a1", "11a2", "11a3"] {
        let v = classify_p_power(&bundled_curve(label).unwrap(), 5).unwrap();
        assert_eq!(v.vanishing, Vanishing::Nonvanishing, "{label}");
    }
}

#[test]
fn cross_checks_at_level_one() {
    for (label, p, h1) in [("121c2", 11, vec![11]), ("243a2", 3, vec![3]), ("121c1", 11, vec![])] {
        let c = cross_check_with_cohomology(&bundled_curve(label).unwrap(), p, 1).unwrap();
        assert_eq!(c.h1, Some(h1), "{label}");
        assert_eq!(c.agrees, Some(true), "{label}");
    }
}

#[test]
fn level_two_cross_checks() {
    let c = cross_check_with_cohomology(&bundled_curve("11a1").unwrap(), 5, 2).unwrap();
    assert_eq!((c.h1, c.agrees), (Some(vec![5, 5]), Some(true)));
    let c = cross_check_with_cohomology(&bundled_curve("11a3").unwrap(), 5, 2).unwrap();
    assert_eq!((c.h1, c.agrees), (Some(vec![5]), Some(true)));
    // the greatest-possible-below-a-25-isogeny group for 11a2 has trivial H^1
    let c = cross_check_with_cohomology(&bundled_curve("11a2").unwrap(), 5, 2).unwrap();
    assert_eq!(c.verdict.case, Case::P5ChainMiddleTorsion);
    assert_eq!((c.h1.clone(), c.agrees), (Some(vec![]), Some(false)));
    assert!(c.failed());
}

#[test]
fn h2_examples() {
    // 11a2 has no rational 5-torsion but its 5-neighbour 11a1 does
    assert_eq!(h2_verdict(&bundled_curve("11a2").unwrap(), 5).unwrap().vanishing, Vanishing::Nonvanishing);
    assert_eq!(h2_verdict(&bundled_curve("11a1").unwrap(), 5).unwrap().vanishing, Vanishing::Vanishing);
    assert_eq!(h2_verdict(&bundled_curve("37a1").unwrap(), 5).unwrap().vanishing, Vanishing::Vanishing);
}

#[test]
fn torsion_point_satisfies_split_congruence() {
    let e = bundled_curve("11a1").unwrap();
    let r = frobenius_congruence_filter(&e, 5, (0, 1), &primes_below(500), SignMode::Exact).unwrap();
    assert!(r.pass);
    let r = frobenius_congruence_filter(&e, 5, (2, 3), &primes_below(500), SignMode::Exact).unwrap();
    assert!(!r.pass);
}

#[test]
fn divisibility_examples() {
    let e = bundled_curve("243a2").unwrap();
    let p: CurvePoint = "(-2,3)".parse().unwrap();
    let q = e.curve().mul(3, &p);
    for ell in primes_below(1000) {
        if ell != 3 && (ell % 9 == 1 || ell % 9 == 8) {
            assert!(locally_divisible(&e, &q, 9, ell).unwrap().is_divisible(), "{ell}");
        }
    }
    let s = scan_divisibility(&e, &p, 3, 27, 1000).unwrap();
    assert!(!s.failures.is_empty());
    let s = scan_divisibility(&e, &p, 1, 1, 200).unwrap();
    assert!(s.primes.iter().all(|r| r.result.is_divisible()));
    assert!(matches!(scan_divisibility(&e, &"(1,1)".parse().unwrap(), 1, 9, 100), Err(CurveError::NotOnCurve)));
}

/// The scanned `(a_ℓ, ℓ)` pairs fit inside the `(trace, det)` pairs of some
/// class of `G_2 ≤ GL_2(Z/9)` of the stated order.
fn fits_class_of_order(label: &str, skip: &[u64], order: usize) -> bool {
    let pairs = trace_pair_scan(&bundled_curve(label).unwrap(), 3, 2, 1000, skip).unwrap();
    assert!(pairs.iter().all(|&(_, l)| l % 3 != 0));
    let rows = table(3, 2, &TableOptions::default()).unwrap();
    rows.iter().filter(|r| r.order == order).any(|r| {
        let g = galcoh::matgroup::closure_from_mats(galcoh::modarith::RingSpec::new(3, 2).unwrap(), &r.generators).unwrap();
        let td = structural_predicates(&g).trace_det_pairs;
        pairs.iter().all(|&(a, l)| td.contains(&(a as u32, l as u32)))
    })
}

#[test]
fn trace_pairs_fit_small_images() {
    assert!(fits_class_of_order("243a2", &[], 54));
    assert!(fits_class_of_order("722a1", &[19], 162));
}
