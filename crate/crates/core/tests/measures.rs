use proptest::prelude::*;
use skewshadow::measures::*;
use skewshadow::system::*;
use skewshadow::torus::*;

fn cat() -> ToralMatrix {
    ToralMatrix::new(1, 1, 2, 1).unwrap()
}

fn forced() -> SkewSystem {
    let f =
        Forcing { degrees: (0, 1), offset: [0.0, 0.0], terms: [vec![], vec![TrigTerm { k: 1, cos: 0.0, sin: 0.05 }]] };
    SkewSystem::new(cat(), f, GOLDEN, 64).unwrap()
}

fn unforced() -> SkewSystem {
    SkewSystem::new(cat(), Forcing::zero(), GOLDEN, 64).unwrap()
}

fn pt(x: f64, y: f64, w: f64) -> ProductPoint {
    ProductPoint::new(FiberPoint::new(x, y), Angle::new(w))
}

#[test]
fn bowen_metric_examples() {
    let sys = forced();
    let (p, q) = (pt(0.1, 0.2, 0.3), pt(0.4, 0.1, 0.9));
    assert_eq!(dn_metric(&sys, p, q, 1), product_dist(p, q));
    let hd = sys.hyper;
    let q = ProductPoint::new(p.fiber.translate([1e-3 * hd.e_u[0], 1e-3 * hd.e_u[1]]), p.base);
    let want = 1e-3 * (17.0 + 12.0 * 2f64.sqrt());
    assert!((want - 0.033_97).abs() < 1e-5);
    assert!((dn_metric(&sys, p, q, 5) - want).abs() < 1e-12);
}

#[test]
fn bowen_metric_on_equal_fibers_is_the_base_distance() {
    let sys = unforced();
    let (p, q) = (pt(0.1, 0.2, 0.3), pt(0.1, 0.2, 0.35));
    for n in [1, 5, 30] {
        assert!((dn_metric(&sys, p, q, n) - 0.05).abs() < 1e-12);
    }
}

#[test]
fn separated_count_small_cases() {
    let sys = forced();
    assert_eq!(max_separated_count(&sys, 3, 1.5, 2000, 1).unwrap(), 1);
    // Disjoint balls of radius 1/4 in the sum metric, each of volume 2π(1/4)³/3.
    let packing = 1.0 / (2.0 * std::f64::consts::PI * 0.25f64.powi(3) / 3.0);
    let c = max_separated_count(&sys, 1, 0.5, 20_000, 1).unwrap();
    assert!(c >= 2 && c as f64 <= packing, "count {c}, packing bound {packing}");
    assert!(max_separated_count(&sys, 0, 0.5, 10, 1).is_err());
    assert!(max_separated_count(&sys, 1, 0.0, 10, 1).is_err());
}

#[test]
fn separated_counts_grow_with_n() {
    let sys = forced();
    let c: Vec<usize> = (1..=4).map(|n| max_separated_count(&sys, n, 0.2, 20_000, 3).unwrap()).collect();
    for w in c.windows(2) {
        assert!(w[1] >= w[0], "{c:?}");
    }
    assert!(c[3] > c[0]);
}

#[test]
fn bowen_ball_mass_shrinks_in_n_and_grows_in_alpha() {
    let sys = forced();
    let m = |n, a| bowen_ball_mass(&sys, n, a, 20_000, 5).unwrap();
    assert!(m(1, 0.1) >= m(2, 0.1) && m(2, 0.1) >= m(4, 0.1));
    assert!(m(3, 0.05) <= m(3, 0.1) && m(3, 0.1) <= m(3, 0.2));
    let lam = (1.0 + 2f64.sqrt()).ln();
    let slope = (m(2, 0.1) / m(4, 0.1)).ln() / 2.0;
    assert!((slope - lam).abs() < 0.3 * lam, "slope {slope}");
}

#[test]
fn entropy_table_invariants() {
    let sys = forced();
    let r = entropy_estimate(&sys, &[1, 2, 3, 4, 5, 6], 0.1, 40_000, 2).unwrap();
    assert_eq!(r.h_ref, (1.0 + 2f64.sqrt()).ln());
    for w in r.rows.windows(2) {
        assert!(w[1].separated >= w[0].separated);
        assert!(w[1].close_pairs <= w[0].close_pairs);
    }
    let est = r.estimate.unwrap();
    assert!((est - r.h_ref).abs() < 0.25 * r.h_ref, "estimate {est}");
    assert!(entropy_estimate(&sys, &[], 0.1, 100, 2).is_err());
    let again = entropy_estimate(&sys, &[1, 2, 3, 4, 5, 6], 0.1, 40_000, 2).unwrap();
    assert_eq!(r, again);
}

#[test]
fn entropy_does_not_depend_on_the_forcing() {
    let ns: Vec<usize> = (1..=6).collect();
    let a = entropy_estimate(&forced(), &ns, 0.1, 40_000, 9).unwrap().estimate.unwrap();
    let b = entropy_estimate(&unforced(), &ns, 0.1, 40_000, 9).unwrap().estimate.unwrap();
    assert!(a / b < 2.0 && b / a < 2.0);
    assert!((a - b).abs() < 0.15, "{a} vs {b}");
}

#[test]
fn weyl_sums() {
    let sys = forced();
    let freqs = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 1, 1)];
    let r = weyl_test(&sys, &freqs, 1_000_000, pt(0.1234, 0.5678, 0.1)).unwrap();
    assert_eq!(r.modulus((0, 0, 0)), Some(1.0));
    assert!(r.modulus((1, 0, 0)).unwrap() <= 1e-3);
    assert!(r.modulus((0, 1, 0)).unwrap() <= 1e-2);
    assert!(r.modulus((0, 1, 1)).unwrap() <= 1e-2);
    for row in &r.rows {
        assert_eq!(row.decay.iter().map(|d| d.0).collect::<Vec<_>>(), vec![10, 100, 1000, 10_000, 100_000, 1_000_000]);
        assert!(row.decay.iter().all(|d| d.1 <= 1.0 + 1e-12));
    }
    let other = weyl_test(&sys, &freqs, 1_000_000, pt(0.9, 0.05, 0.7)).unwrap();
    assert!(other.modulus((1, 0, 0)).unwrap() <= 1e-2);
    assert!(other.modulus((0, 1, 0)).unwrap() <= 1e-1);
    assert!(weyl_test(&sys, &freqs, 0, pt(0.0, 0.0, 0.0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bowen_metric_axioms(a in prop::array::uniform3(0.0..1.0f64), b in prop::array::uniform3(0.0..1.0f64), c in prop::array::uniform3(0.0..1.0f64), n in 1usize..8) {
        let sys = forced();
        let (p, q, r) = (pt(a[0], a[1], a[2]), pt(b[0], b[1], b[2]), pt(c[0], c[1], c[2]));
        let d = |x, y| dn_metric(&sys, x, y, n);
        prop_assert_eq!(d(p, p), 0.0);
        prop_assert!((d(p, q) - d(q, p)).abs() < 1e-12);
        prop_assert!(d(p, r) <= d(p, q) + d(q, r) + 1e-12);
        prop_assert!(dn_metric(&sys, p, q, n + 1) >= d(p, q));
    }
}
