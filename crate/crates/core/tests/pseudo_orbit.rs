use std::collections::BTreeMap;

use proptest::prelude::*;
use skewshadow::pseudo_orbit::*;
use skewshadow::structures::{capture_separated_family, CaptureOptions, GraphFunction, GraphKind, SymbolWord};
use skewshadow::system::*;
use skewshadow::torus::*;
use skewshadow::Error;

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

fn smooth_graph() -> GraphFunction {
    GraphFunction::new(GraphKind::Input, 64, |w| {
        let t = std::f64::consts::TAU * w.value();
        Ok(FiberPoint::new(0.3 + 0.1 * t.sin(), 0.6 + 0.05 * t.cos()))
    })
}

#[test]
fn partition_basics() {
    let xi = BasePartition::uniform(5);
    assert_eq!(xi.p(), 5);
    assert!((xi.diam() - 0.2).abs() < 1e-15);
    for k in 0..1000 {
        let w = Angle::new(k as f64 / 1000.0);
        let (l, r) = xi.arc(xi.lookup(w));
        assert!(w.value() >= l && w.value() < r);
    }
    let cut = BasePartition::from_cuts(vec![0.0, 0.1, 0.7, 1.0]).unwrap();
    assert_eq!(cut.p(), 3);
    assert!((cut.diam() - 0.6).abs() < 1e-15);
    assert!(BasePartition::from_cuts(vec![0.0, 0.3, 0.3, 1.0]).is_err());
}

#[test]
fn return_structure_trivial_partition() {
    let sys = forced();
    let g = GraphFunction::constant(FiberPoint::new(0.3, 0.7), 64);
    let xi = BasePartition::uniform(1);
    let rs = find_return_structure(&sys, &g, &xi, 0.3, 1000).unwrap();
    assert!(rs.m >= 1);
    let a = &rs.anchors[0];
    assert!(a.start_offset <= 0.15 && a.end_error <= 0.15);
    // Short returns can be checked by direct iteration as well.
    if rs.m <= 20 {
        let end = cocycle_iterate(&sys, a.point, rs.m as i64);
        assert!(fiber_dist(end.fiber, a.segment[rs.m]) < 1e-9);
    }
    assert!(rs.max_residual <= 1e-12);
    assert!(segment_residual(&sys, a.point.base, &a.segment) <= 1e-12);
}

#[test]
fn return_structure_refined_partition_stays_in_strips() {
    let sys = forced();
    let g = smooth_graph();
    let xi = BasePartition::uniform(8);
    let rs = find_return_structure(&sys, &g, &xi, 0.05, 10_000).unwrap();
    for (i, a) in rs.anchors.iter().enumerate() {
        assert_eq!(xi.lookup(a.point.base), i);
        assert_eq!(xi.lookup(sys.base_at(a.point.base, rs.m as i64)), i);
        assert!(fiber_dist(a.point.fiber, g.eval(a.point.base).unwrap()) <= 0.025);
        assert!(a.end_error <= 0.025);
    }
}

#[test]
fn return_structure_huge_delta_and_zero_budget() {
    let sys = forced();
    let g = GraphFunction::constant(FiberPoint::new(0.3, 0.7), 64);
    let xi = BasePartition::uniform(3);
    assert_eq!(find_return_structure(&sys, &g, &xi, 2.0, 10).unwrap().m, 1);
    assert!(matches!(find_return_structure(&sys, &g, &xi, 0.3, 0), Err(Error::BudgetExhausted(_))));
}

#[test]
fn periodic_orbit_of_zero_section() {
    let sys = unforced();
    let g = GraphFunction::constant(FiberPoint::new(0.0, 0.0), 64);
    let xi = BasePartition::uniform(4);
    let rs = find_return_structure(&sys, &g, &xi, 0.1, 1000).unwrap();
    let mut po = build_periodic_pseudo_orbit(&sys, &g, &rs, Angle::new(0.37), 3).unwrap();
    assert_eq!(po.i_min, -3 * rs.m as i64);
    assert!(po.points.iter().all(|p| *p == FiberPoint::new(0.0, 0.0)));
    assert_eq!(measure_defect(&sys, &mut po), 0.0);
}

#[test]
fn periodic_orbit_has_graph_at_block_starts_and_shift_compatibility() {
    let sys = forced();
    let g = smooth_graph();
    let xi = BasePartition::uniform(8);
    let rs = find_return_structure(&sys, &g, &xi, 0.05, 10_000).unwrap();
    let m = rs.m as i64;
    let v = Angle::new(0.123);
    let po = build_periodic_pseudo_orbit(&sys, &g, &rs, v, 3).unwrap();
    for l in -3..=3 {
        assert_eq!(po.get(l * m), g.eval(sys.base_at(v, l * m)).unwrap());
    }
    let shifted = build_periodic_pseudo_orbit(&sys, &g, &rs, sys.base_at(v, m), 3).unwrap();
    for j in -2 * m..=2 * m {
        assert!(fiber_dist(po.get(j + m), shifted.get(j)) < 1e-12, "index {j}");
    }
    let constant = GraphFunction::constant(FiberPoint::new(0.3, 0.7), 64);
    let rs = find_return_structure(&sys, &constant, &xi, 0.05, 10_000).unwrap();
    let m = rs.m as i64;
    let a = build_periodic_pseudo_orbit(&sys, &constant, &rs, v, 2).unwrap();
    let b = build_periodic_pseudo_orbit(&sys, &constant, &rs, sys.base_at(v, m), 2).unwrap();
    for j in -m..=m {
        assert_eq!(a.get(j + m), b.get(j));
    }
    assert!(build_periodic_pseudo_orbit(&sys, &constant, &rs, v, 0).is_err());
}

#[test]
fn refinement_does_not_increase_defect() {
    let sys = forced();
    let g = smooth_graph();
    let mut prev = f64::INFINITY;
    for (p, delta) in [(4, 0.1), (16, 0.025), (64, 0.00625)] {
        let xi = BasePartition::uniform(p);
        let rs = find_return_structure(&sys, &g, &xi, delta, 100_000).unwrap();
        let worst = (0..16)
            .map(|k| {
                let mut po = build_periodic_pseudo_orbit(&sys, &g, &rs, Angle::new(k as f64 / 16.0), 2).unwrap();
                measure_defect(&sys, &mut po)
            })
            .fold(0.0, f64::max);
        assert!(worst <= prev * 1.0001, "p = {p}: {worst} after {prev}");
        prev = worst;
    }
}

#[test]
fn measure_defect_examples() {
    let sys = forced();
    let p = ProductPoint::new(FiberPoint::new(0.2, 0.4), Angle::new(0.6));
    let mut po = PseudoOrbit::true_orbit(&sys, p, -10, 10);
    assert!(measure_defect(&sys, &mut po) < 1e-15);
    assert!(po.defect.unwrap() < 1e-15);
    let moved = po.get(3).translate([0.01, 0.0]);
    po.set(3, moved);
    let d = measure_defect(&sys, &mut po);
    let per_index: Vec<f64> =
        (-10..10).map(|j| fiber_dist(fiber_map(&sys, sys.base_at(po.base, j), po.get(j)), po.get(j + 1))).collect();
    let hit: Vec<i64> = (-10..10).filter(|&j| per_index[(j + 10) as usize] > 1e-12).collect();
    assert_eq!(hit, vec![2, 3]);
    assert!((per_index[12] - 0.01).abs() < 1e-12);
    // A(0.01, 0) = (0.01, 0.02).
    assert!((per_index[13] - 0.0005f64.sqrt()).abs() < 1e-12);
    assert!(d >= 0.01 / 2f64.sqrt());
    let mut one = PseudoOrbit::new(Angle::new(0.0), 0, vec![FiberPoint::new(0.1, 0.1)]);
    assert_eq!(measure_defect(&sys, &mut one), 0.0);
}

#[test]
fn hitting_schedule_full_circle() {
    let sys = forced();
    let hs = build_hitting_schedule(&sys, (0.0, 1.0), 5, 16, 6).unwrap();
    assert_eq!(hs.k_cov, 1);
    for ts in &hs.times {
        assert_eq!(ts, &vec![5, 10, 15, 20, 25, 30]);
    }
}

#[test]
fn hitting_schedule_small_arc() {
    let sys = forced();
    let hs = build_hitting_schedule(&sys, (0.0, 0.1), 1, 256, 30).unwrap();
    assert!(hs.k_cov <= 13, "k_cov = {}", hs.k_cov);
    let mut observed = 0;
    for (w, ts) in hs.grid.iter().zip(&hs.times) {
        let mut prev = 0;
        for &t in ts {
            assert!(t - prev > 0 && t - prev < hs.k() as i64);
            observed = observed.max(t - prev);
            assert!(sys.base_at(*w, t).value() < 0.1);
            for j in prev + 1..t {
                assert!(sys.base_at(*w, j).value() >= 0.1);
            }
            prev = t;
        }
    }
    assert!(observed as usize <= hs.k_cov);
    assert!(build_hitting_schedule(&sys, (0.3, 0.3), 1, 8, 3).is_err());
}

#[test]
fn hitting_schedule_blocks() {
    let sys = forced();
    let hs = build_hitting_schedule(&sys, (0.2, 0.35), 7, 64, 20).unwrap();
    for (w, ts) in hs.grid.iter().zip(&hs.times) {
        let mut prev = 0;
        for &t in ts {
            assert_eq!(t % 7, 0);
            assert!(t - prev < (7 * hs.k1) as i64);
            let v = sys.base_at(*w, t).value();
            assert!((0.2..0.35).contains(&v));
            prev = t;
        }
    }
}

#[test]
fn horseshoe_orbits_are_local_in_the_word() {
    let sys = unforced();
    let fam = capture_separated_family(&sys, &BasePartition::uniform(1), &CaptureOptions::default()).unwrap();
    let n = fam.n as i64;
    let w = Angle::new(0.41);
    let ones = SymbolWord::ones(fam.k);
    let a = build_horseshoe_pseudo_orbit(&sys, &fam, &ones, w, 2).unwrap();
    let b = build_horseshoe_pseudo_orbit(&sys, &fam, &ones, w, 2).unwrap();
    assert_eq!(a, b);
    let changed = ones.with(1, 5);
    let c = build_horseshoe_pseudo_orbit(&sys, &fam, &changed, w, 2).unwrap();
    for j in -2 * n..=2 * n {
        if j > n && j < 2 * n {
            assert_ne!(a.get(j), c.get(j));
        } else {
            assert_eq!(a.get(j), c.get(j), "index {j}");
        }
    }
    for j in (-2..=2).map(|l| l * n) {
        assert_eq!(a.get(j), fam.x0);
    }
    let mut c = c;
    assert!(measure_defect(&sys, &mut c) < fam.alpha / 8.0);
    let too_big = SymbolWord::ones(fam.k + 1);
    assert!(build_horseshoe_pseudo_orbit(&sys, &fam, &too_big, w, 2).is_err());
}

#[test]
fn horseshoe_orbits_shift_with_the_word() {
    let sys = unforced();
    let fam = capture_separated_family(&sys, &BasePartition::uniform(1), &CaptureOptions::default()).unwrap();
    let n = fam.n as i64;
    let entries: BTreeMap<i64, u64> = [(-2, 7), (-1, 3), (0, 11), (1, 2), (2, 4)].into_iter().collect();
    let word = SymbolWord::new(fam.k, entries).unwrap();
    let w = Angle::new(0.77);
    let a = build_horseshoe_pseudo_orbit(&sys, &fam, &word, w, 3).unwrap();
    let b = build_horseshoe_pseudo_orbit(&sys, &fam, &word.shift(), sys.base_at(w, n), 3).unwrap();
    for j in -2 * n..=2 * n {
        assert_eq!(a.get(j + n), b.get(j), "index {j}");
    }
}

#[test]
fn weak_orbit_is_exact_on_the_past() {
    let sys = unforced();
    let fam = capture_separated_family(&sys, &BasePartition::uniform(1), &CaptureOptions::default()).unwrap();
    let n = fam.n as i64;
    let w = Angle::new(0.05);
    let times = schedule_times(&sys, (0.0, 0.1), fam.n, w, 4, 1000).unwrap();
    let right = (times[3] / n + 1) as usize;
    let mut po = build_weak_horseshoe_pseudo_orbit(&sys, &fam, &times, &[1, 2, 2, 1], w, 2, right).unwrap();
    assert_eq!(po.i_min, -2 * n);
    assert_eq!(po.i_max(), right as i64 * n);
    let mut past = PseudoOrbit::new(w, po.i_min, po.points[..=(2 * n) as usize].to_vec());
    assert!(measure_defect(&sys, &mut past) < 1e-12);
    assert_eq!(po.get(0), fam.x0);
    for l in 1..=right as i64 {
        assert_eq!(po.get(l * n), fam.x0);
    }
    for (i, &t) in times.iter().enumerate() {
        let sym = [1u64, 2, 2, 1][i];
        assert_eq!(po.get(t + 1), fam.segment(0, sym - 1)[1]);
    }
    assert!(measure_defect(&sys, &mut po) < fam.alpha / 8.0);
    assert!(build_weak_horseshoe_pseudo_orbit(&sys, &fam, &times, &[1, 3, 1, 1], w, 2, right).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn schedule_gaps_are_bounded(n in 1usize..12, l in 0.0..0.9f64, width in 0.05..0.5f64) {
        let sys = forced();
        let arc = (l, l + width);
        let hs = build_hitting_schedule(&sys, arc, n, 16, 8).unwrap();
        for ts in &hs.times {
            let mut prev = 0;
            for &t in ts {
                prop_assert!(t - prev > 0 && t - prev < hs.k() as i64);
                prev = t;
            }
        }
    }
}
