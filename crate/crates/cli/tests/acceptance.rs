//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the libtest
//! harness so every criterion reports even when an earlier one fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skewshadow::measures::{entropy_estimate, weyl_test};
use skewshadow::pseudo_orbit::{BasePartition, PseudoOrbit};
use skewshadow::shadowing::{shadow_affine, shadow_fixed_point};
use skewshadow::structures::*;
use skewshadow::system::{fiber_map, uniform_grid, Forcing, SkewSystem, ToralMatrix, TrigTerm, GOLDEN};
use skewshadow::torus::{fiber_dist, Angle, FiberPoint, ProductPoint};

type Check = Result<String, String>;
type Criterion = fn() -> Check;

fn ensure(ok: bool, msg: String) -> Check {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn cat() -> ToralMatrix {
    ToralMatrix::new(1, 1, 2, 1).unwrap()
}

fn forced(grid: usize) -> SkewSystem {
    let f =
        Forcing { degrees: (0, 1), offset: [0.0, 0.0], terms: [vec![], vec![TrigTerm { k: 1, cos: 0.0, sin: 0.05 }]] };
    SkewSystem::new(cat(), f, GOLDEN, grid).unwrap()
}

fn unforced(grid: usize) -> SkewSystem {
    SkewSystem::new(cat(), Forcing::zero(), GOLDEN, grid).unwrap()
}

/// The periodic graph of criterion 3, shared with criteria 4 and 9.
fn periodic_point() -> &'static PeriodicPoint {
    static P: OnceLock<PeriodicPoint> = OnceLock::new();
    P.get_or_init(|| {
        let sys = forced(2048);
        let g = GraphFunction::constant(FiberPoint::new(0.3, 0.7), 2048);
        find_random_periodic_point(&sys, &g, 0.05, &PeriodicOptions::default()).expect("periodic point")
    })
}

fn embedding() -> &'static Arc<HorseshoeEmbedding> {
    static E: OnceLock<Arc<HorseshoeEmbedding>> = OnceLock::new();
    E.get_or_init(|| {
        let sys = unforced(64);
        let opts = CaptureOptions { gamma: 0.3, alpha: 0.05, ..CaptureOptions::default() };
        let fam = capture_separated_family(&sys, &BasePartition::uniform(1), &opts).expect("family");
        Arc::new(build_horseshoe(&sys, fam, &HorseshoeOptions::default()).expect("embedding"))
    })
}

fn splitting() -> Check {
    let a = forced(8).hyper.lambda0;
    let b = SkewSystem::new(ToralMatrix::new(2, 1, 1, 1).unwrap(), Forcing::zero(), GOLDEN, 8).unwrap().hyper.lambda0;
    let (ra, rb) = (std::f64::consts::SQRT_2.ln_1p(), ((3.0 + 5f64.sqrt()) / 2.0).ln());
    let (ea, eb) = ((a - ra).abs(), (b - rb).abs());
    ensure(ea <= 1e-12 && eb <= 1e-12, format!("lambda0 errors {ea:.1e} and {eb:.1e}"))
}

fn shadowing_oracle() -> Check {
    let sys = forced(64);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_gap, mut worst_res) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let w = Angle::new(rng.gen());
        let mut pts = vec![FiberPoint::new(rng.gen(), rng.gen())];
        for j in -64..64 {
            let r = 1e-3 * rng.gen::<f64>();
            let t = std::f64::consts::TAU * rng.gen::<f64>();
            let f = fiber_map(&sys, sys.base_at(w, j), *pts.last().unwrap());
            pts.push(f.translate([r * t.cos(), r * t.sin()]));
        }
        let po = PseudoOrbit::new(w, -64, pts);
        let a = shadow_affine(&sys, &po, 1e-13).map_err(|e| format!("affine: {e}"))?;
        let b = shadow_fixed_point(&sys, &po, 1e-14, 500).map_err(|e| format!("fixed point: {e}"))?;
        for (p, q) in a.points.iter().zip(&b.points) {
            worst_gap = worst_gap.max(fiber_dist(*p, *q));
        }
        worst_res = worst_res.max(a.residual).max(b.residual);
    }
    ensure(
        worst_gap <= 1e-10 && worst_res <= 1e-12,
        format!("max solver gap {worst_gap:.2e}, max residual {worst_res:.2e} over 200 orbits"),
    )
}

fn periodic() -> Check {
    let pp = periodic_point();
    let r = &pp.report;
    ensure(
        r.sup_distance <= 0.05 && r.periodicity_defect <= 1e-10,
        format!("m = {}, sup distance {:.3e}, periodicity defect {:.2e}", pp.m, r.sup_distance, r.periodicity_defect),
    )
}

fn dichotomy() -> Check {
    let odd = continuous_graph_obstruction(&cat(), 0, 1).map_err(|e| e.to_string())?;
    let even = continuous_graph_obstruction(&cat(), 1, 2).map_err(|e| e.to_string())?;
    let rep = detect_graph_discontinuity(&periodic_point().graph, 4).map_err(|e| e.to_string())?;
    let max = rep.gaps.iter().cloned().fold(0.0, f64::max);
    let min = rep.gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    let ok = odd == Obstruction::NoContinuousGraph
        && even == Obstruction::Forced(-1, -1)
        && rep.verdict == ContinuityVerdict::Discontinuous
        && max / min <= 1.5;
    ensure(ok, format!("(0,1): {odd:?}, (1,2): {even:?}, verdict {:?}, gap floor ratio {:.3}", rep.verdict, max / min))
}

fn horseshoe() -> Check {
    let sys = unforced(64);
    let emb = embedding();
    let fam = &emb.family;
    let target = fam.h_target - fam.gamma;
    let grid = uniform_grid(64);
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let (mut conj, mut ratio) = (0.0f64, f64::INFINITY);
    for p in 0..50 {
        let a = SymbolWord::random(fam.k, -3, 3, &mut rng);
        let at = (p % 3) as i64 * if rng.gen::<bool>() { 1 } else { -1 };
        let b = a.with(at, if a.get(at) == 1 { 2 } else { 1 });
        for &w in &grid {
            let s = emb.separation(&sys, &a, &b, w).map_err(|e| e.to_string())?.ok_or("identical words")?;
            ratio = ratio.min(s.direct.max(s.chain_bound) / s.required);
            conj = conj.max(emb.conjugacy_defect(&sys, &a, w).map_err(|e| e.to_string())?);
        }
    }
    let l_err = (emb.l_eff - ((7.0 + 3.0 * 5f64.sqrt()) / 2.0).sqrt()).abs();
    ensure(
        fam.rate >= target && conj <= 1e-10 && ratio >= 1.0 && l_err <= 1e-12,
        format!(
            "n = {}, k = {}, rate {:.9} >= {:.9}, conjugacy {conj:.2e}, separation/required >= {ratio:.3e}, L_eff {:.9}",
            fam.n, fam.k, fam.rate, target, emb.l_eff
        ),
    )
}

fn weak_horseshoe() -> Check {
    let sys = unforced(64);
    let fam = embedding().family.clone();
    let alpha = fam.alpha;
    let wh = build_weak_horseshoe(&sys, fam, 37, Some((0.0, 0.1)), 64, 8, 1e-13).map_err(|e| e.to_string())?;
    let grid = uniform_grid(64);
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let (mut misses, mut gap) = (0usize, 0i64);
    for _ in 0..100 {
        let s: Vec<u8> = (0..8).map(|_| rng.gen_range(1..=2)).collect();
        let r = wh.verify_visits(&sys, &s, &grid).map_err(|e| e.to_string())?;
        misses += r.misses;
        gap = gap.max(r.max_gap);
    }
    let bound = wh.gap_bound() as i64;
    ensure(
        misses == 0 && gap < bound && wh.set_distance() > 0.625 * alpha,
        format!(
            "misses {misses}, max gap {gap} < {bound}, set distance {:.4} > {:.4}",
            wh.set_distance(),
            0.625 * alpha
        ),
    )
}

fn entropy() -> Check {
    let ns: Vec<usize> = (1..=12).collect();
    let second = SkewSystem::new(ToralMatrix::new(2, 1, 1, 1).unwrap(), Forcing::zero(), GOLDEN, 64).unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, sys) in [("[[1,1],[2,1]] forced", forced(64)), ("[[2,1],[1,1]]", second)] {
        let r = entropy_estimate(&sys, &ns, 0.05, 200_000, 1).map_err(|e| e.to_string())?;
        let est = r.estimate.ok_or(format!("{name}: no usable slopes"))?;
        let rel = (est - r.h_ref).abs() / r.h_ref;
        ok &= rel <= 0.15;
        parts.push(format!("{name}: {est:.4} vs {:.4} ({:.1}%)", r.h_ref, 100.0 * rel));
    }
    ensure(ok, parts.join("; "))
}

fn ergodicity() -> Check {
    let sys = forced(64);
    let freqs = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 1, 1)];
    let p0 = ProductPoint::new(FiberPoint::new(0.1234, 0.5678), Angle::new(0.1));
    let r = weyl_test(&sys, &freqs, 10_000_000, p0).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for row in &r.rows {
        let at = |n: usize| row.decay.iter().find(|d| d.0 == n).map(|d| d.1).unwrap_or(f64::NAN);
        let (a, b) = (at(1_000_000), at(10_000_000));
        if row.freq == (0, 0, 0) {
            ok &= a == 1.0 && b == 1.0;
        } else {
            ok &= a <= 1e-2 && b < a;
        }
        parts.push(format!("{:?}: {a:.2e} -> {b:.2e}", row.freq));
    }
    ensure(ok, parts.join(", "))
}

fn pushforward() -> Check {
    let sys = forced(2048);
    let tests = [
        TestFunction::character_re(0, 1, 0),
        TestFunction::character_re(0, 0, 1),
        TestFunction::character_im(1, 1, 0),
        TestFunction::character_re(0, 1, 1),
        TestFunction::character_im(2, 1, -1),
    ];
    let r = pushforward_check(&sys, &periodic_point().graph, &tests, 4096).map_err(|e| e.to_string())?;
    ensure(
        r.max_discrepancy <= 1e-10,
        format!("max discrepancy {:.2e} over {} characters", r.max_discrepancy, r.rows.len()),
    )
}

fn determinism() -> Check {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let runs = [
        ("splitting", "forced.json"),
        ("periodic", "forced.json"),
        ("obstruction", "forced.json"),
        ("horseshoe", "unforced.json"),
        ("weak-horseshoe", "unforced.json"),
        ("entropy", "unforced.json"),
        ("ergodicity", "unforced.json"),
        ("mixing", "unforced.json"),
    ];
    let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
    for (cmd, cfg) in runs {
        let mut outputs = Vec::new();
        for d in &dirs {
            let st = Command::new(env!("CARGO_BIN_EXE_skewshadow"))
                .args([cmd, configs.join(cfg).to_str().unwrap(), "--out", d.path().to_str().unwrap()])
                .output()
                .map_err(|e| e.to_string())?;
            if !st.status.success() {
                return Err(format!("{cmd} exited with {:?}", st.status.code()));
            }
            outputs.push(
                std::fs::read(d.path().join(format!("{}.json", cmd.replace('-', "_")))).map_err(|e| e.to_string())?,
            );
        }
        if outputs[0] != outputs[1] {
            return Err(format!("{cmd}: JSON differs between runs"));
        }
    }
    Ok(format!("{} commands byte-identical on rerun", runs.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 10] = [
        ("splitting exactness", splitting),
        ("shadowing oracle equivalence", shadowing_oracle),
        ("random periodic graph", periodic),
        ("degree dichotomy", dichotomy),
        ("horseshoe certificates", horseshoe),
        ("weak horseshoe", weak_horseshoe),
        ("entropy estimate", entropy),
        ("ergodicity", ergodicity),
        ("pushforward identity", pushforward),
        ("determinism", determinism),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(d) => println!("criterion {}: PASS: {name}: {d} [{secs:.1}s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {}: FAIL: {name}: {d} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
