use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use skewshadow::measures::{entropy_estimate, weyl_test};
use skewshadow::pseudo_orbit::BasePartition;
use skewshadow::structures::*;
use skewshadow::system::{check_fiber_mixing, shadowing_constants, uniform_grid, FiberBall, SkewSystem};
use skewshadow::torus::FiberPoint;
use skewshadow::Error;

use crate::config::{BallConfig, Construction, Loaded};
use crate::output::{fmt_f64, to_value, Certificate, Outcome, Table};
use crate::CliError;

/// Sub-seeds drawn in a fixed order from the configured seed.
struct Seeds(ChaCha8Rng);

impl Seeds {
    fn new(seed: u64) -> Seeds {
        Seeds(ChaCha8Rng::seed_from_u64(seed))
    }

    fn next(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn rng(&mut self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.next())
    }
}

fn f(x: f64) -> String {
    fmt_f64(x)
}

pub fn splitting(cfg: &Loaded) -> Result<Outcome, CliError> {
    let sys = cfg.system()?;
    let hd = sys.hyper;
    let sc = shadowing_constants(&hd);
    let residual = |e: [f64; 2], l: f64| {
        let ae = sys.matrix.apply(e);
        (ae[0] - l * e[0]).hypot(ae[1] - l * e[1])
    };
    let res_u = residual(hd.e_u, hd.lambda_u);
    let res_s = residual(hd.e_s, hd.lambda_s);
    let quantities = [
        ("lambda_u", hd.lambda_u),
        ("lambda_s", hd.lambda_s),
        ("lambda0", hd.lambda0),
        ("eps0", sc.eps0),
        ("delta_lps", sc.delta_lps),
        ("beta0", sc.beta0),
        ("proj_norm", hd.proj_norm),
        ("lip_l", hd.lip_l),
        ("unstable_gain", sc.unstable_gain),
        ("stable_gain", sc.stable_gain),
        ("bound_factor", sc.bound_factor),
        ("admissible_defect", sc.admissible_defect()),
    ];
    let mut table = Table::new("splitting", &["quantity", "value"]);
    let mut summary = Vec::new();
    for (k, v) in quantities {
        table.push(vec![k.into(), f(v)]);
        summary.push(format!("{k} = {}", f(v)));
    }
    let report = json!({
        "hyperbolic": {
            "lambda_u": hd.lambda_u, "lambda_s": hd.lambda_s, "lambda0": hd.lambda0,
            "e_u": hd.e_u, "e_s": hd.e_s, "f_u": hd.f_u, "f_s": hd.f_s,
            "proj_norm": hd.proj_norm, "lip_l": hd.lip_l,
        },
        "shadowing": to_value(&sc),
        "admissible_defect": sc.admissible_defect(),
    });
    let certificates = vec![
        Certificate::le("unstable eigen residual", res_u, 1e-14),
        Certificate::le("stable eigen residual", res_s, 1e-14),
        Certificate::gt("lambda0", hd.lambda0, 0.0),
        Certificate::lt("beta0", sc.beta0, sc.delta_lps / 3.0),
    ];
    Ok(Outcome { report, certificates, tables: vec![table], summary })
}

pub fn periodic(cfg: &Loaded) -> Result<Outcome, CliError> {
    let sys = cfg.system()?;
    let c = &cfg.config.construction;
    if !(c.epsilon > 0.0) {
        return Err(cfg.invalid("epsilon", "must be positive"));
    }
    let g = GraphFunction::constant(FiberPoint::new(c.graph[0], c.graph[1]), sys.grid_size);
    let opts = PeriodicOptions { max_levels: c.max_levels, return_budget: c.return_budget, tail_tol: c.tail_tol };
    eprintln!("periodic: refining partition and shadowing");
    let pp = find_random_periodic_point(&sys, &g, c.epsilon, &opts)?;
    let continuity = if c.continuity_levels >= 2 {
        eprintln!("periodic: continuity test over {} levels", c.continuity_levels);
        match detect_graph_discontinuity(&pp.graph, c.continuity_levels) {
            Ok(r) => to_value(&r),
            Err(Error::Inconclusive(gaps)) => json!({ "verdict": "inconclusive", "gaps": gaps }),
            Err(e) => return Err(e.into()),
        }
    } else {
        serde_json::Value::Null
    };
    let mut table = Table::new("periodic", &["omega", "g_x", "g_y", "gt_x", "gt_y"]);
    for (w, p) in pp.graph.samples()? {
        let q = g.eval(w)?;
        table.push(vec![f(w.value()), f(q.x.value()), f(q.y.value()), f(p.x.value()), f(p.y.value())]);
    }
    let r = &pp.report;
    let certificates = vec![
        Certificate::le("sup distance to g", r.sup_distance, c.epsilon),
        Certificate::le("periodicity defect", r.periodicity_defect, 1e-10),
        Certificate::lt("pseudo-orbit defect", r.max_defect, r.alpha),
    ];
    let summary = vec![
        format!("m = {}", pp.m),
        format!("strips = {}", r.strips),
        format!("sup distance = {}", f(r.sup_distance)),
        format!("periodicity defect = {}", f(r.periodicity_defect)),
        format!("continuity = {}", continuity.get("verdict").and_then(|v| v.as_str()).unwrap_or("not tested")),
    ];
    let report = json!({ "m": pp.m, "periodic": to_value(r), "continuity": continuity });
    Ok(Outcome { report, certificates, tables: vec![table], summary })
}

fn capture(sys: &SkewSystem, cfg: &Loaded, seeds: &mut Seeds) -> Result<SeparatedFamily, CliError> {
    let c = &cfg.config.construction;
    if c.partition == 0 {
        return Err(cfg.invalid("partition", "must be positive"));
    }
    let opts = CaptureOptions {
        delta2: c.delta2,
        gamma: c.gamma,
        alpha: c.alpha_sep,
        n_max: c.n_max,
        x0: FiberPoint::new(c.anchor[0], c.anchor[1]),
        seed: seeds.next(),
        ..CaptureOptions::default()
    };
    eprintln!("capturing separated family");
    Ok(capture_separated_family(sys, &BasePartition::uniform(c.partition), &opts)?)
}

fn family_summary(fam: &SeparatedFamily) -> Vec<String> {
    vec![
        format!("n = {}", fam.n),
        format!("k = {}", fam.k),
        format!("rate = {} (target {})", f(fam.rate), f(fam.h_target - fam.gamma)),
    ]
}

fn leaf_words(c: &Construction, k: u64) -> Result<Vec<SymbolWord>, Error> {
    if c.words.is_empty() {
        let ones = SymbolWord::ones(k);
        return Ok(if k >= 2 { vec![ones.clone(), ones.with(0, 2)] } else { vec![ones] });
    }
    c.words.iter().map(|w| SymbolWord::new(k, w.iter().copied().collect())).collect()
}

fn word_label(w: &SymbolWord) -> String {
    let parts: Vec<String> = w.entries.iter().map(|(i, a)| format!("{i}:{a}")).collect();
    if parts.is_empty() {
        "ones".into()
    } else {
        parts.join(" ")
    }
}

pub fn horseshoe(cfg: &Loaded) -> Result<Outcome, CliError> {
    let sys = cfg.system()?;
    let c = &cfg.config.construction;
    let mut seeds = Seeds::new(c.seed);
    let fam = capture(&sys, cfg, &mut seeds)?;
    let hopts =
        HorseshoeOptions { tail_tol: c.tail_tol, certify_words: 8, certify_grid: c.check_grid, seed: seeds.next() };
    eprintln!("certifying R1 and building the embedding");
    let emb = Arc::new(build_horseshoe(&sys, fam, &hopts)?);
    let fam = emb.family.clone();
    let k = fam.k;
    let grid = uniform_grid(c.check_grid.max(1));
    let mut rng = seeds.rng();
    let mut pairs =
        Table::new("horseshoe_pairs", &["pair", "s", "omega", "direct", "chain_bound", "required", "conjugacy_defect"]);
    let (mut worst_ratio, mut worst_conj) = (f64::INFINITY, 0.0f64);
    if k >= 2 {
        eprintln!("checking {} word pairs on {} base points", c.word_pairs, grid.len());
        for p in 0..c.word_pairs {
            let a = SymbolWord::random(k, -c.word_span, c.word_span, &mut rng);
            let s = (p as i64) % 3;
            let at = if rng.gen::<bool>() { s } else { -s };
            let other = if a.get(at) == 1 { 2 } else { a.get(at) - 1 };
            let b = a.with(at, other);
            for &w in &grid {
                let sep = emb.separation(&sys, &a, &b, w)?.expect("words differ");
                let conj = emb.conjugacy_defect(&sys, &a, w)?;
                let best = sep.direct.max(sep.chain_bound);
                worst_ratio = worst_ratio.min(best / sep.required);
                worst_conj = worst_conj.max(conj);
                pairs.push(vec![
                    p.to_string(),
                    sep.s.to_string(),
                    f(w.value()),
                    f(sep.direct),
                    f(sep.chain_bound),
                    f(sep.required),
                    f(conj),
                ]);
            }
        }
    }
    let words = leaf_words(c, k)?;
    let mut leaves = Table::new("horseshoe_leaves", &["word", "omega", "x", "y"]);
    for word in &words {
        let g = emb.leaf(&sys, word.clone());
        for (w, p) in g.samples()? {
            leaves.push(vec![word_label(word), f(w.value()), f(p.x.value()), f(p.y.value())]);
        }
    }
    let mut certificates = vec![
        Certificate::ge("entropy rate (1/n) ln k", fam.rate, fam.h_target - fam.gamma),
        Certificate::lt("R1 pseudo-orbit defect", emb.r1.max_defect, emb.r1.defect_limit),
        Certificate::lt("R1 shadowing bound", emb.r1.beta_bound, emb.r1.defect_limit),
    ];
    if k >= 2 && c.word_pairs > 0 {
        certificates.push(Certificate::le("conjugacy defect", worst_conj, 1e-10));
        certificates.push(Certificate::ge("separation / required", worst_ratio, 1.0));
    }
    let mut summary = family_summary(&fam);
    summary.push(format!("window blocks = {}", emb.w_blocks));
    summary.push(format!("L_eff = {}", f(emb.l_eff)));
    let report = json!({
        "family": to_value(&*fam),
        "window_blocks": emb.w_blocks,
        "l_eff": emb.l_eff,
        "c": emb.c,
        "tail_tol": emb.tail_tol,
        "r1": to_value(&emb.r1),
        "word_pairs": c.word_pairs,
        "worst_separation_ratio": if worst_ratio.is_finite() { json!(worst_ratio) } else { json!(null) },
        "max_conjugacy_defect": worst_conj,
        "leaf_words": words.iter().map(word_label).collect::<Vec<_>>(),
    });
    Ok(Outcome { report, certificates, tables: vec![pairs, leaves], summary })
}

pub fn weak_horseshoe(cfg: &Loaded) -> Result<Outcome, CliError> {
    let sys = cfg.system()?;
    let c = &cfg.config.construction;
    let mut seeds = Seeds::new(c.seed);
    let fam = Arc::new(capture(&sys, cfg, &mut seeds)?);
    let target = c.target.map(|t| (t[0], t[1]));
    eprintln!("building weak horseshoe");
    let wh = build_weak_horseshoe(&sys, fam.clone(), c.q_horizon, target, c.check_grid.max(1), c.depth, c.tail_tol)?;
    let grid = uniform_grid(c.check_grid.max(1));
    let mut rng = seeds.rng();
    let mut table = Table::new(
        "weak_visits",
        &["sequence", "symbols", "visits", "misses", "max_distance", "max_gap", "max_defect", "max_beta"],
    );
    let (mut misses, mut max_gap, mut max_dist) = (0usize, 0i64, 0.0f64);
    eprintln!("verifying {} sequences on {} base points", c.sequences, grid.len());
    for i in 0..c.sequences {
        let s: Vec<u8> = (0..c.depth).map(|_| rng.gen_range(1..=2)).collect();
        let r = wh.verify_visits(&sys, &s, &grid)?;
        misses += r.misses;
        max_gap = max_gap.max(r.max_gap);
        max_dist = max_dist.max(r.max_distance);
        let sym: String = s.iter().map(|d| char::from(b'0' + d)).collect();
        table.push(vec![
            i.to_string(),
            sym,
            r.visits.to_string(),
            r.misses.to_string(),
            f(r.max_distance),
            r.max_gap.to_string(),
            f(r.max_defect),
            f(r.max_beta),
        ]);
    }
    let certificates = vec![
        Certificate::eq("missed visits", misses as f64, 0.0),
        Certificate::lt("largest gap", max_gap as f64, wh.gap_bound() as f64),
        Certificate::gt("U1-U2 set distance", wh.set_distance(), 0.625 * fam.alpha),
    ];
    let mut summary = family_summary(&fam);
    summary.push(format!("q = {}, K1 = {}, gap bound = {}", wh.q, wh.schedule.k1, wh.gap_bound()));
    summary.push(format!("set distance = {}", f(wh.set_distance())));
    summary.push(format!("missed visits = {misses}"));
    let report = json!({
        "family": { "n": fam.n, "k": fam.k, "rate": fam.rate, "alpha": fam.alpha },
        "q": wh.q,
        "k_cov": wh.schedule.k_cov,
        "k1": wh.schedule.k1,
        "gap_bound": wh.gap_bound(),
        "target": wh.schedule.target,
        "centers": to_value(&wh.centers),
        "radius": wh.radius,
        "center_distance": wh.center_distance(),
        "set_distance": wh.set_distance(),
        "sequences": c.sequences,
        "misses": misses,
        "max_gap": max_gap,
        "max_visit_distance": max_dist,
    });
    Ok(Outcome { report, certificates, tables: vec![table], summary })
}

pub fn entropy(cfg: &Loaded) -> Result<Outcome, CliError> {
    let sys = cfg.system()?;
    let c = &cfg.config.construction;
    eprintln!("entropy: {} samples", c.budget);
    let r = entropy_estimate(&sys, &c.entropy_n, c.entropy_alpha, c.budget, Seeds::new(c.seed).next())?;
    let mut table = Table::new("entropy", &["n", "separated", "close_pairs", "covering", "rate", "slope"]);
    for row in &r.rows {
        table.push(vec![
            row.n.to_string(),
            row.separated.to_string(),
            row.close_pairs.to_string(),
            f(row.covering),
            f(row.rate),
            row.slope.map(f).unwrap_or_default(),
        ]);
    }
    let mut certificates = Vec::new();
    if let Some(e) = r.estimate {
        certificates.push(Certificate::le("relative error of slope estimate", (e - r.h_ref).abs() / r.h_ref, 0.15));
    }
    let summary = vec![
        format!("estimate = {}", r.estimate.map(f).unwrap_or_else(|| "none".into())),
        format!("h_ref = {}", f(r.h_ref)),
        format!("slopes used = {}", r.slopes_used),
    ];
    Ok(Outcome { report: to_value(&r), certificates, tables: vec![table], summary })
}

pub fn ergodicity(cfg: &Loaded) -> Result<Outcome, CliError> {
    let sys = cfg.system()?;
    let c = &cfg.config.construction;
    let freqs: Vec<(i64, i64, i64)> = c.frequencies.iter().map(|f| (f[0], f[1], f[2])).collect();
    eprintln!("ergodicity: {} iterates", c.weyl_n);
    let r = weyl_test(&sys, &freqs, c.weyl_n, c.start_point())?;
    let mut table = Table::new("weyl", &["k", "l", "m", "n", "modulus"]);
    let mut certificates = Vec::new();
    let mut summary = Vec::new();
    for row in &r.rows {
        let (k, l, m) = row.freq;
        for &(n, v) in &row.decay {
            table.push(vec![k.to_string(), l.to_string(), m.to_string(), n.to_string(), f(v)]);
        }
        let last = row.decay.last().map_or(f64::NAN, |d| d.1);
        summary.push(format!("({k},{l},{m}): {}", f(last)));
        if row.freq == (0, 0, 0) {
            certificates.push(Certificate::eq("zero frequency average", last, 1.0));
        } else {
            certificates.push(Certificate::le(&format!("|S_N|/N at ({k},{l},{m})"), last, 1e-2));
        }
    }
    Ok(Outcome { report: to_value(&r), certificates, tables: vec![table], summary })
}

fn ball(b: BallConfig) -> FiberBall {
    FiberBall { center: FiberPoint::new(b.center[0], b.center[1]), radius: b.radius }
}

pub fn mixing(cfg: &Loaded) -> Result<Outcome, CliError> {
    let sys = cfg.system()?;
    let c = &cfg.config.construction;
    let (u, v) = (ball(c.mixing_u), ball(c.mixing_v));
    let r = check_fiber_mixing(&sys, u, v, c.mixing_n, c.mixing_grid, c.max_samples)?;
    let mut table = Table::new("mixing", &["n", "hits", "grid"]);
    for &(n, h) in &r.hits {
        table.push(vec![n.to_string(), h.to_string(), r.grid.to_string()]);
    }
    let heuristic = ((1.0 / u.radius.min(v.radius)).ln().max(0.0) / sys.hyper.lambda_u.abs().ln()).ceil();
    let certificates = match r.n0 {
        Some(n0) => vec![Certificate::le("mixing time N0", n0 as f64, heuristic + 3.0)],
        None => vec![Certificate::le("mixing time N0", f64::INFINITY, heuristic + 3.0)],
    };
    let summary = vec![format!("N0 = {}", r.n0.map_or("none".into(), |n| n.to_string()))];
    let report = json!({ "mixing": to_value(&r), "u": to_value(&u), "v": to_value(&v), "heuristic": heuristic });
    Ok(Outcome { report, certificates, tables: vec![table], summary })
}

pub fn obstruction(cfg: &Loaded) -> Result<Outcome, CliError> {
    let sys = cfg.system()?;
    let (n1, n2) = sys.forcing.degrees;
    let r = continuous_graph_obstruction(&sys.matrix, n1, n2)?;
    let mut table = Table::new("obstruction", &["n1", "n2", "k1", "k2", "continuous_graph"]);
    for a in -2..=2 {
        for b in -2..=2 {
            let row = match continuous_graph_obstruction(&sys.matrix, a, b)? {
                Obstruction::Forced(k1, k2) => {
                    vec![a.to_string(), b.to_string(), k1.to_string(), k2.to_string(), "possible".into()]
                }
                Obstruction::NoContinuousGraph => {
                    vec![a.to_string(), b.to_string(), String::new(), String::new(), "none".into()]
                }
            };
            table.push(row);
        }
    }
    let line = match r {
        Obstruction::Forced(k1, k2) => format!("(k1, k2) = ({k1}, {k2})"),
        Obstruction::NoContinuousGraph => "NoContinuousGraph".into(),
    };
    let report = json!({ "degrees": [n1, n2], "result": to_value(&r) });
    Ok(Outcome { report, certificates: Vec::new(), tables: vec![table], summary: vec![line] })
}
