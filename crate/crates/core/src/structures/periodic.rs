use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::{GraphFunction, GraphKind};
use crate::error::{Error, Result};
use crate::pseudo_orbit::{
    build_periodic_pseudo_orbit, find_return_structure, measure_defect, BasePartition, ReturnStructure,
};
use crate::shadowing::{shadow_affine, window_for_tolerance, ShadowResult};
use crate::system::SkewSystem;
use crate::torus::{fiber_dist, Angle};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicOptions {
    pub max_levels: usize,
    pub return_budget: usize,
    pub tail_tol: f64,
}

impl Default for PeriodicOptions {
    fn default() -> Self {
        PeriodicOptions { max_levels: 12, return_budget: 5000, tail_tol: 1e-13 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRecord {
    pub level: usize,
    pub strips: usize,
    pub delta: f64,
    pub m: Option<usize>,
    pub max_defect: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicReport {
    pub epsilon: f64,
    pub beta: f64,
    pub alpha: f64,
    pub m: usize,
    pub strips: usize,
    pub delta: f64,
    pub window_blocks: usize,
    pub grid: usize,
    pub max_defect: f64,
    pub max_beta: f64,
    /// `sup_ω d(g(ω), g̃(ω))` over the grid.
    pub sup_distance: f64,
    /// `sup_ω d(y_m(ω), g̃(θ^m ω))` where `y_m` is index `m` of the shadow orbit of `g̃(ω)`.
    pub periodicity_defect: f64,
    pub max_tail: f64,
    pub max_residual: f64,
    pub levels: Vec<LevelRecord>,
}

pub struct PeriodicPoint {
    pub m: usize,
    pub graph: GraphFunction,
    pub report: PeriodicReport,
    pub returns: Arc<ReturnStructure>,
}

struct Pipeline {
    sys: SkewSystem,
    g: GraphFunction,
    rs: Arc<ReturnStructure>,
    w_blocks: usize,
    tol: f64,
}

impl Pipeline {
    fn shadow(&self, w: Angle) -> Result<ShadowResult> {
        let po = build_periodic_pseudo_orbit(&self.sys, &self.g, &self.rs, w, self.w_blocks)?;
        shadow_affine(&self.sys, &po, self.tol)
    }
}

/// Random periodic point within `ε` of `g`: refine the base partition until the
/// periodic-return pseudo-orbits have defect below `α(β)`, then shadow.
pub fn find_random_periodic_point(
    sys: &SkewSystem,
    g: &GraphFunction,
    eps: f64,
    opts: &PeriodicOptions,
) -> Result<PeriodicPoint> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    let sc = &sys.consts;
    let beta = (0.5 * eps).min(sc.beta0) * 0.9;
    let alpha = sc.alpha_of_beta(beta);
    let n_tail = window_for_tolerance(&sys.hyper, alpha, opts.tail_tol) as usize;
    let grid = sys.grid();
    let mut levels = Vec::new();
    let mut best = f64::INFINITY;
    let mut accepted = None;
    for level in 0..opts.max_levels {
        let p = 1usize << level;
        let delta = 0.5 / p as f64;
        let xi = BasePartition::uniform(p);
        let rs = match find_return_structure(sys, g, &xi, delta, opts.return_budget) {
            Ok(rs) => rs,
            Err(e) if e.is_budget() => {
                levels.push(LevelRecord { level, strips: p, delta, m: None, max_defect: None });
                continue;
            }
            Err(e) => return Err(e),
        };
        let w_blocks = n_tail.div_ceil(rs.m) + 1;
        let defects: Vec<f64> = grid
            .par_iter()
            .map(|&w| {
                let mut po = build_periodic_pseudo_orbit(sys, g, &rs, w, w_blocks)?;
                Ok(measure_defect(sys, &mut po))
            })
            .collect::<Result<_>>()?;
        let max_defect = defects.iter().cloned().fold(0.0, f64::max);
        best = best.min(max_defect);
        levels.push(LevelRecord { level, strips: p, delta, m: Some(rs.m), max_defect: Some(max_defect) });
        if max_defect < alpha {
            accepted = Some((rs, w_blocks, max_defect));
            break;
        }
    }
    let Some((rs, w_blocks, max_defect)) = accepted else {
        return Err(Error::RefinementExhausted { levels: opts.max_levels, best, needed: alpha });
    };
    let m = rs.m;
    let strips = rs.partition.p();
    let delta = rs.delta;
    let pipe = Arc::new(Pipeline { sys: sys.clone(), g: g.clone(), rs: Arc::new(rs), w_blocks, tol: opts.tail_tol });
    let eval_pipe = pipe.clone();
    let graph = GraphFunction::new(GraphKind::Periodic, sys.grid_size, move |w| Ok(eval_pipe.shadow(w)?.y0));

    let rows: Vec<(f64, f64, f64, f64, f64)> = grid
        .par_iter()
        .map(|&w| {
            let sr = pipe.shadow(w)?;
            let dist = fiber_dist(g.eval(w)?, sr.y0);
            let shifted = pipe.shadow(sys.base_at(w, m as i64))?;
            let per = fiber_dist(sr.get(m as i64), shifted.y0);
            Ok((dist, per, sr.achieved_beta, sr.tail_bound, sr.residual))
        })
        .collect::<Result<_>>()?;
    let fold = |f: fn(&(f64, f64, f64, f64, f64)) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let report = PeriodicReport {
        epsilon: eps,
        beta,
        alpha,
        m,
        strips,
        delta,
        window_blocks: w_blocks,
        grid: grid.len(),
        max_defect,
        max_beta: fold(|r| r.2),
        sup_distance: fold(|r| r.0),
        periodicity_defect: fold(|r| r.1),
        max_tail: fold(|r| r.3),
        max_residual: fold(|r| r.4),
        levels,
    };
    Ok(PeriodicPoint { m, graph, report, returns: pipe.rs.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuityVerdict {
    Continuous,
    Discontinuous,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityReport {
    pub grids: Vec<usize>,
    /// Max adjacent-sample fiber gap per grid.
    pub gaps: Vec<f64>,
    pub lip_estimate: f64,
    pub threshold: f64,
    pub verdict: ContinuityVerdict,
}

/// Compares max adjacent gaps on grids `G, 2G, …, 2^levels G`: gaps that halve
/// with the spacing mean continuity, a stable floor well above the local
/// Lipschitz scale means a jump.
pub fn detect_graph_discontinuity(g: &GraphFunction, levels: usize) -> Result<ContinuityReport> {
    if levels < 2 {
        return Err(Error::InvalidInput("need at least 2 refinement levels".into()));
    }
    let mut grids = Vec::new();
    let mut gaps = Vec::new();
    let mut finest = Vec::new();
    for k in 0..=levels {
        let n = g.grid.max(2) << k;
        let s = g.samples_on(n)?;
        let steps: Vec<f64> = (0..n).map(|j| fiber_dist(s[j].1, s[(j + 1) % n].1)).collect();
        grids.push(n);
        gaps.push(steps.iter().cloned().fold(0.0, f64::max));
        finest = steps;
    }
    let n_f = *grids.last().unwrap();
    let spacing = 1.0 / n_f as f64;
    finest.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lip_estimate = finest[finest.len() / 2] / spacing;
    let threshold = 10.0 * spacing * lip_estimate;
    let last = *gaps.last().unwrap();
    let ratios: Vec<f64> = gaps.windows(2).map(|w| w[0] / w[1]).collect();
    let verdict = if last <= 1e-12 || ratios.iter().all(|&r| r >= 1.5) {
        ContinuityVerdict::Continuous
    } else if ratios.iter().all(|&r| r < 1.5 && r > 1.0 / 1.5) && last > threshold {
        ContinuityVerdict::Discontinuous
    } else {
        return Err(Error::Inconclusive(gaps));
    };
    Ok(ContinuityReport { grids, gaps, lip_estimate, threshold, verdict })
}
