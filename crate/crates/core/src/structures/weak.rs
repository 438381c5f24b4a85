use std::sync::Arc;

use serde::Serialize;

use super::{GraphFunction, GraphKind, SeparatedFamily};
use crate::error::{Error, Result};
use crate::pseudo_orbit::{
    build_hitting_schedule, build_weak_horseshoe_pseudo_orbit, measure_defect, schedule_times, HittingSchedule,
};
use crate::shadowing::{shadow_affine, window_for_tolerance, ShadowResult};
use crate::system::SkewSystem;
use crate::torus::{fiber_dist, Angle, FiberPoint};

/// Prescribed visits to two separated fiber balls along a hitting schedule.
pub struct WeakHorseshoe {
    pub family: Arc<SeparatedFamily>,
    pub schedule: HittingSchedule,
    /// Separation time of the distinguished pair.
    pub q: usize,
    pub centers: [FiberPoint; 2],
    pub radius: f64,
    pub tail_blocks: usize,
    pub tail_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VisitReport {
    pub visits: usize,
    pub misses: usize,
    /// Largest distance from a scheduled visit to its prescribed center.
    pub max_distance: f64,
    pub max_gap: i64,
    pub max_defect: f64,
    pub max_beta: f64,
}

impl WeakHorseshoe {
    pub fn center_distance(&self) -> f64 {
        fiber_dist(self.centers[0], self.centers[1])
    }

    /// Distance between the two closed balls.
    pub fn set_distance(&self) -> f64 {
        self.center_distance() - 2.0 * self.radius
    }

    /// Gap bound `n K₁`.
    pub fn gap_bound(&self) -> usize {
        self.schedule.k()
    }

    pub fn times(&self, sys: &SkewSystem, w: Angle, depth: usize) -> Result<Vec<i64>> {
        schedule_times(sys, self.schedule.target, self.family.n, w, depth, self.schedule.k_cov)
    }

    /// Shadow orbit of the weak-horseshoe pseudo-orbit for the first `s.len()` scheduled blocks.
    pub fn evaluate(&self, sys: &SkewSystem, s: &[u8], w: Angle) -> Result<(Vec<i64>, ShadowResult, f64)> {
        let n = self.family.n;
        let times = self.times(sys, w, s.len())?;
        let last = times.last().copied().unwrap_or(0) as usize;
        let right = last / n + 1 + self.tail_blocks;
        let mut po = build_weak_horseshoe_pseudo_orbit(sys, &self.family, &times, s, w, self.tail_blocks, right)?;
        let defect = measure_defect(sys, &mut po);
        let sr = shadow_affine(sys, &po, self.tail_tol)?;
        Ok((times, sr, defect))
    }

    /// `x_s(ω)`.
    pub fn point(&self, sys: &SkewSystem, s: &[u8], w: Angle) -> Result<FiberPoint> {
        Ok(self.evaluate(sys, s, w)?.1.y0)
    }

    pub fn graph(self: &Arc<Self>, sys: &SkewSystem, s: Vec<u8>) -> GraphFunction {
        let me = self.clone();
        let sys = sys.clone();
        GraphFunction::new(GraphKind::WeakHorseshoe, sys.grid_size, move |w| me.point(&sys, &s, w))
    }

    /// Checks every scheduled visit `n''_i + q` against `U_{s(i)}` at each base point.
    pub fn verify_visits(&self, sys: &SkewSystem, s: &[u8], grid: &[Angle]) -> Result<VisitReport> {
        use rayon::prelude::*;
        let q = self.q as i64;
        let rows: Vec<VisitReport> = grid
            .par_iter()
            .map(|&w| {
                let (times, sr, defect) = self.evaluate(sys, s, w)?;
                let mut r = VisitReport {
                    visits: 0,
                    misses: 0,
                    max_distance: 0.0,
                    max_gap: 0,
                    max_defect: defect,
                    max_beta: sr.achieved_beta,
                };
                let mut prev = 0;
                for (i, &t) in times.iter().enumerate() {
                    let d = fiber_dist(sr.get(t + q), self.centers[s[i] as usize - 1]);
                    r.visits += 1;
                    if d > self.radius {
                        r.misses += 1;
                    }
                    r.max_distance = r.max_distance.max(d);
                    r.max_gap = r.max_gap.max(t - prev);
                    prev = t;
                }
                Ok(r)
            })
            .collect::<Result<_>>()?;
        Ok(rows.into_iter().fold(
            VisitReport { visits: 0, misses: 0, max_distance: 0.0, max_gap: 0, max_defect: 0.0, max_beta: 0.0 },
            |a, b| VisitReport {
                visits: a.visits + b.visits,
                misses: a.misses + b.misses,
                max_distance: a.max_distance.max(b.max_distance),
                max_gap: a.max_gap.max(b.max_gap),
                max_defect: a.max_defect.max(b.max_defect),
                max_beta: a.max_beta.max(b.max_beta),
            },
        ))
    }
}

/// Builds the weak horseshoe from labels 0 and 1 of strip 0 (the distinguished
/// pair) with label 2 as default anchor. `target` must lie inside the arc of
/// strip 0; `None` uses the whole arc.
pub fn build_weak_horseshoe(
    sys: &SkewSystem,
    family: Arc<SeparatedFamily>,
    q_horizon: usize,
    target: Option<(f64, f64)>,
    grid: usize,
    depth: usize,
    tail_tol: f64,
) -> Result<WeakHorseshoe> {
    if family.k < 3 {
        return Err(Error::InvalidInput(format!("family has {} points per strip, need 3", family.k)));
    }
    let n = family.n;
    let arc0 = family.partition.arc(0);
    let target = target.unwrap_or(arc0);
    if target.0 < arc0.0 || target.1 > arc0.1 || target.1 <= target.0 {
        return Err(Error::InvalidInput(format!("target {target:?} not inside strip arc {arc0:?}")));
    }
    let a = family.segment(0, 0);
    let b = family.segment(0, 1);
    let horizon = q_horizon.min(n - 1);
    let q = (1..=horizon).find(|&j| fiber_dist(a[j], b[j]) > family.alpha).ok_or(Error::NoSeparationTime(horizon))?;
    let schedule = build_hitting_schedule(sys, target, n, grid, depth)?;
    let radius = family.alpha / 8.0;
    let tail = window_for_tolerance(&sys.hyper, radius, tail_tol) as usize;
    Ok(WeakHorseshoe {
        family,
        schedule,
        q,
        centers: [a[q], b[q]],
        radius,
        tail_blocks: tail.div_ceil(n) + 1,
        tail_tol,
    })
}
