//! Base partitions, return structures and the three pseudo-orbit builders:
//! periodic returns, symbol-driven horseshoe orbits and scheduled weak-horseshoe
//! orbits.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{branch_segment, smallest_branch};
use crate::structures::{GraphFunction, SeparatedFamily, SymbolWord};
use crate::system::{fiber_map, fiber_map_inv, fiber_orbit, SkewSystem};
use crate::torus::{fiber_dist, wrap_displacement, wrap_half, Angle, FiberPoint, ProductPoint};

/// Half-open arcs `[c_i, c_{i+1})` of `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasePartition {
    cuts: Vec<f64>,
}

impl BasePartition {
    pub fn uniform(p: usize) -> BasePartition {
        let p = p.max(1);
        BasePartition { cuts: (0..=p).map(|i| i as f64 / p as f64).collect() }
    }

    pub fn from_cuts(cuts: Vec<f64>) -> Result<BasePartition> {
        let ok =
            cuts.len() >= 2 && cuts[0] == 0.0 && *cuts.last().unwrap() == 1.0 && cuts.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(Error::InvalidInput("cuts must increase strictly from 0 to 1".into()));
        }
        Ok(BasePartition { cuts })
    }

    pub fn p(&self) -> usize {
        self.cuts.len() - 1
    }

    pub fn arc(&self, i: usize) -> (f64, f64) {
        (self.cuts[i], self.cuts[i + 1])
    }

    pub fn diam(&self) -> f64 {
        self.cuts.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn lookup(&self, w: Angle) -> usize {
        let v = w.value();
        (self.cuts.partition_point(|&c| c <= v) - 1).min(self.p() - 1)
    }

    /// A base point `ω` with `ω` and `ω + t` both in arc `i` (as real numbers,
    /// the arc not wrapping), at the middle of the admissible interval.
    pub fn admissible_base(&self, i: usize, t: f64) -> Option<Angle> {
        if self.p() == 1 {
            return Some(Angle::new(0.5));
        }
        let (l, r) = self.arc(i);
        if t.abs() >= r - l {
            return None;
        }
        let (lo, hi) = if t >= 0.0 { (l, r - t) } else { (l - t, r) };
        Some(Angle::new(0.5 * (lo + hi)))
    }
}

/// One strip's recurrent segment: `segment[j]` is the fiber over `θ^j ω_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Anchor {
    pub point: ProductPoint,
    pub segment: Vec<FiberPoint>,
    pub start_offset: f64,
    pub end_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnStructure {
    pub m: usize,
    pub delta: f64,
    pub partition: BasePartition,
    pub anchors: Vec<Anchor>,
    /// Largest one-step residual inside the stored segments.
    pub max_residual: f64,
}

/// Common return time `m` and per-strip anchors returning to their strip.
///
/// For each candidate `m` the base condition is solved directly (both `ω_i` and
/// `θ^m ω_i` in arc `i`); the fiber condition is an exact lattice problem: the
/// anchor is `g(ω_i)` moved along `e_u` so that its `m`-th iterate lands within
/// `δ/2` of `g(θ^m ω_i)`. The segment is stored because forward float iteration
/// over hundreds of steps is meaningless for an expanding map.
pub fn find_return_structure(
    sys: &SkewSystem,
    g: &GraphFunction,
    xi: &BasePartition,
    delta: f64,
    budget: usize,
) -> Result<ReturnStructure> {
    if !(delta > 0.0) {
        return Err(Error::InvalidInput("delta must be positive".into()));
    }
    if budget == 0 {
        return Err(Error::BudgetExhausted("return search budget is 0".into()));
    }
    let diameter = std::f64::consts::FRAC_1_SQRT_2 + 0.5;
    if delta >= diameter {
        let anchors = (0..xi.p())
            .map(|i| {
                let (l, r) = xi.arc(i);
                let w = Angle::new(0.5 * (l + r));
                let x = g.eval(w)?;
                let segment = fiber_orbit(sys, ProductPoint::new(x, w), 1);
                let end_error = fiber_dist(segment[1], g.eval(sys.base_at(w, 1))?);
                Ok(Anchor { point: ProductPoint::new(x, w), segment, start_offset: 0.0, end_error })
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(ReturnStructure { m: 1, delta, partition: xi.clone(), anchors, max_residual: 0.0 });
    }
    let half = delta / 2.0;
    let lam = sys.hyper.lambda_u.abs();
    'outer: for m in 1..=budget {
        let t = wrap_half(m as f64 * sys.rotation);
        let mut anchors = Vec::with_capacity(xi.p());
        for i in 0..xi.p() {
            let Some(w) = xi.admissible_base(i, t) else { continue 'outer };
            let x = g.eval(w)?;
            let orbit = fiber_orbit(sys, ProductPoint::new(x, w), m);
            let target = g.eval(sys.base_at(w, m as i64))?;
            let d = wrap_displacement(target, orbit[m]).as_array();
            let u_limit = half * lam.powi(m.min(700) as i32);
            let Some(b) = smallest_branch(sys, d, half, u_limit)? else { continue 'outer };
            let segment = branch_segment(&sys.hyper, &orbit, b.a_u);
            let start_offset = fiber_dist(segment[0], x);
            let end_error = fiber_dist(segment[m], target);
            if start_offset > half || end_error > half {
                continue 'outer;
            }
            anchors.push(Anchor { point: ProductPoint::new(segment[0], w), segment, start_offset, end_error });
        }
        let max_residual = anchors.iter().map(|a| segment_residual(sys, a.point.base, &a.segment)).fold(0.0, f64::max);
        if max_residual > 1e-12 {
            return Err(Error::CertificateFailed(format!("anchor segment residual {max_residual:.3e}")));
        }
        return Ok(ReturnStructure { m, delta, partition: xi.clone(), anchors, max_residual });
    }
    Err(Error::BudgetExhausted(format!("no common return time m <= {budget} for delta = {delta}")))
}

/// Largest `|f(y_j) - y_{j+1}|` along a stored segment starting over `w`.
pub fn segment_residual(sys: &SkewSystem, w: Angle, seg: &[FiberPoint]) -> f64 {
    seg.windows(2)
        .enumerate()
        .map(|(j, p)| fiber_dist(fiber_map(sys, sys.base_at(w, j as i64), p[0]), p[1]))
        .fold(0.0, f64::max)
}

/// A finite window of fiber points over the base orbit of `base`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PseudoOrbit {
    pub base: Angle,
    pub i_min: i64,
    pub points: Vec<FiberPoint>,
    pub defect: Option<f64>,
}

impl PseudoOrbit {
    pub fn new(base: Angle, i_min: i64, points: Vec<FiberPoint>) -> PseudoOrbit {
        PseudoOrbit { base, i_min, points, defect: None }
    }

    pub fn i_max(&self) -> i64 {
        self.i_min + self.points.len() as i64 - 1
    }

    pub fn get(&self, j: i64) -> FiberPoint {
        self.points[(j - self.i_min) as usize]
    }

    pub fn set(&mut self, j: i64, p: FiberPoint) {
        let i = (j - self.i_min) as usize;
        self.points[i] = p;
        self.defect = None;
    }

    /// True orbit of `p` over indices `[i_min, i_max]`, with `p` at index 0.
    pub fn true_orbit(sys: &SkewSystem, p: ProductPoint, i_min: i64, i_max: i64) -> PseudoOrbit {
        let mut points = vec![FiberPoint::default(); (i_max - i_min + 1) as usize];
        let mut x = p.fiber;
        points[(-i_min) as usize] = x;
        for j in 0..i_max {
            x = fiber_map(sys, sys.base_at(p.base, j), x);
            points[(j + 1 - i_min) as usize] = x;
        }
        x = p.fiber;
        for j in (i_min..0).rev() {
            x = fiber_map_inv(sys, sys.base_at(p.base, j), x);
            points[(j - i_min) as usize] = x;
        }
        PseudoOrbit::new(p.base, i_min, points)
    }
}

/// Max one-step defect over the window; stored in the orbit.
pub fn measure_defect(sys: &SkewSystem, po: &mut PseudoOrbit) -> f64 {
    let d = po
        .points
        .windows(2)
        .enumerate()
        .map(|(k, p)| fiber_dist(fiber_map(sys, sys.base_at(po.base, po.i_min + k as i64), p[0]), p[1]))
        .fold(0.0, f64::max);
    po.defect = Some(d);
    d
}

/// Periodic-return pseudo-orbit on `[-W m, W m]`: `g` at multiples of `m`, the
/// anchor segment of strip `ξ(θ^{lm} v)` in between.
pub fn build_periodic_pseudo_orbit(
    sys: &SkewSystem,
    g: &GraphFunction,
    rs: &ReturnStructure,
    v: Angle,
    w_blocks: usize,
) -> Result<PseudoOrbit> {
    if w_blocks == 0 {
        return Err(Error::InvalidInput("window must have at least one block".into()));
    }
    let m = rs.m as i64;
    let wb = w_blocks as i64;
    let i_min = -wb * m;
    let mut points = Vec::with_capacity((2 * wb * m + 1) as usize);
    for l in -wb..wb {
        let wl = sys.base_at(v, l * m);
        points.push(g.eval(wl)?);
        let a = &rs.anchors[rs.partition.lookup(wl)];
        points.extend_from_slice(&a.segment[1..rs.m]);
    }
    points.push(g.eval(sys.base_at(v, wb * m))?);
    Ok(PseudoOrbit::new(v, i_min, points))
}

/// Symbol-driven horseshoe pseudo-orbit on `[-W n, W n]`: `x₀` at multiples of
/// `n`, inside block `l` the segment of the point labelled `word[l]` in the set
/// of strip `ξ(θ^{ln} ω)`.
pub fn build_horseshoe_pseudo_orbit(
    sys: &SkewSystem,
    family: &SeparatedFamily,
    word: &SymbolWord,
    w: Angle,
    w_blocks: usize,
) -> Result<PseudoOrbit> {
    if w_blocks == 0 {
        return Err(Error::InvalidInput("window must have at least one block".into()));
    }
    if word.k > family.k {
        return Err(Error::InvalidInput(format!("word alphabet {} exceeds family size {}", word.k, family.k)));
    }
    let n = family.n as i64;
    let wb = w_blocks as i64;
    let mut points = Vec::with_capacity((2 * wb * n + 1) as usize);
    for l in -wb..wb {
        let wl = sys.base_at(w, l * n);
        points.push(family.x0);
        let strip = family.partition.lookup(wl);
        let seg = family.segment(strip, word.get(l) - 1);
        points.extend_from_slice(&seg[1..family.n]);
    }
    points.push(family.x0);
    Ok(PseudoOrbit::new(w, -wb * n, points))
}

/// Maximal-return data of `θ^n` to a target arc over a grid of base points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingSchedule {
    pub n: usize,
    pub target: (f64, f64),
    /// Largest first-return index `n'(ω)` over all of `Ω` (exact covering number).
    pub k_cov: usize,
    /// Gap constant: every gap is at most `n·k_cov`, hence strictly below `n·k1`.
    pub k1: usize,
    pub grid: Vec<Angle>,
    /// `times[g][i - 1] = n''_i(ω_g)`.
    pub times: Vec<Vec<i64>>,
}

impl HittingSchedule {
    pub fn k(&self) -> usize {
        self.n * self.k1
    }
}

fn in_arc(w: Angle, arc: (f64, f64)) -> bool {
    let (l, r) = arc;
    if r - l >= 1.0 {
        return true;
    }
    let v = w.value();
    if r <= 1.0 {
        v >= l && v < r
    } else {
        v >= l || v < r - 1.0
    }
}

/// `n'(ω) = min{ j ≥ 1 : θ^{jn} ω ∈ arc }`.
pub fn first_return(sys: &SkewSystem, arc: (f64, f64), n: usize, w: Angle, limit: usize) -> Option<usize> {
    (1..=limit).find(|&j| in_arc(sys.base_at(w, (j * n) as i64), arc))
}

/// Scheduled hitting times `n''_1 < n''_2 < …` for one base point, using
/// `n''_{i+1} = n''_i + n·n'(θ^{n''_i} ω)`.
pub fn schedule_times(
    sys: &SkewSystem,
    arc: (f64, f64),
    n: usize,
    w: Angle,
    depth: usize,
    limit: usize,
) -> Result<Vec<i64>> {
    let mut out = Vec::with_capacity(depth);
    let mut cur = 0i64;
    for _ in 0..depth {
        let j = first_return(sys, arc, n, sys.base_at(w, cur), limit)
            .ok_or_else(|| Error::BudgetExhausted(format!("no return of theta^{n} within {limit} steps")))?;
        cur += (j * n) as i64;
        out.push(cur);
    }
    Ok(out)
}

/// Smallest `J` such that the arcs `arc - j n α`, `j = 1..=J`, cover the circle.
fn covering_number(sys: &SkewSystem, arc: (f64, f64), n: usize, limit: usize) -> Option<usize> {
    let width = arc.1 - arc.0;
    if width >= 1.0 {
        return Some(1);
    }
    let mut starts = Vec::new();
    for j in 1..=limit {
        starts.push(Angle::new(arc.0 - (j * n) as f64 * sys.rotation).value());
        let mut s = starts.clone();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut max_gap = 1.0 - s[s.len() - 1] + s[0];
        for w in s.windows(2) {
            max_gap = max_gap.max(w[1] - w[0]);
        }
        if max_gap < width {
            return Some(j);
        }
    }
    None
}

pub fn build_hitting_schedule(
    sys: &SkewSystem,
    target: (f64, f64),
    n: usize,
    grid: usize,
    depth: usize,
) -> Result<HittingSchedule> {
    let width = target.1 - target.0;
    if !(width > 0.0) || n == 0 {
        return Err(Error::InvalidInput("target arc must have interior and n >= 1".into()));
    }
    let limit = 10 * (1.0 / width.min(1.0)).ceil() as usize;
    let k_cov = covering_number(sys, target, n, limit)
        .ok_or_else(|| Error::BudgetExhausted(format!("theta^{n} does not cover the circle within {limit} steps")))?;
    let grid_pts = crate::system::uniform_grid(grid);
    let mut times = Vec::with_capacity(grid);
    for &w in &grid_pts {
        let ts = schedule_times(sys, target, n, w, depth, k_cov)?;
        let mut prev = 0i64;
        for &t in &ts {
            let gap = t - prev;
            if !(gap > 0 && gap <= (n * k_cov) as i64) || !in_arc(sys.base_at(w, t), target) {
                return Err(Error::CertificateFailed(format!("schedule at {} violates the gap bound", w.value())));
            }
            // No intermediate multiple of n lands in the target.
            let mut j = prev + n as i64;
            while j < t {
                if in_arc(sys.base_at(w, j), target) {
                    return Err(Error::CertificateFailed(format!("missed visit at time {j}")));
                }
                j += n as i64;
            }
            prev = t;
        }
        times.push(ts);
    }
    Ok(HittingSchedule { n, target, k_cov, k1: k_cov + 1, grid: grid_pts, times })
}

/// Weak-horseshoe pseudo-orbit on `[-W_l n, W_r n]`.
///
/// Indices `j ≤ 0` carry the true backward orbit of `(x₀, ω)`; `x₀` sits at every
/// positive multiple of `n`; a block starting at a scheduled time `n''_i` follows
/// the distinguished point `z_{1, s(i)}`; other blocks follow the default point
/// of their strip.
pub fn build_weak_horseshoe_pseudo_orbit(
    sys: &SkewSystem,
    family: &SeparatedFamily,
    times: &[i64],
    s: &[u8],
    w: Angle,
    left_blocks: usize,
    right_blocks: usize,
) -> Result<PseudoOrbit> {
    if family.k < 3 {
        return Err(Error::InvalidInput("weak horseshoe needs at least 3 points per strip".into()));
    }
    let n = family.n as i64;
    let i_min = -(left_blocks as i64) * n;
    let mut po = PseudoOrbit::true_orbit(sys, ProductPoint::new(family.x0, w), i_min, 0);
    let lookup: std::collections::HashMap<i64, usize> = times.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    for l in 0..right_blocks as i64 {
        let start = l * n;
        let wl = sys.base_at(w, start);
        let seg = match lookup.get(&start) {
            Some(&i) => {
                let sym = *s
                    .get(i)
                    .ok_or_else(|| Error::InvalidInput(format!("sequence shorter than schedule index {}", i + 1)))?;
                if !(sym == 1 || sym == 2) {
                    return Err(Error::InvalidInput(format!("symbol {sym} is not 1 or 2")));
                }
                family.segment(0, sym as u64 - 1)
            }
            None => family.segment(family.partition.lookup(wl), 2),
        };
        po.points.extend_from_slice(&seg[1..family.n]);
        po.points.push(family.x0);
    }
    Ok(po)
}
