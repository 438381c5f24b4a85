//! Shadowing of pseudo-orbits: the exact geometric-series solver for the affine
//! system, an iterative sequence-space solver used as an independent oracle, and
//! the expansivity and separation certificates.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::pseudo_orbit::{measure_defect, PseudoOrbit};
use crate::system::{fiber_map, HyperbolicData, ShadowingConstants, SkewSystem};
use crate::torus::{fiber_dist, wrap_displacement, Displacement, FiberPoint, ProductPoint};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShadowResult {
    pub i_min: i64,
    pub corrections: Vec<Displacement>,
    /// Shadow sequence `y_i = x_i + δ_i`.
    pub points: Vec<FiberPoint>,
    pub y0: FiberPoint,
    pub achieved_beta: f64,
    /// Truncation error bound on `y_0`.
    pub tail_bound: f64,
    pub defect: f64,
    /// Largest one-step residual of the shadow sequence.
    pub residual: f64,
    pub iterations: usize,
}

impl ShadowResult {
    pub fn i_max(&self) -> i64 {
        self.i_min + self.points.len() as i64 - 1
    }

    pub fn get(&self, j: i64) -> FiberPoint {
        self.points[(j - self.i_min) as usize]
    }

    pub fn correction(&self, j: i64) -> Displacement {
        self.corrections[(j - self.i_min) as usize]
    }
}

/// Truncation bound at an index with `left` indices before it and `right` after.
pub fn tail_bound(hd: &HyperbolicData, defect: f64, left: i64, right: i64) -> f64 {
    let lu = hd.lambda_u.abs();
    let ls = hd.lambda_s.abs();
    hd.proj_norm
        * defect
        * (lu.powi(-(right.max(0) as i32 + 1)) / (1.0 - 1.0 / lu) + ls.powi(left.max(0) as i32) / (1.0 - ls))
}

/// Smallest window half-width (in indices) whose tail bound is below `tol`.
pub fn window_for_tolerance(hd: &HyperbolicData, defect: f64, tol: f64) -> i64 {
    let mut w = 0;
    while tail_bound(hd, defect, w, w) > tol && w < 100_000 {
        w += 1;
    }
    w
}

fn check_admissible(sc: &ShadowingConstants, defect: f64) -> Result<()> {
    let limit = sc.admissible_defect();
    if defect > limit {
        return Err(Error::DefectTooLarge { defect, limit });
    }
    Ok(())
}

fn defects(sys: &SkewSystem, po: &PseudoOrbit) -> Vec<(f64, f64)> {
    po.points
        .windows(2)
        .enumerate()
        .map(|(k, p)| {
            let f = fiber_map(sys, sys.base_at(po.base, po.i_min + k as i64), p[0]);
            sys.hyper.split(wrap_displacement(p[1], f).as_array())
        })
        .collect()
}

fn finish(
    sys: &SkewSystem,
    po: &PseudoOrbit,
    du: &[f64],
    ds: &[f64],
    defect: f64,
    iterations: usize,
) -> Result<ShadowResult> {
    let hd = &sys.hyper;
    let mut corrections = Vec::with_capacity(du.len());
    let mut points = Vec::with_capacity(du.len());
    let mut beta: f64 = 0.0;
    for (i, (&u, &s)) in du.iter().zip(ds).enumerate() {
        let v = hd.combine(u, s);
        let d = Displacement { dx: v[0], dy: v[1] };
        beta = beta.max(d.norm());
        corrections.push(d);
        points.push(po.points[i].translate(v));
    }
    let residual = points
        .windows(2)
        .enumerate()
        .map(|(k, p)| fiber_dist(fiber_map(sys, sys.base_at(po.base, po.i_min + k as i64), p[0]), p[1]))
        .fold(0.0, f64::max);
    if po.i_min > 0 || po.i_max() < 0 {
        return Err(Error::InvalidInput("window must contain index 0".into()));
    }
    let y0 = points[(-po.i_min) as usize];
    Ok(ShadowResult {
        i_min: po.i_min,
        corrections,
        points,
        y0,
        achieved_beta: beta,
        tail_bound: tail_bound(hd, defect, -po.i_min, po.i_max()),
        defect,
        residual,
        iterations,
    })
}

/// Exact bounded solution of `δ_{i+1} = A δ_i - e_i` on the window, with the
/// unstable part summed forward and the stable part summed backward; defects
/// outside the window are taken as zero.
pub fn shadow_affine(sys: &SkewSystem, po: &PseudoOrbit, tail_tol: f64) -> Result<ShadowResult> {
    let hd = &sys.hyper;
    let e = defects(sys, po);
    let defect = e.iter().map(|&(u, s)| hd.combine(u, s)).map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
    check_admissible(&sys.consts, defect)?;
    let tb = tail_bound(hd, defect, -po.i_min, po.i_max());
    if tb > tail_tol {
        return Err(Error::WindowTooSmall { tail: tb, tol: tail_tol });
    }
    let len = po.points.len();
    let (lu, ls) = (hd.lambda_u, hd.lambda_s);
    let mut du = vec![0.0; len];
    for i in (0..len - 1).rev() {
        du[i] = (du[i + 1] + e[i].0) / lu;
    }
    let mut ds = vec![0.0; len];
    for i in 0..len - 1 {
        ds[i + 1] = ls * ds[i] - e[i].1;
    }
    finish(sys, po, &du, &ds, defect, 1)
}

/// Jacobi iteration on the shadowing equations, with residuals recomputed
/// through the fiber map at every sweep: the unstable part of the residual at
/// `i` is absorbed by `δ_i`, the stable part by `δ_{i+1}`.
pub fn shadow_fixed_point(sys: &SkewSystem, po: &PseudoOrbit, tol: f64, max_iter: usize) -> Result<ShadowResult> {
    let hd = &sys.hyper;
    let mut probe = po.clone();
    let defect = measure_defect(sys, &mut probe);
    check_admissible(&sys.consts, defect)?;
    let len = po.points.len();
    let (mut du, mut ds) = (vec![0.0; len], vec![0.0; len]);
    let mut last_change = f64::INFINITY;
    for it in 1..=max_iter {
        let y: Vec<FiberPoint> = (0..len).map(|i| po.points[i].translate(hd.combine(du[i], ds[i]))).collect();
        let r: Vec<(f64, f64)> = y
            .windows(2)
            .enumerate()
            .map(|(k, p)| {
                let f = fiber_map(sys, sys.base_at(po.base, po.i_min + k as i64), p[0]);
                hd.split(wrap_displacement(p[1], f).as_array())
            })
            .collect();
        let mut change: f64 = 0.0;
        let (mut nu, mut ns) = (du.clone(), ds.clone());
        for i in 0..len - 1 {
            let cu = r[i].0 / hd.lambda_u;
            let cs = -r[i].1;
            nu[i] += cu;
            ns[i + 1] += cs;
            change = change.max(cu.abs()).max(cs.abs());
        }
        du = nu;
        ds = ns;
        last_change = change;
        if change < tol {
            return finish(sys, po, &du, &ds, defect, it);
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, last_change })
}

/// `β` guaranteed by the exact solver for defect `α`.
pub fn shadow_bound(sc: &ShadowingConstants, _hd: &HyperbolicData, alpha: f64) -> f64 {
    sc.beta_of_alpha(alpha)
}

/// `2 e^{-Nλ} (2β + ε₀/2)`.
pub fn separation_estimate(n: usize, lambda: f64, beta: f64, eps0: f64) -> f64 {
    2.0 * (-(n as f64) * lambda).exp() * (2.0 * beta + 0.5 * eps0)
}

/// Smallest `|k| ≤ horizon` with fiber distance of `φ^k p` and `φ^k q` above `ε`,
/// trying `k` before `-k`.
pub fn expansivity_witness(
    sys: &SkewSystem,
    p: ProductPoint,
    q: ProductPoint,
    eps: f64,
    horizon: usize,
) -> Result<i64> {
    if p.base != q.base {
        return Err(Error::InvalidInput("points must share the base coordinate".into()));
    }
    if fiber_dist(p.fiber, q.fiber) > eps {
        return Ok(0);
    }
    let (mut fp, mut fq) = (p.fiber, q.fiber);
    let (mut bp, mut bq) = (p.fiber, q.fiber);
    for k in 1..=horizon as i64 {
        let w = sys.base_at(p.base, k - 1);
        fp = fiber_map(sys, w, fp);
        fq = fiber_map(sys, w, fq);
        if fiber_dist(fp, fq) > eps {
            return Ok(k);
        }
        let wb = sys.base_at(p.base, -k);
        bp = crate::system::fiber_map_inv(sys, wb, bp);
        bq = crate::system::fiber_map_inv(sys, wb, bq);
        if fiber_dist(bp, bq) > eps {
            return Ok(-k);
        }
    }
    Err(Error::NoWitness(horizon))
}
