//! Exact enumeration of returning branches of the linear part.
//!
//! For a start point `x` with float orbit `P_0..P_n` over a fixed base, the points
//! `x + c e_u` whose `n`-th iterate lands within `S` of a target `z` along `e_s`
//! correspond one-to-one to integer vectors `k` with
//!
//! ```text
//! |u(D + k)| ≤ U,   |s(D + k)| ≤ S,   D = wrap(z - P_n),
//! ```
//!
//! where `(u, s)` are eigen-coordinates and `c = u(D + k) λ_u^{-n}`. The set is a
//! long thin parallelogram of lattice points. Substituting `k = A^t k'` with
//! `λ_u^{2t} ≈ U / S` balances it, after which it is stored as one integer
//! interval per row and indexed through prefix sums.

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::system::{HyperbolicData, SkewSystem, ToralMatrix};
use crate::torus::FiberPoint;

/// A lattice point of a [`BranchSet`] with its exact eigen-coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub k: [i64; 2],
    pub a_u: Dd,
    pub a_s: Dd,
}

#[derive(Debug, Clone)]
pub struct BranchSet {
    pub u_max: f64,
    pub s_max: f64,
    u_d: Dd,
    s_d: Dd,
    t: u32,
    at: ToralMatrix,
    k1_start: i64,
    rows: Vec<i64>,
    prefix: Vec<u64>,
    f_u: [Dd; 2],
    f_s: [Dd; 2],
}

pub const MAX_ROWS: usize = 20_000_000;

fn dd_dot(f: [Dd; 2], v: [f64; 2]) -> Dd {
    f[0] * v[0] + f[1] * v[1]
}

fn dd_dot_int(f: [Dd; 2], k: [i64; 2]) -> Dd {
    f[0] * Dd::from_i64(k[0]) + f[1] * Dd::from_i64(k[1])
}

impl BranchSet {
    pub fn new(matrix: &ToralMatrix, hd: &HyperbolicData, d: [f64; 2], u_max: f64, s_max: f64) -> Result<BranchSet> {
        if !(u_max > 0.0 && s_max > 0.0) || !u_max.is_finite() {
            return Err(Error::InvalidInput(format!(
                "branch box must be positive and finite, got U={u_max}, S={s_max}"
            )));
        }
        let dd = hd.dd;
        let u_d = dd_dot(dd.f_u, d);
        let s_d = dd_dot(dd.f_s, d);
        let lam = hd.lambda_u.abs();
        let t = ((u_max / s_max).ln() / (2.0 * lam.ln())).round().max(0.0) as u32;
        let at = matrix
            .pow(t)
            .filter(|m| [m.a11, m.a12, m.a21, m.a22].iter().all(|x| x.abs() < 1 << 50))
            .ok_or_else(|| Error::BudgetExhausted(format!("balancing power A^{t} overflows")))?;
        let lt_u = hd.lambda_u.powi(t as i32);
        let lt_s = hd.lambda_s.powi(t as i32);
        let (ud, sd) = (u_d.to_f64(), s_d.to_f64());
        let iv = |lo: f64, hi: f64, scale: f64| {
            let (a, b) = (lo / scale, hi / scale);
            if a <= b {
                (a, b)
            } else {
                (b, a)
            }
        };
        let (ul, uh) = iv(-u_max - ud, u_max - ud, lt_u);
        let (sl, sh) = iv(-s_max - sd, s_max - sd, lt_s);
        let (eu, es, fu, fs) = (hd.e_u, hd.e_s, hd.f_u, hd.f_s);
        let corners = [(ul, sl), (ul, sh), (uh, sl), (uh, sh)];
        let xs: Vec<f64> = corners.iter().map(|&(u, s)| u * eu[0] + s * es[0]).collect();
        let xmin = xs.iter().cloned().fold(f64::INFINITY, f64::min).ceil() as i64;
        let xmax = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max).floor() as i64;
        let nrows = if xmax >= xmin { (xmax - xmin + 1) as usize } else { 0 };
        if nrows > MAX_ROWS {
            return Err(Error::BudgetExhausted(format!("branch set needs {nrows} rows")));
        }
        let mut rows = Vec::with_capacity(nrows);
        let mut prefix = Vec::with_capacity(nrows + 1);
        prefix.push(0u64);
        let range = |f: [f64; 2], lo: f64, hi: f64, k1: f64| {
            let (a, b) = ((lo - f[0] * k1) / f[1], (hi - f[0] * k1) / f[1]);
            if a <= b {
                (a, b)
            } else {
                (b, a)
            }
        };
        for k1 in xmin..=xmax.max(xmin - 1) {
            let (a1, b1) = range(fu, ul, uh, k1 as f64);
            let (a2, b2) = range(fs, sl, sh, k1 as f64);
            let lo = a1.max(a2).ceil() as i64;
            let hi = b1.min(b2).floor() as i64;
            let cnt = if hi >= lo { (hi - lo + 1) as u64 } else { 0 };
            rows.push(lo);
            prefix.push(prefix.last().unwrap() + cnt);
        }
        Ok(BranchSet { u_max, s_max, u_d, s_d, t, at, k1_start: xmin, rows, prefix, f_u: dd.f_u, f_s: dd.f_s })
    }

    pub fn len(&self) -> u64 {
        *self.prefix.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn balancing_power(&self) -> u32 {
        self.t
    }

    /// The `idx`-th lattice point in row order.
    pub fn get(&self, idx: u64) -> Option<Branch> {
        if idx >= self.len() {
            return None;
        }
        let r = self.prefix.partition_point(|&c| c <= idx) - 1;
        let kp = [self.k1_start + r as i64, self.rows[r] + (idx - self.prefix[r]) as i64];
        let k = self.at.apply_int(kp)?;
        Some(Branch { k, a_u: self.u_d + dd_dot_int(self.f_u, k), a_s: self.s_d + dd_dot_int(self.f_s, k) })
    }

    /// Branch with the smallest `|a_u|`, scanning every point.
    pub fn min_unstable(&self) -> Option<Branch> {
        (0..self.len())
            .filter_map(|i| self.get(i))
            .min_by(|a, b| a.a_u.abs().to_f64().partial_cmp(&b.a_u.abs().to_f64()).unwrap())
    }
}

/// The point `P_j + a_u λ_u^{j-n} e_u` for `j = 0..=n`, reduced mod 1 in
/// double-double so large `a_u` keep full precision.
pub fn branch_segment(hd: &HyperbolicData, orbit: &[FiberPoint], a_u: Dd) -> Vec<FiberPoint> {
    let n = orbit.len() - 1;
    let inv = hd.dd.lambda_u.recip();
    let mut w = a_u;
    let mut out = vec![FiberPoint::default(); n + 1];
    for j in (0..=n).rev() {
        let p = orbit[j];
        let dx = (w * hd.dd.e_u[0]).frac();
        let dy = (w * hd.dd.e_u[1]).frac();
        out[j] = FiberPoint::new(p.x.value() + dx, p.y.value() + dy);
        w = w * inv;
    }
    out
}

/// Smallest-`|a_u|` branch with `|a_s| ≤ s_max`, `|a_u| ≤ u_limit`, growing the
/// search box from a size expected to hold a few points.
pub fn smallest_branch(sys: &SkewSystem, d: [f64; 2], s_max: f64, u_limit: f64) -> Result<Option<Branch>> {
    let hd = &sys.hyper;
    let sin = (1.0 - hd.cos_angle().powi(2)).sqrt();
    let mut u = (4.0 * sin / s_max).min(u_limit);
    let cap = 1e15f64.min(u_limit);
    loop {
        let set = BranchSet::new(&sys.matrix, hd, d, u, s_max)?;
        if let Some(b) = set.min_unstable() {
            return Ok(Some(b));
        }
        if u >= cap {
            return Ok(None);
        }
        u = (u * 2.0).min(cap);
    }
}

/// `min over nonzero integer k of |u(k) s(k)|`, which is `|f_u[0] f_s[0] / a21|`
/// because `u(k)s(k)` is that constant times an integer binary quadratic form
/// without rational zeros.
pub fn norm_form_constant(matrix: &ToralMatrix, hd: &HyperbolicData) -> f64 {
    (hd.f_u[0] * hd.f_s[0] / matrix.a21 as f64).abs()
}
