//! The skew product `φ(x, ω) = (A x + h(ω), ω + α)`, its hyperbolic splitting and
//! the shadowing constants derived from it.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::torus::{fiber_dist, Angle, FiberPoint, ProductPoint};

/// Integer 2×2 matrix with determinant ±1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToralMatrix {
    pub a11: i64,
    pub a12: i64,
    pub a21: i64,
    pub a22: i64,
}

impl ToralMatrix {
    pub fn new(a11: i64, a12: i64, a21: i64, a22: i64) -> Result<ToralMatrix> {
        let m = ToralMatrix { a11, a12, a21, a22 };
        let det = m.det();
        if det.abs() != 1 {
            return Err(Error::NotUnimodular(det));
        }
        Ok(m)
    }

    pub fn det(&self) -> i64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn trace(&self) -> i64 {
        self.a11 + self.a22
    }

    /// Exact integer inverse.
    pub fn inverse(&self) -> ToralMatrix {
        let d = self.det();
        ToralMatrix { a11: d * self.a22, a12: -d * self.a12, a21: -d * self.a21, a22: d * self.a11 }
    }

    pub fn mul(&self, o: &ToralMatrix) -> Option<ToralMatrix> {
        let e = |a: i64, b: i64, c: i64, d: i64| a.checked_mul(b)?.checked_add(c.checked_mul(d)?);
        Some(ToralMatrix {
            a11: e(self.a11, o.a11, self.a12, o.a21)?,
            a12: e(self.a11, o.a12, self.a12, o.a22)?,
            a21: e(self.a21, o.a11, self.a22, o.a21)?,
            a22: e(self.a21, o.a12, self.a22, o.a22)?,
        })
    }

    /// `A^k` for `k ≥ 0`, `None` on overflow.
    pub fn pow(&self, k: u32) -> Option<ToralMatrix> {
        let mut acc = ToralMatrix { a11: 1, a12: 0, a21: 0, a22: 1 };
        for _ in 0..k {
            acc = acc.mul(self)?;
        }
        Some(acc)
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.a11 as f64 * v[0] + self.a12 as f64 * v[1], self.a21 as f64 * v[0] + self.a22 as f64 * v[1]]
    }

    pub fn apply_int(&self, v: [i64; 2]) -> Option<[i64; 2]> {
        let r0 = self.a11.checked_mul(v[0])?.checked_add(self.a12.checked_mul(v[1])?)?;
        let r1 = self.a21.checked_mul(v[0])?.checked_add(self.a22.checked_mul(v[1])?)?;
        Some([r0, r1])
    }
}

/// One trigonometric term `c·cos(2πkω) + s·sin(2πkω)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub k: u32,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// The forcing `h: T¹ → T²`, given by its lift
/// `H_i(ω) = n_i ω + offset_i + Σ trig terms`, so `H(ω + 1) = H(ω) + (n₁, n₂)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Forcing {
    pub degrees: (i64, i64),
    #[serde(default)]
    pub offset: [f64; 2],
    #[serde(default)]
    pub terms: [Vec<TrigTerm>; 2],
}

impl Forcing {
    pub fn zero() -> Forcing {
        Forcing::default()
    }

    pub fn constant(c: [f64; 2]) -> Forcing {
        Forcing { offset: c, ..Forcing::default() }
    }

    pub fn lift(&self, w: f64) -> [f64; 2] {
        let deg = [self.degrees.0, self.degrees.1];
        let mut out = [0.0; 2];
        for i in 0..2 {
            let mut v = deg[i] as f64 * w + self.offset[i];
            for t in &self.terms[i] {
                let a = TAU * t.k as f64 * w;
                v += t.cos * a.cos() + t.sin * a.sin();
            }
            out[i] = v;
        }
        out
    }

    pub fn eval(&self, w: Angle) -> [f64; 2] {
        self.lift(w.value())
    }

    /// Upper bound for the Lipschitz constant of `h` in the Euclidean norm.
    pub fn lipschitz(&self) -> f64 {
        let deg = [self.degrees.0, self.degrees.1];
        let mut l = [0.0f64; 2];
        for i in 0..2 {
            l[i] = deg[i].abs() as f64
                + self.terms[i].iter().map(|t| TAU * t.k as f64 * (t.cos.abs() + t.sin.abs())).sum::<f64>();
        }
        l[0].hypot(l[1])
    }

    pub fn is_zero(&self) -> bool {
        self.degrees == (0, 0)
            && self.offset == [0.0, 0.0]
            && self.terms.iter().all(|ts| ts.iter().all(|t| t.cos == 0.0 && t.sin == 0.0))
    }
}

/// Double-double copies of the splitting, used when reconstructing long branch orbits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplittingDd {
    pub lambda_u: Dd,
    pub lambda_s: Dd,
    pub e_u: [Dd; 2],
    pub e_s: [Dd; 2],
    pub f_u: [Dd; 2],
    pub f_s: [Dd; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HyperbolicData {
    pub lambda_u: f64,
    pub lambda_s: f64,
    pub e_u: [f64; 2],
    pub e_s: [f64; 2],
    /// Dual basis: `f_u·e_u = 1`, `f_u·e_s = 0` and symmetrically.
    pub f_u: [f64; 2],
    pub f_s: [f64; 2],
    pub lambda0: f64,
    pub proj_norm: f64,
    pub lip_l: f64,
    #[serde(skip)]
    pub dd: SplittingDd,
}

impl HyperbolicData {
    /// Unstable and stable coordinates of a vector.
    pub fn split(&self, v: [f64; 2]) -> (f64, f64) {
        (dot(self.f_u, v), dot(self.f_s, v))
    }

    pub fn combine(&self, u: f64, s: f64) -> [f64; 2] {
        [u * self.e_u[0] + s * self.e_s[0], u * self.e_u[1] + s * self.e_s[1]]
    }

    /// `|cos|` of the angle between the eigenlines.
    pub fn cos_angle(&self) -> f64 {
        dot(self.e_u, self.e_s).abs()
    }
}

pub(crate) fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn hyperbolic_data(a: &ToralMatrix) -> Result<HyperbolicData> {
    let tr = a.trace();
    let det = a.det();
    let disc = tr * tr - 4 * det;
    if disc <= 0 {
        let m = (det.abs() as f64).sqrt();
        return Err(Error::NotHyperbolic(m, m));
    }
    let root = Dd::from_i64(disc).sqrt();
    let sign = if tr >= 0 { 1.0 } else { -1.0 };
    let lu = (Dd::from_i64(tr) + root * sign) * 0.5;
    let ls = Dd::from_i64(det) / lu;
    let (lu_f, ls_f) = (lu.to_f64(), ls.to_f64());
    if (lu_f.abs() - 1.0).abs() <= 1e-12 || (ls_f.abs() - 1.0).abs() <= 1e-12 {
        return Err(Error::NotHyperbolic(lu_f.abs(), ls_f.abs()));
    }
    // Hyperbolic integer matrices have a12 ≠ 0, so (a12, λ - a11) is an eigenvector.
    let eig = |l: Dd| -> [Dd; 2] {
        let v = [Dd::from_i64(a.a12), l - Dd::from_i64(a.a11)];
        let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
        let s = if a.a12 > 0 { 1.0 } else { -1.0 };
        [v[0] / n * s, v[1] / n * s]
    };
    let e_u = eig(lu);
    let e_s = eig(ls);
    let det_m = e_u[0] * e_s[1] - e_s[0] * e_u[1];
    let f_u = [e_s[1] / det_m, -e_s[0] / det_m];
    let f_s = [-e_u[1] / det_m, e_u[0] / det_m];
    let dd = SplittingDd { lambda_u: lu, lambda_s: ls, e_u, e_s, f_u, f_s };
    let f = |v: [Dd; 2]| [v[0].to_f64(), v[1].to_f64()];
    let norm = |v: [f64; 2]| v[0].hypot(v[1]);
    let (fu, fs) = (f(f_u), f(f_s));
    let sq = [a.a11, a.a12, a.a21, a.a22].iter().map(|&x| (x * x) as f64).sum::<f64>();
    let lip_l = ((sq + (sq * sq - 4.0 * (det * det) as f64).max(0.0).sqrt()) / 2.0).sqrt();
    Ok(HyperbolicData {
        lambda_u: lu_f,
        lambda_s: ls_f,
        e_u: f(e_u),
        e_s: f(e_s),
        f_u: fu,
        f_s: fs,
        lambda0: lu_f.abs().ln().min(-ls_f.abs().ln()),
        proj_norm: norm(fu).max(norm(fs)),
        lip_l,
        dd,
    })
}

/// Constants of the shadowing argument for the affine system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShadowingConstants {
    pub eps0: f64,
    pub delta_lps: f64,
    pub beta0: f64,
    /// Worst-case correction from a unit unstable-part defect sequence.
    pub unstable_gain: f64,
    /// Worst-case correction from a unit stable-part defect sequence.
    pub stable_gain: f64,
    /// `β / α` for the exact solver: sharp sup of the correction over unit defects.
    pub bound_factor: f64,
}

impl ShadowingConstants {
    pub fn alpha_of_beta(&self, beta: f64) -> f64 {
        beta / self.bound_factor
    }

    pub fn beta_of_alpha(&self, alpha: f64) -> f64 {
        alpha * self.bound_factor
    }

    /// Largest defect the shadowing solvers accept (β₀ with a 10% margin).
    pub fn admissible_defect(&self) -> f64 {
        self.alpha_of_beta(0.9 * self.beta0)
    }
}

pub fn shadowing_constants(hd: &HyperbolicData) -> ShadowingConstants {
    let eps0 = 0.25;
    let delta_lps = eps0 / (2.0 * hd.proj_norm);
    let beta0 = 0.99 * delta_lps / 3.0;
    let nu = hd.f_u[0].hypot(hd.f_u[1]);
    let ns = hd.f_s[0].hypot(hd.f_s[1]);
    let unstable_gain = nu / (hd.lambda_u.abs() - 1.0);
    let stable_gain = ns / (1.0 - hd.lambda_s.abs());
    // The unstable and stable parts at one index come from disjoint defects, so
    // their signs are independent and the worst case is the longer diagonal.
    let c = hd.cos_angle();
    let bound_factor =
        (unstable_gain * unstable_gain + stable_gain * stable_gain + 2.0 * unstable_gain * stable_gain * c).sqrt();
    ShadowingConstants { eps0, delta_lps, beta0, unstable_gain, stable_gain, bound_factor }
}

/// A fixed system with its derived data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkewSystem {
    pub matrix: ToralMatrix,
    pub inverse: ToralMatrix,
    pub forcing: Forcing,
    pub rotation: f64,
    pub grid_size: usize,
    pub hyper: HyperbolicData,
    pub consts: ShadowingConstants,
}

pub const GOLDEN: f64 = 0.618_033_988_749_894_9;

impl SkewSystem {
    pub fn new(matrix: ToralMatrix, forcing: Forcing, rotation: f64, grid_size: usize) -> Result<SkewSystem> {
        ToralMatrix::new(matrix.a11, matrix.a12, matrix.a21, matrix.a22)?;
        let hyper = hyperbolic_data(&matrix)?;
        let rotation = Angle::new(rotation).value();
        if let Some((p, q)) = rational_witness(rotation, 1_000_000, 1e-15) {
            return Err(Error::InvalidInput(format!("rotation {rotation} is within 1e-15 of {p}/{q}")));
        }
        if grid_size == 0 {
            return Err(Error::InvalidInput("grid size must be positive".into()));
        }
        Ok(SkewSystem {
            matrix,
            inverse: matrix.inverse(),
            forcing,
            rotation,
            grid_size,
            consts: shadowing_constants(&hyper),
            hyper,
        })
    }

    /// `θ^j ω₀`, reduced once.
    pub fn base_at(&self, w0: Angle, j: i64) -> Angle {
        Angle::new(w0.value() + j as f64 * self.rotation)
    }

    /// Reporting grid `ω_j = j / G`.
    pub fn grid(&self) -> Vec<Angle> {
        uniform_grid(self.grid_size)
    }

    /// Lift of `A x + h(ω)` before reduction.
    pub fn fiber_map_lift(&self, w: Angle, x: [f64; 2]) -> [f64; 2] {
        let ax = self.matrix.apply(x);
        let h = self.forcing.eval(w);
        [ax[0] + h[0], ax[1] + h[1]]
    }
}

pub fn uniform_grid(g: usize) -> Vec<Angle> {
    (0..g).map(|j| Angle::new(j as f64 / g as f64)).collect()
}

/// A convergent `p/q` with `q ≤ max_q` lying within `tol` of `x`, if any.
/// Uses the exact continued fraction of the binary value of `x`.
pub fn rational_witness(x: f64, max_q: i128, tol: f64) -> Option<(i128, i128)> {
    let x = x - x.floor();
    if x == 0.0 {
        return Some((0, 1));
    }
    // x = num / den exactly, den a power of two.
    let mut den: i128 = 1 << 62;
    let mut num: i128 = (x * den as f64) as i128;
    while num % 2 == 0 && den > 1 {
        num /= 2;
        den /= 2;
    }
    let (x_num, x_den) = (num, den);
    let (mut p0, mut q0, mut p1, mut q1) = (0i128, 1i128, 1i128, 0i128);
    let (mut a, mut b) = (num, den);
    while b != 0 {
        let t = a / b;
        let (p2, q2) = (t * p1 + p0, t * q1 + q0);
        if q2 > max_q {
            break;
        }
        let err = ((x_num * q2 - p2 * x_den) as f64 / x_den as f64 / q2 as f64).abs();
        if q2 > 0 && err <= tol {
            return Some((p2, q2));
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        let r = a - t * b;
        a = b;
        b = r;
    }
    None
}

pub fn fiber_map(sys: &SkewSystem, w: Angle, x: FiberPoint) -> FiberPoint {
    let l = sys.fiber_map_lift(w, x.coords());
    FiberPoint::new(l[0], l[1])
}

/// Inverse of the fiber map over base `w`: `A⁻¹(x' - h(w))`.
pub fn fiber_map_inv(sys: &SkewSystem, w: Angle, x: FiberPoint) -> FiberPoint {
    let h = sys.forcing.eval(w);
    let d = [x.x.value() - h[0], x.y.value() - h[1]];
    let d = [d[0] - d[0].floor(), d[1] - d[1].floor()];
    let r = sys.inverse.apply(d);
    FiberPoint::new(r[0], r[1])
}

pub fn cocycle_iterate(sys: &SkewSystem, p: ProductPoint, n: i64) -> ProductPoint {
    let mut x = p.fiber;
    if n >= 0 {
        for j in 0..n {
            x = fiber_map(sys, sys.base_at(p.base, j), x);
        }
    } else {
        for j in 1..=(-n) {
            x = fiber_map_inv(sys, sys.base_at(p.base, -j), x);
        }
    }
    ProductPoint::new(x, sys.base_at(p.base, n))
}

/// Fiber coordinates of `φ^j(p)` for `j = 0..=n`.
pub fn fiber_orbit(sys: &SkewSystem, p: ProductPoint, n: usize) -> Vec<FiberPoint> {
    let mut out = Vec::with_capacity(n + 1);
    let mut x = p.fiber;
    out.push(x);
    for j in 0..n {
        x = fiber_map(sys, sys.base_at(p.base, j as i64), x);
        out.push(x);
    }
    out
}

/// Lyapunov exponents by QR-orthogonalized products of the derivative cocycle.
const BURN_IN: usize = 64;

pub fn lyapunov_estimate(sys: &SkewSystem, p: ProductPoint, n: usize) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidInput("lyapunov_estimate needs N >= 1".into()));
    }
    // The derivative is A at every point; p only fixes the orbit being followed.
    let _ = p;
    let mut q = [[1.0, 0.0], [0.0, 1.0]];
    let (mut s1, mut s2) = (0.0, 0.0);
    // The first BURN_IN steps align Q with the Oseledets frame and are not averaged.
    for step in 0..BURN_IN + n {
        let c1 = sys.matrix.apply([q[0][0], q[1][0]]);
        let c2 = sys.matrix.apply([q[0][1], q[1][1]]);
        let r11 = c1[0].hypot(c1[1]);
        let q1 = [c1[0] / r11, c1[1] / r11];
        let r12 = dot(q1, c2);
        let w = [c2[0] - r12 * q1[0], c2[1] - r12 * q1[1]];
        let r22 = w[0].hypot(w[1]);
        let q2 = [w[0] / r22, w[1] / r22];
        q = [[q1[0], q2[0]], [q1[1], q2[1]]];
        if step >= BURN_IN {
            s1 += r11.ln();
            s2 += r22.ln();
        }
    }
    Ok((s1 / n as f64, s2 / n as f64))
}

/// An open ball in `M`. A radius of at least `√2/2` covers the whole torus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberBall {
    pub center: FiberPoint,
    pub radius: f64,
}

impl FiberBall {
    pub fn contains(&self, p: FiberPoint) -> bool {
        self.radius >= std::f64::consts::FRAC_1_SQRT_2 || fiber_dist(self.center, p) < self.radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingReport {
    /// Least `N₀` such that every tested `(n, ω)` with `n ≥ N₀` intersects.
    pub n0: Option<usize>,
    /// Per `n`: number of grid points whose image met `V`.
    pub hits: Vec<(usize, usize)>,
    pub grid: usize,
    pub samples_used: usize,
}

/// Checks `φⁿ({ω} × U) ∩ ({θⁿω} × V) ≠ ∅` on a grid of `ω` for `n = 1..=n_max`.
///
/// The image of the unstable segment through the center of `U` is exactly
/// `φⁿ(c) + t λ_uⁿ e_u`, sampled at spacing below the radius of `V`.
pub fn check_fiber_mixing(
    sys: &SkewSystem,
    u: FiberBall,
    v: FiberBall,
    n_max: usize,
    grid: usize,
    max_samples: usize,
) -> Result<MixingReport> {
    if u.radius <= 0.0 || v.radius <= 0.0 {
        return Err(Error::InvalidInput("fiber balls must have positive radius".into()));
    }
    if grid == 0 || n_max == 0 {
        return Err(Error::InvalidInput("grid and N must be positive".into()));
    }
    let hd = &sys.hyper;
    let half = u.radius.min(0.5) * 0.999;
    let spacing = v.radius.min(0.5) / 2.0;
    let mut hits = Vec::with_capacity(n_max);
    let mut samples_used = 0usize;
    for n in 1..=n_max {
        let stretch = half * hd.lambda_u.abs().powi(n as i32);
        let count =
            if v.radius >= std::f64::consts::FRAC_1_SQRT_2 { 1 } else { (2.0 * stretch / spacing).ceil() as usize + 1 };
        if count > max_samples {
            return Err(Error::Undecided(format!(
                "n = {n} needs {count} samples along the image, cap is {max_samples}"
            )));
        }
        samples_used = samples_used.max(count);
        let mut ok = 0;
        for w in uniform_grid(grid) {
            let c = cocycle_iterate(sys, ProductPoint::new(u.center, w), n as i64).fiber;
            let mut hit = false;
            for i in 0..count {
                let t = if count == 1 { 0.0 } else { -stretch + 2.0 * stretch * i as f64 / (count - 1) as f64 };
                let p = c.translate(hd.combine(t, 0.0));
                if v.contains(p) {
                    hit = true;
                    break;
                }
            }
            if hit {
                ok += 1;
            }
        }
        hits.push((n, ok));
    }
    let mut n0 = None;
    for &(n, ok) in hits.iter().rev() {
        if ok == grid {
            n0 = Some(n);
        } else {
            break;
        }
    }
    Ok(MixingReport { n0, hits, grid, samples_used })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_is_irrational_and_halves_are_not() {
        assert!(rational_witness(GOLDEN, 1_000_000, 1e-15).is_none());
        assert_eq!(rational_witness(0.5, 1_000_000, 1e-15), Some((1, 2)));
        assert!(rational_witness(1.0 / 3.0, 1_000_000, 1e-15).is_some());
        assert!(rational_witness(0.0, 1_000_000, 1e-15).is_some());
    }

    #[test]
    fn integer_inverse() {
        let a = ToralMatrix::new(1, 1, 2, 1).unwrap();
        let i = a.mul(&a.inverse()).unwrap();
        assert_eq!(i, ToralMatrix { a11: 1, a12: 0, a21: 0, a22: 1 });
    }

    #[test]
    fn rejects_non_unimodular() {
        assert_eq!(ToralMatrix::new(2, 0, 0, 1), Err(Error::NotUnimodular(2)));
    }
}
