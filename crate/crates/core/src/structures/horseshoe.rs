use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{GraphFunction, GraphKind};
use crate::error::{Error, Result};
use crate::lattice::{branch_segment, norm_form_constant, Branch, BranchSet};
use crate::pseudo_orbit::{build_horseshoe_pseudo_orbit, measure_defect, segment_residual, BasePartition};
use crate::shadowing::{shadow_affine, window_for_tolerance, ShadowResult};
use crate::system::{fiber_orbit, HyperbolicData, SkewSystem};
use crate::torus::{fiber_dist, wrap_displacement, wrap_half, Angle, FiberPoint, ProductPoint};

/// A two-sided word over `{1..k}` with finite support; symbol 1 elsewhere.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SymbolWord {
    pub k: u64,
    pub entries: BTreeMap<i64, u64>,
}

impl SymbolWord {
    pub fn ones(k: u64) -> SymbolWord {
        SymbolWord { k, entries: BTreeMap::new() }
    }

    pub fn new(k: u64, entries: BTreeMap<i64, u64>) -> Result<SymbolWord> {
        if let Some((i, &a)) = entries.iter().find(|(_, &a)| a == 0 || a > k) {
            return Err(Error::InvalidInput(format!("symbol {a} at index {i} outside 1..={k}")));
        }
        let entries = entries.into_iter().filter(|&(_, a)| a != 1).collect();
        Ok(SymbolWord { k, entries })
    }

    /// Uniform symbols on `[lo, hi]`.
    pub fn random<R: Rng>(k: u64, lo: i64, hi: i64, rng: &mut R) -> SymbolWord {
        let entries = (lo..=hi).map(|i| (i, rng.gen_range(1..=k))).collect();
        SymbolWord::new(k, entries).expect("symbols drawn in range")
    }

    pub fn get(&self, l: i64) -> u64 {
        self.entries.get(&l).copied().unwrap_or(1)
    }

    pub fn with(&self, l: i64, a: u64) -> SymbolWord {
        let mut e = self.entries.clone();
        e.insert(l, a);
        SymbolWord::new(self.k, e).expect("symbol in range")
    }

    /// Left shift: `(σa)_l = a_{l+1}`.
    pub fn shift(&self) -> SymbolWord {
        SymbolWord { k: self.k, entries: self.entries.iter().map(|(&i, &a)| (i - 1, a)).collect() }
    }

    /// `min{|i| : a(i) ≠ b(i)}`, `None` for equal words.
    pub fn first_difference(&self, other: &SymbolWord) -> Option<u64> {
        self.entries
            .keys()
            .chain(other.entries.keys())
            .filter(|&&i| self.get(i) != other.get(i))
            .map(|i| i.unsigned_abs())
            .min()
    }
}

/// One strip's returning set: every label is a lattice branch of the linear
/// part around the float orbit of `(x₀, ω_i)`.
#[derive(Debug, Clone, Serialize)]
pub struct StripSet {
    pub base: Angle,
    pub count: u64,
    #[serde(skip)]
    pub orbit: Vec<FiberPoint>,
    #[serde(skip)]
    pub branches: BranchSet,
    #[serde(skip)]
    pub order: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeparationCertificate {
    /// All branches pairwise separated: distinct branches differ along `e_u` at
    /// the end by at least `c_N / (2 r_end)`, which exceeds `|λ_u| α`.
    NormForm { c_n: f64, min_unstable_gap: f64, required: f64 },
    /// Greedy extraction with explicit Bowen distances.
    Explicit { candidates: u64, selected: u64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparatedFamily {
    pub partition: BasePartition,
    pub delta2: f64,
    pub n: usize,
    pub k: u64,
    pub alpha: f64,
    pub x0: FiberPoint,
    pub gamma: f64,
    pub h_target: f64,
    /// `(1/n) ln k`.
    pub rate: f64,
    pub r_start: f64,
    pub r_end: f64,
    pub strips: Vec<StripSet>,
    pub certificate: SeparationCertificate,
    /// Smallest Bowen distance over sampled label pairs.
    pub sampled_min_dn: f64,
    pub sampled_pairs: usize,
    /// Largest start/end distance to `x₀` over sampled labels.
    pub sampled_e1: f64,
    #[serde(skip)]
    pub hyper: HyperbolicData,
}

impl SeparatedFamily {
    pub fn branch(&self, strip: usize, label: u64) -> Branch {
        let s = &self.strips[strip];
        let idx = s.order.as_ref().map_or(label, |o| o[label as usize]);
        s.branches.get(idx).expect("label within family")
    }

    /// Fiber points of `φ^j` of the labelled point for `j = 0..=n`.
    pub fn segment(&self, strip: usize, label: u64) -> Vec<FiberPoint> {
        branch_segment(&self.hyper, &self.strips[strip].orbit, self.branch(strip, label).a_u)
    }

    pub fn point(&self, strip: usize, label: u64) -> ProductPoint {
        ProductPoint::new(self.segment(strip, label)[0], self.strips[strip].base)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaptureOptions {
    pub delta2: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub n0: usize,
    pub n_max: usize,
    pub x0: FiberPoint,
    /// Largest candidate count handled by explicit greedy extraction.
    pub explicit_cap: u64,
    pub sample_pairs: usize,
    pub seed: u64,
}

impl Default for CaptureOptions {
    fn default() -> Self {
        CaptureOptions {
            delta2: 0.005,
            gamma: 0.3,
            alpha: 0.05,
            n0: 1,
            n_max: 60,
            x0: FiberPoint::default(),
            explicit_cap: 2048,
            sample_pairs: 2000,
            seed: 0,
        }
    }
}

/// Bowen distance over `n` iterates of two points sharing a base.
fn segment_dn(a: &[FiberPoint], b: &[FiberPoint], n: usize) -> f64 {
    (0..n).map(|j| fiber_dist(a[j], b[j])).fold(0.0, f64::max)
}

/// Captures equal-size `(n, α)`-separated sets returning to their strips, raising
/// `n` from `n0` until `(1/n) ln k ≥ ln|λ_u| - γ`.
///
/// Returners are enumerated exactly: with all points of strip `i` on the line
/// `x₀ + c e_u` over the base `ω_i`, the points whose `n`-th iterate comes back
/// within `r_end` of `x₀` are lattice branches (see [`BranchSet`]).
pub fn capture_separated_family(
    sys: &SkewSystem,
    xi: &BasePartition,
    opts: &CaptureOptions,
) -> Result<SeparatedFamily> {
    if !(opts.gamma > 0.0 && opts.delta2 > 0.0 && opts.alpha > 0.0) || opts.n0 == 0 {
        return Err(Error::InvalidInput("gamma, delta2, alpha and n0 must be positive".into()));
    }
    let hd = &sys.hyper;
    let lam = hd.lambda_u.abs();
    let h_target = lam.ln();
    let rate = h_target - opts.gamma;
    let defect_target = 0.95 * (opts.alpha / 8.0) / sys.consts.bound_factor.max(1.0);
    let r_end = opts.delta2.min(defect_target);
    let r_start = opts.delta2.min(defect_target / lam);
    let c_n = norm_form_constant(&sys.matrix, hd);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    'n: for n in opts.n0..=opts.n_max {
        let k_needed = if rate <= 0.0 { 1.0 } else { (n as f64 * rate).exp().ceil() };
        if k_needed > 4e18 {
            break;
        }
        let k_needed = k_needed as u64;
        let t = wrap_half(n as f64 * sys.rotation);
        let u_max = r_start * lam.powi(n as i32);
        let mut strips = Vec::with_capacity(xi.p());
        let mut certificate = None;
        for i in 0..xi.p() {
            let Some(base) = xi.admissible_base(i, t) else { continue 'n };
            let orbit = fiber_orbit(sys, ProductPoint::new(opts.x0, base), n);
            let d = wrap_displacement(opts.x0, orbit[n]).as_array();
            let branches = BranchSet::new(&sys.matrix, hd, d, u_max, r_end)?;
            let count = branches.len();
            if count < k_needed {
                continue 'n;
            }
            let min_gap = c_n / (2.0 * r_end);
            let required = lam * opts.alpha;
            let mut order = None;
            if lam * opts.alpha < 0.5 - opts.alpha && min_gap > required {
                certificate.get_or_insert(SeparationCertificate::NormForm { c_n, min_unstable_gap: min_gap, required });
            } else if count <= opts.explicit_cap {
                let segs: Vec<Vec<FiberPoint>> =
                    (0..count).map(|j| branch_segment(hd, &orbit, branches.get(j).expect("in range").a_u)).collect();
                let mut chosen: Vec<u64> = Vec::new();
                for j in 0..count {
                    if chosen.iter().all(|&c| segment_dn(&segs[c as usize], &segs[j as usize], n) > opts.alpha) {
                        chosen.push(j);
                    }
                }
                if (chosen.len() as u64) < k_needed {
                    continue 'n;
                }
                certificate =
                    Some(SeparationCertificate::Explicit { candidates: count, selected: chosen.len() as u64 });
                order = Some(chosen);
            } else {
                continue 'n;
            }
            strips.push(StripSet { base, count, orbit, branches, order });
        }
        let mut fam = SeparatedFamily {
            partition: xi.clone(),
            delta2: opts.delta2,
            n,
            k: k_needed,
            alpha: opts.alpha,
            x0: opts.x0,
            gamma: opts.gamma,
            h_target,
            rate: (k_needed as f64).ln() / n as f64,
            r_start,
            r_end,
            strips,
            certificate: certificate.expect("at least one strip"),
            sampled_min_dn: f64::INFINITY,
            sampled_pairs: 0,
            sampled_e1: 0.0,
            hyper: *hd,
        };
        verify_family(sys, &mut fam, opts.sample_pairs, &mut rng)?;
        return Ok(fam);
    }
    Err(Error::BudgetExhausted(format!(
        "no n <= {} reaches rate {:.6} with delta2 = {}",
        opts.n_max, rate, opts.delta2
    )))
}

/// Sampled checks of E1 and E2 plus the residual of the branch segments.
fn verify_family<R: Rng>(sys: &SkewSystem, fam: &mut SeparatedFamily, pairs: usize, rng: &mut R) -> Result<()> {
    let n = fam.n;
    let mut e1: f64 = 0.0;
    let mut min_dn = f64::INFINITY;
    let mut done = 0;
    for i in 0..fam.strips.len() {
        let base = fam.strips[i].base;
        let mut labels = vec![0, fam.k - 1];
        labels.extend((0..16).map(|_| rng.gen_range(0..fam.k)));
        for &l in &labels {
            let seg = fam.segment(i, l);
            e1 = e1.max(fiber_dist(seg[0], fam.x0)).max(fiber_dist(seg[n], fam.x0));
            let res = segment_residual(sys, base, &seg);
            if res > 1e-12 {
                return Err(Error::CertificateFailed(format!("branch residual {res:.3e}")));
            }
        }
        if fam.k >= 2 {
            let per_strip = pairs.div_ceil(fam.strips.len());
            let picks: Vec<(u64, u64)> = (0..per_strip)
                .map(|j| {
                    if j == 0 {
                        (0, 1)
                    } else {
                        let a = rng.gen_range(0..fam.k);
                        let mut b = rng.gen_range(0..fam.k - 1);
                        if b >= a {
                            b += 1;
                        }
                        (a, b)
                    }
                })
                .collect();
            let m = picks
                .par_iter()
                .map(|&(a, b)| segment_dn(&fam.segment(i, a), &fam.segment(i, b), n))
                .reduce(|| f64::INFINITY, f64::min);
            min_dn = min_dn.min(m);
            done += picks.len();
        }
    }
    if e1 > fam.delta2 {
        return Err(Error::CertificateFailed(format!("E1 violated: distance {e1:.3e} > {}", fam.delta2)));
    }
    if done > 0 && min_dn <= fam.alpha {
        return Err(Error::CertificateFailed(format!("E2 violated: sampled Bowen distance {min_dn:.3e}")));
    }
    fam.sampled_e1 = e1;
    fam.sampled_min_dn = min_dn;
    fam.sampled_pairs = done;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct R1Certificate {
    pub words: usize,
    pub grid: usize,
    pub max_defect: f64,
    pub defect_limit: f64,
    /// `bound_factor × max_defect`.
    pub beta_bound: f64,
    pub max_beta: f64,
}

pub struct HorseshoeEmbedding {
    pub family: Arc<SeparatedFamily>,
    pub w_blocks: usize,
    pub l_eff: f64,
    pub c: f64,
    pub tail_tol: f64,
    pub r1: R1Certificate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationSample {
    pub s: u64,
    /// `d_M(Ψ(a)(ω), Ψ(b)(ω))` in floating point.
    pub direct: f64,
    pub witness_index: i64,
    pub witness_distance: f64,
    /// `max_r L^{-|r|} d(y_r, y'_r)`, a lower bound for the exact distance.
    pub chain_bound: f64,
    /// `½ α L^{-(s+1) n}`.
    pub required: f64,
}

impl HorseshoeEmbedding {
    pub fn n(&self) -> usize {
        self.family.n
    }

    pub fn shadow_with(&self, sys: &SkewSystem, word: &SymbolWord, w: Angle, blocks: usize) -> Result<ShadowResult> {
        let po = build_horseshoe_pseudo_orbit(sys, &self.family, word, w, blocks)?;
        shadow_affine(sys, &po, self.tail_tol)
    }

    pub fn shadow(&self, sys: &SkewSystem, word: &SymbolWord, w: Angle) -> Result<ShadowResult> {
        self.shadow_with(sys, word, w, self.w_blocks)
    }

    /// `Ψ(word)(ω)`.
    pub fn psi(&self, sys: &SkewSystem, word: &SymbolWord, w: Angle) -> Result<FiberPoint> {
        Ok(self.shadow(sys, word, w)?.y0)
    }

    pub fn leaf(self: &Arc<Self>, sys: &SkewSystem, word: SymbolWord) -> GraphFunction {
        let me = self.clone();
        let sys = sys.clone();
        GraphFunction::new(GraphKind::HorseshoeLeaf, sys.grid_size, move |w| me.psi(&sys, &word, w))
    }

    /// Distance between index `n` of the shadow orbit of `Ψ(a)(ω)` and
    /// `Ψ(σa)(θⁿω)`.
    pub fn conjugacy_defect(&self, sys: &SkewSystem, word: &SymbolWord, w: Angle) -> Result<f64> {
        let n = self.n() as i64;
        let a = self.shadow(sys, word, w)?;
        let b = self.psi(sys, &word.shift(), sys.base_at(w, n))?;
        Ok(fiber_dist(a.get(n), b))
    }

    pub fn separation(
        &self,
        sys: &SkewSystem,
        a: &SymbolWord,
        b: &SymbolWord,
        w: Angle,
    ) -> Result<Option<SeparationSample>> {
        let Some(s) = a.first_difference(b) else { return Ok(None) };
        let n = self.n() as i64;
        let blocks = self.w_blocks.max(s as usize + 2);
        let ya = self.shadow_with(sys, a, w, blocks)?;
        let yb = self.shadow_with(sys, b, w, blocks)?;
        let reach = (s as i64 + 1) * n;
        let (mut wi, mut wd, mut chain) = (0i64, 0.0f64, 0.0f64);
        for r in -reach..=reach {
            let d = fiber_dist(ya.get(r), yb.get(r));
            let c = self.l_eff.powi(-(r.abs() as i32)) * d;
            if d > wd {
                wd = d;
                wi = r;
            }
            chain = chain.max(c);
        }
        let required = 0.5 * self.family.alpha * self.l_eff.powf(-((s as f64 + 1.0) * n as f64));
        Ok(Some(SeparationSample {
            s,
            direct: fiber_dist(ya.y0, yb.y0),
            witness_index: wi,
            witness_distance: wd,
            chain_bound: chain,
            required,
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorseshoeOptions {
    pub tail_tol: f64,
    pub certify_words: usize,
    pub certify_grid: usize,
    pub seed: u64,
}

impl Default for HorseshoeOptions {
    fn default() -> Self {
        HorseshoeOptions { tail_tol: 1e-13, certify_words: 8, certify_grid: 64, seed: 1 }
    }
}

/// Symbol-driven embedding `Ψ(â)(ω) = y'_0(â, ω)` after certifying that the
/// family's pseudo-orbits have defect below `α/8` and shadow within `α/8`.
pub fn build_horseshoe(
    sys: &SkewSystem,
    family: SeparatedFamily,
    opts: &HorseshoeOptions,
) -> Result<HorseshoeEmbedding> {
    let n = family.n;
    let limit = family.alpha / 8.0;
    let n_tail = window_for_tolerance(&sys.hyper, limit, opts.tail_tol) as usize;
    let w_blocks = n_tail.div_ceil(n) + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut words = vec![SymbolWord::ones(family.k)];
    for _ in 0..opts.certify_words {
        words.push(SymbolWord::random(family.k, -(w_blocks as i64), w_blocks as i64, &mut rng));
    }
    let grid = crate::system::uniform_grid(opts.certify_grid.max(1));
    let family = Arc::new(family);
    let emb = HorseshoeEmbedding {
        family: family.clone(),
        w_blocks,
        l_eff: sys.hyper.lip_l,
        c: 2.0 / family.alpha,
        tail_tol: opts.tail_tol,
        r1: R1Certificate { words: 0, grid: 0, max_defect: 0.0, defect_limit: limit, beta_bound: 0.0, max_beta: 0.0 },
    };
    let mut max_defect: f64 = 0.0;
    let mut max_beta: f64 = 0.0;
    for word in &words {
        let rows: Vec<(f64, f64)> = grid
            .par_iter()
            .map(|&w| {
                let mut po = build_horseshoe_pseudo_orbit(sys, &family, word, w, w_blocks)?;
                let d = measure_defect(sys, &mut po);
                if d >= limit {
                    return Ok((d, f64::INFINITY));
                }
                let sr = shadow_affine(sys, &po, opts.tail_tol)?;
                Ok((d, sr.achieved_beta))
            })
            .collect::<Result<_>>()?;
        for (d, b) in rows {
            max_defect = max_defect.max(d);
            max_beta = max_beta.max(b);
        }
    }
    let beta_bound = sys.consts.bound_factor * max_defect;
    let r1 =
        R1Certificate { words: words.len(), grid: grid.len(), max_defect, defect_limit: limit, beta_bound, max_beta };
    if max_defect >= limit || beta_bound >= limit {
        return Err(Error::CertificateFailed(format!(
            "R1: defect {max_defect:.3e}, shadowing bound {beta_bound:.3e}, limit {limit:.3e}"
        )));
    }
    Ok(HorseshoeEmbedding { r1, ..emb })
}
