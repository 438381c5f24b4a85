//! Bowen metrics, separated-set counts, entropy slopes and Weyl sums.

use std::collections::HashMap;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::system::{fiber_map, fiber_orbit, SkewSystem};
use crate::torus::{circle_dist, fiber_dist, product_dist, Angle, FiberPoint, ProductPoint};

/// `max_{0 ≤ i < n} d(φⁱ p, φⁱ q)`.
pub fn dn_metric(sys: &SkewSystem, p: ProductPoint, q: ProductPoint, n: usize) -> f64 {
    let (mut a, mut b) = (p, q);
    let mut d = product_dist(a, b);
    for _ in 1..n {
        a = ProductPoint::new(fiber_map(sys, a.base, a.fiber), a.base.rotate(sys.rotation));
        b = ProductPoint::new(fiber_map(sys, b.base, b.fiber), b.base.rotate(sys.rotation));
        d = d.max(product_dist(a, b));
    }
    d
}

/// Seeded uniform samples of `M × Ω` with their fiber orbits `x_0, …, x_{n-1}`.
struct Samples {
    n: usize,
    bases: Vec<Angle>,
    orbits: Vec<FiberPoint>,
}

impl Samples {
    fn new(sys: &SkewSystem, n: usize, budget: usize, seed: u64) -> Samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let starts: Vec<[f64; 3]> = (0..budget).map(|_| rng.gen()).collect();
        let rows: Vec<(Angle, Vec<FiberPoint>)> = starts
            .into_par_iter()
            .map(|[x, y, w]| {
                let base = Angle::new(w);
                (base, fiber_orbit(sys, ProductPoint::new(FiberPoint::new(x, y), base), n - 1))
            })
            .collect();
        let mut bases = Vec::with_capacity(budget);
        let mut orbits = Vec::with_capacity(budget * n);
        for (b, o) in rows {
            bases.push(b);
            orbits.extend(o);
        }
        Samples { n, bases, orbits }
    }

    fn len(&self) -> usize {
        self.bases.len()
    }

    fn at(&self, i: usize, t: usize) -> FiberPoint {
        self.orbits[i * self.n + t]
    }

    /// Product distance at time `t`; the base term is invariant under rotation.
    fn dist(&self, i: usize, j: usize, t: usize) -> f64 {
        fiber_dist(self.at(i, t), self.at(j, t)) + circle_dist(self.bases[i], self.bases[j])
    }

    /// Unordered pairs with `d₁ ≤ α`, from a grid on `(x₀, y₀, ω)` with cells of
    /// side at least `α`.
    fn close_pairs_1(&self, alpha: f64) -> Vec<(u32, u32)> {
        let cells = ((1.0 / alpha).floor() as i64).max(1);
        let coord = |v: f64| ((v * cells as f64) as i64).min(cells - 1);
        let key = |c: [i64; 3]| ((c[0] * cells + c[1]) * cells + c[2]) as u64;
        let mut table: HashMap<u64, Vec<u32>> = HashMap::new();
        for i in 0..self.len() {
            let p = self.at(i, 0);
            table
                .entry(key([coord(p.x.value()), coord(p.y.value()), coord(self.bases[i].value())]))
                .or_default()
                .push(i as u32);
        }
        let mut occupied: Vec<u64> = table.keys().copied().collect();
        occupied.sort_unstable();
        let mut pairs: Vec<(u32, u32)> = occupied
            .par_iter()
            .flat_map_iter(|&k| {
                let c = [
                    (k / cells as u64 / cells as u64) as i64,
                    (k / cells as u64 % cells as u64) as i64,
                    (k % cells as u64) as i64,
                ];
                let mut nbs: Vec<u64> = Vec::with_capacity(27);
                for d0 in -1..=1 {
                    for d1 in -1..=1 {
                        for d2 in -1..=1 {
                            let nb = [
                                (c[0] + d0).rem_euclid(cells),
                                (c[1] + d1).rem_euclid(cells),
                                (c[2] + d2).rem_euclid(cells),
                            ];
                            nbs.push(key(nb));
                        }
                    }
                }
                nbs.sort_unstable();
                nbs.dedup();
                let here = &table[&k];
                let mut out = Vec::new();
                for nk in nbs.into_iter().filter(|&nk| nk >= k) {
                    let Some(there) = table.get(&nk) else { continue };
                    for (a, &i) in here.iter().enumerate() {
                        let rest = if nk == k { &there[a + 1..] } else { &there[..] };
                        for &j in rest {
                            if self.dist(i as usize, j as usize, 0) <= alpha {
                                out.push((i.min(j), i.max(j)));
                            }
                        }
                    }
                }
                out
            })
            .collect();
        pairs.sort_unstable();
        pairs
    }

    /// Keeps the pairs that stay within `α` at time `t`.
    fn refine(&self, pairs: &mut Vec<(u32, u32)>, alpha: f64, t: usize) {
        pairs.retain(|&(i, j)| self.dist(i as usize, j as usize, t) <= alpha);
    }
}

/// Greedy separated subset in sample order: a sample joins unless it is
/// `α`-close to an earlier member.
fn greedy_from_pairs(len: usize, pairs: &[(u32, u32)]) -> usize {
    let mut later: Vec<Vec<u32>> = vec![Vec::new(); len];
    for &(i, j) in pairs {
        later[j as usize].push(i);
    }
    let mut chosen = vec![false; len];
    for i in 0..len {
        chosen[i] = later[i].iter().all(|&j| !chosen[j as usize]);
    }
    chosen.iter().filter(|&&c| c).count()
}

/// Greedy `(n, α)`-separated subset of `budget` seeded uniform samples of `M × Ω`,
/// taken in sample order; a lower bound for the maximal cardinality.
pub fn max_separated_count(sys: &SkewSystem, n: usize, alpha: f64, budget: usize, seed: u64) -> Result<usize> {
    if n == 0 || !(alpha > 0.0) {
        return Err(Error::InvalidInput("n >= 1 and alpha > 0 required".into()));
    }
    if budget == 0 {
        return Ok(0);
    }
    let s = Samples::new(sys, n, budget, seed);
    let mut pairs = s.close_pairs_1(alpha);
    for t in 1..n {
        s.refine(&mut pairs, alpha, t);
    }
    Ok(greedy_from_pairs(budget, &pairs))
}

/// Sample estimate of the mean measure of the Bowen balls `B_n(x, α)`.
pub fn bowen_ball_mass(sys: &SkewSystem, n: usize, alpha: f64, budget: usize, seed: u64) -> Result<f64> {
    if n == 0 || !(alpha > 0.0) || budget < 2 {
        return Err(Error::InvalidInput("n >= 1, alpha > 0 and budget >= 2 required".into()));
    }
    let s = Samples::new(sys, n, budget, seed);
    let mut pairs = s.close_pairs_1(alpha);
    for t in 1..n {
        s.refine(&mut pairs, alpha, t);
    }
    Ok(2.0 * pairs.len() as f64 / (budget as f64 * (budget - 1) as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyRow {
    pub n: usize,
    /// Greedy separated count, raised to the previous row's count when smaller
    /// (an `(n, α)`-separated set is `(n + 1, α)`-separated).
    pub separated: usize,
    /// Ordered sample pairs within `α` in `dₙ`.
    pub close_pairs: u64,
    /// Covering estimate `1 / μ̂(B_n(·, α))`.
    pub covering: f64,
    /// `(1/n) ln covering`.
    pub rate: f64,
    /// `ln(covering(n) / covering(n − 1))` when both rows have enough pairs.
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReport {
    pub alpha: f64,
    pub budget: usize,
    pub seed: u64,
    pub min_pairs: u64,
    pub rows: Vec<EntropyRow>,
    /// Mean of the available slopes.
    pub estimate: Option<f64>,
    pub slopes_used: usize,
    pub h_ref: f64,
}

/// Rows with fewer close pairs than this do not contribute slopes.
pub const MIN_PAIRS: u64 = 200;

/// Entropy table over `ns` from one sample set of size `budget`.
///
/// The separated counts are reported as lower bounds; the slope uses the
/// covering estimate `1/μ̂(B_n)`, whose pair counts are nested in `n` and do not
/// saturate when the separated sets approach the sample budget.
pub fn entropy_estimate(sys: &SkewSystem, ns: &[usize], alpha: f64, budget: usize, seed: u64) -> Result<EntropyReport> {
    if ns.is_empty() || ns.contains(&0) {
        return Err(Error::InvalidInput("n range must be nonempty and positive".into()));
    }
    if !(alpha > 0.0) || budget < 2 {
        return Err(Error::InvalidInput("alpha > 0 and budget >= 2 required".into()));
    }
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let samples = Samples::new(sys, ns[ns.len() - 1], budget, seed);
    let total = budget as f64 * (budget - 1) as f64;
    let mut pairs = samples.close_pairs_1(alpha);
    let mut t_done = 1;
    let mut rows: Vec<EntropyRow> = Vec::with_capacity(ns.len());
    for &n in &ns {
        while t_done < n {
            samples.refine(&mut pairs, alpha, t_done);
            t_done += 1;
        }
        let mut separated = greedy_from_pairs(budget, &pairs);
        let close = 2 * pairs.len() as u64;
        let covering = if close == 0 { f64::INFINITY } else { total / close as f64 };
        let prev = rows.last();
        if let Some(p) = prev {
            separated = separated.max(p.separated);
        }
        let slope = prev
            .filter(|p| p.n + 1 == n && p.close_pairs >= MIN_PAIRS && close >= MIN_PAIRS)
            .map(|p| (covering / p.covering).ln());
        rows.push(EntropyRow { n, separated, close_pairs: close, covering, rate: covering.ln() / n as f64, slope });
    }
    let slopes: Vec<f64> = rows.iter().filter_map(|r| r.slope).collect();
    let estimate = (!slopes.is_empty()).then(|| slopes.iter().sum::<f64>() / slopes.len() as f64);
    Ok(EntropyReport {
        alpha,
        budget,
        seed,
        min_pairs: MIN_PAIRS,
        rows,
        estimate,
        slopes_used: slopes.len(),
        h_ref: sys.hyper.lambda_u.abs().ln(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeylRow {
    pub freq: (i64, i64, i64),
    /// `(N, |S_N| / N)` at each checkpoint.
    pub decay: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeylReport {
    pub start: ProductPoint,
    pub n: usize,
    pub rows: Vec<WeylRow>,
}

impl WeylReport {
    pub fn modulus(&self, freq: (i64, i64, i64)) -> Option<f64> {
        self.rows.iter().find(|r| r.freq == freq).and_then(|r| r.decay.last()).map(|d| d.1)
    }
}

/// Birkhoff averages of `exp(2πi(kω + l x + m y))` along the orbit of `p0`,
/// recorded at every power of ten up to `n` and at `n`.
pub fn weyl_test(sys: &SkewSystem, freqs: &[(i64, i64, i64)], n: usize, p0: ProductPoint) -> Result<WeylReport> {
    if n == 0 {
        return Err(Error::InvalidInput("N >= 1 required".into()));
    }
    let mut checkpoints: Vec<usize> =
        std::iter::successors(Some(10usize), |c| c.checked_mul(10)).take_while(|&c| c < n).collect();
    checkpoints.push(n);
    let mut sums = vec![(0.0f64, 0.0f64); freqs.len()];
    let mut decay = vec![Vec::with_capacity(checkpoints.len()); freqs.len()];
    let mut x = p0.fiber;
    let mut next = 0;
    for j in 0..n {
        let w = sys.base_at(p0.base, j as i64);
        for (f, s) in freqs.iter().zip(sums.iter_mut()) {
            let (k, l, m) = *f;
            if (k, l, m) == (0, 0, 0) {
                s.0 += 1.0;
                continue;
            }
            let t = TAU * (k as f64 * w.value() + l as f64 * x.x.value() + m as f64 * x.y.value());
            s.0 += t.cos();
            s.1 += t.sin();
        }
        x = fiber_map(sys, w, x);
        if j + 1 == checkpoints[next] {
            for (d, s) in decay.iter_mut().zip(&sums) {
                d.push((j + 1, s.0.hypot(s.1) / (j + 1) as f64));
            }
            next += 1;
        }
    }
    let rows = freqs.iter().zip(decay).map(|(&freq, decay)| WeylRow { freq, decay }).collect();
    Ok(WeylReport { start: p0, n, rows })
}
