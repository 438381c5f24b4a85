use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use super::{GraphFunction, GraphKind};
use crate::error::{Error, Result};
use crate::system::{fiber_map, uniform_grid, SkewSystem};
use crate::torus::{fiber_dist, Angle, FiberPoint};

type TestFn = dyn Fn(FiberPoint, Angle) -> f64 + Send + Sync;

/// A bounded real function on `M × Ω`.
#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    f: Arc<TestFn>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TestFunction({})", self.name)
    }
}

impl TestFunction {
    pub fn new<F>(name: impl Into<String>, f: F) -> TestFunction
    where
        F: Fn(FiberPoint, Angle) -> f64 + Send + Sync + 'static,
    {
        TestFunction { name: name.into(), f: Arc::new(f) }
    }

    pub fn constant(c: f64) -> TestFunction {
        TestFunction::new(format!("const({c})"), move |_, _| c)
    }

    /// Real part of `exp(2πi(kω + l x + m y))`.
    pub fn character_re(k: i64, l: i64, m: i64) -> TestFunction {
        TestFunction::new(format!("re({k},{l},{m})"), move |p, w| {
            (TAU * (k as f64 * w.value() + l as f64 * p.x.value() + m as f64 * p.y.value())).cos()
        })
    }

    pub fn character_im(k: i64, l: i64, m: i64) -> TestFunction {
        TestFunction::new(format!("im({k},{l},{m})"), move |p, w| {
            (TAU * (k as f64 * w.value() + l as f64 * p.x.value() + m as f64 * p.y.value())).sin()
        })
    }

    /// `min(d(x, g(ω)), cap)`: 1-Lipschitz in the fiber, zero on the graph of `g`.
    pub fn distance_to_graph(g: GraphFunction, cap: f64) -> TestFunction {
        TestFunction::new(format!("dist_to_graph({cap})"), move |p, w| match g.eval(w) {
            Ok(c) => fiber_dist(p, c).min(cap),
            Err(_) => f64::NAN,
        })
    }

    pub fn eval(&self, p: FiberPoint, w: Angle) -> f64 {
        (self.f)(p, w)
    }
}

/// Uniform-weight measure on grid samples of a graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalGraphMeasure {
    pub samples: Vec<(Angle, FiberPoint)>,
}

impl EmpiricalGraphMeasure {
    pub fn mass(&self) -> f64 {
        let w = 1.0 / self.samples.len() as f64;
        self.samples.iter().map(|_| w).sum()
    }

    pub fn integrate(&self, u: &TestFunction) -> f64 {
        self.samples.iter().map(|&(w, p)| u.eval(p, w)).sum::<f64>() / self.samples.len() as f64
    }
}

pub fn graph_measure(g: &GraphFunction, grid: usize) -> Result<EmpiricalGraphMeasure> {
    if grid == 0 {
        return Err(Error::InvalidInput("grid must be positive".into()));
    }
    Ok(EmpiricalGraphMeasure { samples: g.samples_on(grid)? })
}

/// `g′` with `graph(g′) = φ(graph(g))`: `g′(θω) = f_ω(g(ω))`.
pub fn image_graph(sys: &SkewSystem, g: &GraphFunction) -> GraphFunction {
    let sys = sys.clone();
    let g = g.clone();
    GraphFunction::new(GraphKind::Image, g.grid, move |w| {
        let prev = w.rotate(-sys.rotation);
        Ok(fiber_map(&sys, prev, g.eval(prev)?))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PushforwardRow {
    pub name: String,
    /// `∫ u∘φ dμ_g`.
    pub pushed: f64,
    /// `∫ u dμ_{g′}` on the rotated grid.
    pub image: f64,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PushforwardReport {
    pub grid: usize,
    pub rows: Vec<PushforwardRow>,
    pub max_discrepancy: f64,
}

pub fn pushforward_check(
    sys: &SkewSystem,
    g: &GraphFunction,
    tests: &[TestFunction],
    grid: usize,
) -> Result<PushforwardReport> {
    let mu = graph_measure(g, grid)?;
    let image = image_graph(sys, g);
    let rotated: Vec<(Angle, FiberPoint)> = uniform_grid(grid)
        .into_iter()
        .map(|w| {
            let v = w.rotate(sys.rotation);
            Ok((v, image.eval(v)?))
        })
        .collect::<Result<_>>()?;
    let mu_image = EmpiricalGraphMeasure { samples: rotated };
    let rows: Vec<PushforwardRow> = tests
        .iter()
        .map(|u| {
            let pushed =
                mu.samples.iter().map(|&(w, p)| u.eval(fiber_map(sys, w, p), w.rotate(sys.rotation))).sum::<f64>()
                    / grid as f64;
            let image = mu_image.integrate(u);
            PushforwardRow { name: u.name.clone(), pushed, image, discrepancy: (pushed - image).abs() }
        })
        .collect();
    let max_discrepancy = rows.iter().map(|r| r.discrepancy).fold(0.0, f64::max);
    Ok(PushforwardReport { grid, rows, max_discrepancy })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InjectivityReport {
    /// Smallest grid separation `d(g₁(ω), g₂(ω))`.
    pub min_separation: f64,
    /// `|∫u dμ_{g₁} − ∫u dμ_{g₂}|` for `u` the capped distance to `graph(g₁)`.
    pub discrepancy: f64,
}

/// Separates `μ_{g₁}` and `μ_{g₂}` with the capped distance to the first graph.
pub fn injectivity_probe(g1: &GraphFunction, g2: &GraphFunction, grid: usize, cap: f64) -> Result<InjectivityReport> {
    let a = graph_measure(g1, grid)?;
    let b = graph_measure(g2, grid)?;
    let min_separation =
        a.samples.iter().zip(&b.samples).map(|(&(_, p), &(_, q))| fiber_dist(p, q)).fold(f64::INFINITY, f64::min);
    let u = TestFunction::distance_to_graph(g1.clone(), cap);
    Ok(InjectivityReport { min_separation, discrepancy: (a.integrate(&u) - b.integrate(&u)).abs() })
}
