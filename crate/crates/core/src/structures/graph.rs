use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::system::uniform_grid;
use crate::torus::{Angle, FiberPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Input,
    Periodic,
    HorseshoeLeaf,
    WeakHorseshoe,
    Image,
}

type EvalFn = dyn Fn(Angle) -> Result<FiberPoint> + Send + Sync;

/// A map `Ω → M` evaluated pointwise on demand.
#[derive(Clone)]
pub struct GraphFunction {
    eval: Arc<EvalFn>,
    pub grid: usize,
    pub kind: GraphKind,
}

impl fmt::Debug for GraphFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GraphFunction").field("kind", &self.kind).field("grid", &self.grid).finish()
    }
}

impl GraphFunction {
    pub fn new<F>(kind: GraphKind, grid: usize, f: F) -> GraphFunction
    where
        F: Fn(Angle) -> Result<FiberPoint> + Send + Sync + 'static,
    {
        GraphFunction { eval: Arc::new(f), grid, kind }
    }

    pub fn constant(c: FiberPoint, grid: usize) -> GraphFunction {
        GraphFunction::new(GraphKind::Input, grid, move |_| Ok(c))
    }

    pub fn eval(&self, w: Angle) -> Result<FiberPoint> {
        (self.eval)(w)
    }

    /// Values on the uniform grid of size `g`, computed in parallel.
    pub fn samples_on(&self, g: usize) -> Result<Vec<(Angle, FiberPoint)>> {
        uniform_grid(g).into_par_iter().map(|w| Ok((w, self.eval(w)?))).collect()
    }

    pub fn samples(&self) -> Result<Vec<(Angle, FiberPoint)>> {
        self.samples_on(self.grid)
    }
}
