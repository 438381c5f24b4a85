use serde::Serialize;

use crate::error::{Error, Result};
use crate::system::{hyperbolic_data, ToralMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Obstruction {
    /// Degrees `(k₁, k₂)` forced on a continuous invariant graph.
    Forced(i64, i64),
    NoContinuousGraph,
}

/// Integer solution of `(I - A) k = (n₁, n₂)`, the degree condition a continuous
/// invariant graph must satisfy.
pub fn continuous_graph_obstruction(a: &ToralMatrix, n1: i64, n2: i64) -> Result<Obstruction> {
    hyperbolic_data(a)?;
    let (m11, m12, m21, m22) = (1 - a.a11, -a.a12, -a.a21, 1 - a.a22);
    let det = m11 * m22 - m12 * m21;
    if det == 0 {
        return Err(Error::InvalidInput("I - A is singular".into()));
    }
    let x1 = m22 * n1 - m12 * n2;
    let x2 = -m21 * n1 + m11 * n2;
    if x1 % det != 0 || x2 % det != 0 {
        return Ok(Obstruction::NoContinuousGraph);
    }
    Ok(Obstruction::Forced(x1 / det, x2 / det))
}
