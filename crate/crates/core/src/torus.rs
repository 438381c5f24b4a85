//! Flat-torus geometry: angles on `T¹`, points of `M = T²` and `M × Ω`, the metrics
//! used everywhere else, wrapped displacements and winding degrees.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the circle `R/Z`, stored in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(into = "f64", from = "f64")]
pub struct Angle(f64);

impl From<f64> for Angle {
    fn from(v: f64) -> Angle {
        Angle::new(v)
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

impl Angle {
    pub fn new(v: f64) -> Angle {
        let r = v - v.floor();
        // v slightly below an integer can round up to exactly 1.
        Angle(if r >= 1.0 { 0.0 } else { r })
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `self + t` reduced once.
    pub fn rotate(self, t: f64) -> Angle {
        Angle::new(self.0 + t)
    }
}

/// Wrap a real number into `[-1/2, 1/2)`.
pub fn wrap_half(d: f64) -> f64 {
    let w = d - (d + 0.5).floor();
    if w >= 0.5 {
        w - 1.0
    } else if w < -0.5 {
        w + 1.0
    } else {
        w
    }
}

/// A point of `M = T²`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FiberPoint {
    pub x: Angle,
    pub y: Angle,
}

impl FiberPoint {
    pub fn new(x: f64, y: f64) -> FiberPoint {
        FiberPoint { x: Angle::new(x), y: Angle::new(y) }
    }

    pub fn coords(self) -> [f64; 2] {
        [self.x.value(), self.y.value()]
    }

    pub fn translate(self, d: [f64; 2]) -> FiberPoint {
        FiberPoint::new(self.x.value() + d[0], self.y.value() + d[1])
    }
}

/// A point of `M × Ω`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ProductPoint {
    pub fiber: FiberPoint,
    pub base: Angle,
}

impl ProductPoint {
    pub fn new(fiber: FiberPoint, base: Angle) -> ProductPoint {
        ProductPoint { fiber, base }
    }
}

/// Smallest lift of a difference of fiber points, components in `[-1/2, 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Displacement {
    pub dx: f64,
    pub dy: f64,
}

impl Displacement {
    pub fn norm(self) -> f64 {
        self.dx.hypot(self.dy)
    }

    pub fn as_array(self) -> [f64; 2] {
        [self.dx, self.dy]
    }
}

pub fn circle_dist(a: Angle, b: Angle) -> f64 {
    let d = (a.0 - b.0).abs();
    d.min(1.0 - d)
}

/// Euclidean norm of the two coordinate circle distances.
pub fn fiber_dist(p: FiberPoint, q: FiberPoint) -> f64 {
    circle_dist(p.x, q.x).hypot(circle_dist(p.y, q.y))
}

/// Sum metric on `M × Ω`.
pub fn product_dist(p: ProductPoint, q: ProductPoint) -> f64 {
    fiber_dist(p.fiber, q.fiber) + circle_dist(p.base, q.base)
}

/// The representative of `p - q` with both components in `[-1/2, 1/2)`.
pub fn wrap_displacement(p: FiberPoint, q: FiberPoint) -> Displacement {
    Displacement { dx: wrap_half(p.x.0 - q.x.0), dy: wrap_half(p.y.0 - q.y.0) }
}

/// Winding number of a sampled circle map. The list is closed: the step from
/// the last sample back to the first is included.
pub fn winding_degree(samples: &[Angle]) -> Result<i64> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("winding_degree needs at least one sample".into()));
    }
    let n = samples.len();
    let mut total = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        let step = wrap_half(samples[j].0 - samples[i].0);
        if step.abs() >= 0.25 {
            return Err(Error::AmbiguousLift { index: i, next: j, gap: step.abs() });
        }
        total += step;
    }
    Ok(total.round() as i64)
}
