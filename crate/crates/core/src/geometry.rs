//! Points, lines and the two cost functions every solver in the crate is
//! measured against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub x: f64,
    pub y: f64,
}

impl DataPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// An ordered collection of points. The index of a point in `points` is the
/// index used by every per-point quantity (weights, residuals, alphas, lifted
/// blocks).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub points: Vec<DataPoint>,
}

impl Dataset {
    pub fn new(points: Vec<DataPoint>) -> Result<Self> {
        if let Some(i) = points
            .iter()
            .position(|p| !p.x.is_finite() || !p.y.is_finite())
        {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { points })
    }

    pub fn from_xy(xy: &[(f64, f64)]) -> Result<Self> {
        Self::new(xy.iter().map(|&(x, y)| DataPoint::new(x, y)).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DataPoint> {
        self.points.iter()
    }

    /// Largest distance of any point from the origin.
    pub fn radius(&self) -> f64 {
        self.points.iter().map(DataPoint::norm).fold(0.0, f64::max)
    }

    pub(crate) fn require(&self, needed: usize) -> Result<()> {
        if self.len() < needed {
            if self.is_empty() && needed == 1 {
                return Err(Error::EmptyDataset);
            }
            return Err(Error::InsufficientData {
                needed,
                got: self.len(),
            });
        }
        Ok(())
    }
}

/// The line `a x + b y - c = 0` with unit normal `(a, b)`.
///
/// Constructed values are kept canonical: `b > 0`, or `b == 0` and `a > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl LineParams {
    /// Builds a canonical line from any nonzero normal.
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        canonicalize(LineParams { a, b, c })
    }

    /// Line with normal `(cos theta, sin theta)` and offset `c`.
    pub fn from_angle(theta: f64, c: f64) -> Self {
        let (s, co) = theta.sin_cos();
        canonicalize(LineParams { a: co, b: s, c }).expect("unit normal")
    }

    /// Normal angle in `[0, pi)`.
    pub fn angle(&self) -> f64 {
        let t = self.b.atan2(self.a);
        if t < 0.0 {
            t + std::f64::consts::PI
        } else if t >= std::f64::consts::PI {
            t - std::f64::consts::PI
        } else {
            t
        }
    }

    pub fn normal(&self) -> [f64; 2] {
        [self.a, self.b]
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    /// Angular distance between normals (as undirected lines) and offset gap
    /// after both lines are canonicalized.
    pub fn distance_to(&self, other: &LineParams) -> (f64, f64) {
        let (l, r) = match (canonicalize(*self), canonicalize(*other)) {
            (Ok(l), Ok(r)) => (l, r),
            _ => return (f64::INFINITY, f64::INFINITY),
        };
        let dot = (l.a * r.a + l.b * r.b).clamp(-1.0, 1.0);
        let cross = l.a * r.b - l.b * r.a;
        let ang = cross.abs().atan2(dot.abs());
        let dc = if dot >= 0.0 { l.c - r.c } else { l.c + r.c };
        (ang, dc.abs())
    }

    /// Line equality used throughout the tests: angle between normals and
    /// offset difference both within `tol`.
    pub fn approx_eq(&self, other: &LineParams, tol: f64) -> bool {
        let (ang, dc) = self.distance_to(other);
        ang <= tol && dc <= tol
    }
}

/// Signed residual `a x + b y - c`.
#[inline]
pub fn residual(line: &LineParams, p: &DataPoint) -> f64 {
    line.a * p.x + line.b * p.y - line.c
}

pub fn residuals(line: &LineParams, d: &Dataset) -> Vec<f64> {
    d.iter().map(|p| residual(line, p)).collect()
}

/// Mean squared orthogonal distance.
pub fn tls_cost(line: &LineParams, d: &Dataset) -> Result<f64> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let sum: f64 = d.iter().map(|p| residual(line, p).powi(2)).sum();
    Ok(sum / d.len() as f64)
}

/// Geman-McClure loss `e^2 / (1 + e^2)`.
#[inline]
pub fn gm_rho(e: f64) -> f64 {
    let e2 = e * e;
    e2 / (1.0 + e2)
}

/// Sum of Geman-McClure losses over the dataset; lies in `[0, N)`.
pub fn gm_cost(line: &LineParams, d: &Dataset) -> f64 {
    d.iter().map(|p| gm_rho(residual(line, p))).sum()
}

/// Normalizes the normal to unit length and fixes the sign so that `b > 0`,
/// or `b == 0` and `a > 0`.
pub fn canonicalize(line: LineParams) -> Result<LineParams> {
    let LineParams { a, b, c } = line;
    let norm = a.hypot(b);
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::DegenerateNormal);
    }
    let (mut a, mut b, mut c) = (a / norm, b / norm, c / norm);
    if b < 0.0 || (b == 0.0 && a < 0.0) {
        a = -a;
        b = -b;
        c = -c;
    }
    // avoid -0.0 leaking into reports
    Ok(LineParams {
        a: a + 0.0,
        b: b + 0.0,
        c: c + 0.0,
    })
}
