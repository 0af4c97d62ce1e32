//! Closed-form total least squares.
//!
//! The offset `c` is eliminated analytically, which leaves a 2x2 eigenproblem
//! on the centered covariance `D`. The same covariance also defines the tiny
//! semidefinite program whose optimum is always rank one; it is solved here by
//! its geometry (the trace-one slice of the 2x2 PSD cone is a disk) so that
//! it can be compared against the eigen route.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{canonicalize, residual, Dataset, LineParams};

/// Symmetric 2x2 matrix stored as `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn quad(&self, v: [f64; 2]) -> f64 {
        self.xx * v[0] * v[0] + 2.0 * self.xy * v[0] * v[1] + self.yy * v[1] * v[1]
    }

    /// `tr(self * other)`
    pub fn dot(&self, other: &Sym2) -> f64 {
        self.xx * other.xx + 2.0 * self.xy * other.xy + self.yy * other.yy
    }

    pub fn outer(v: [f64; 2]) -> Self {
        Self::new(v[0] * v[0], v[0] * v[1], v[1] * v[1])
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.xx * s, self.xy * s, self.yy * s)
    }
}

/// Weighted first and second moments of a dataset.
///
/// `b_centroid` is the weighted mean, `a` the weighted second moment about the
/// origin and `d = a - b bᵀ` the centered covariance; all three are divided by
/// `w_total`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub b_centroid: [f64; 2],
    pub a: Sym2,
    pub w_total: f64,
    pub d: Sym2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eig2 {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub v_min: [f64; 2],
    pub v_max: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlsSolution {
    pub line: LineParams,
    /// Weighted mean squared residual of `line`.
    pub p_star: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub eigvec_min: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlsSdpSolution {
    pub n_mat: Sym2,
    pub cost: f64,
    /// Smaller eigenvalue of `n_mat`; zero for a rank-one optimum.
    pub rank1_defect: f64,
}

pub(crate) fn check_weights(d: &Dataset, weights: Option<&[f64]>) -> Result<()> {
    if let Some(w) = weights {
        if w.len() != d.len() {
            return Err(Error::WeightCount {
                expected: d.len(),
                got: w.len(),
            });
        }
        if let Some((index, &value)) = w
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0) || !v.is_finite())
        {
            return Err(Error::InvalidWeight { index, value });
        }
    }
    Ok(())
}

pub fn moments(d: &Dataset, weights: Option<&[f64]>) -> Result<MomentSummary> {
    d.require(2)?;
    check_weights(d, weights)?;
    let w_at = |i: usize| weights.map_or(1.0, |w| w[i]);

    let mut w_total = 0.0;
    let (mut sx, mut sy) = (0.0, 0.0);
    for (i, p) in d.iter().enumerate() {
        let w = w_at(i);
        w_total += w;
        sx += w * p.x;
        sy += w * p.y;
    }
    let (mx, my) = (sx / w_total, sy / w_total);

    // Centered sums first: subtracting b bᵀ from the raw moment loses digits
    // when the data sit far from the origin.
    let (mut cxx, mut cxy, mut cyy) = (0.0, 0.0, 0.0);
    let (mut axx, mut axy, mut ayy) = (0.0, 0.0, 0.0);
    for (i, p) in d.iter().enumerate() {
        let w = w_at(i);
        let (dx, dy) = (p.x - mx, p.y - my);
        cxx += w * dx * dx;
        cxy += w * dx * dy;
        cyy += w * dy * dy;
        axx += w * p.x * p.x;
        axy += w * p.x * p.y;
        ayy += w * p.y * p.y;
    }
    Ok(MomentSummary {
        b_centroid: [mx, my],
        a: Sym2::new(axx / w_total, axy / w_total, ayy / w_total),
        w_total,
        d: Sym2::new(cxx / w_total, cxy / w_total, cyy / w_total),
    })
}

/// Closed-form eigendecomposition of a symmetric 2x2 matrix.
///
/// When the matrix is isotropic every direction is an eigenvector; `v_min`
/// is then `(1, 0)`.
pub fn eig2_sym(m: &Sym2) -> Eig2 {
    let mean = 0.5 * (m.xx + m.yy);
    let half_diff = 0.5 * (m.xx - m.yy);
    let radius = half_diff.hypot(m.xy);
    let lambda_max = mean + radius;
    let lambda_min = mean - radius;

    if radius == 0.0 {
        return Eig2 {
            lambda_min: mean,
            lambda_max: mean,
            v_min: [1.0, 0.0],
            v_max: [0.0, 1.0],
        };
    }
    let phi = 0.5 * m.xy.atan2(half_diff);
    let (s, c) = phi.sin_cos();
    Eig2 {
        lambda_min,
        lambda_max,
        v_min: [-s, c],
        v_max: [c, s],
    }
}

/// Weighted TLS with an optional quadratic prior `prior * c^2` on the offset.
///
/// With `prior = 0` this is the plain (weighted) fit; the prior only exists so
/// that the robust solver can target the regularized lifted cost exactly.
pub(crate) fn solve_weighted(d: &Dataset, weights: Option<&[f64]>, prior: f64) -> Result<TlsSolution> {
    let m = moments(d, weights)?;
    let w = m.w_total;
    // Σ w (nᵀp - c)^2 + prior c^2 is minimized by c = w mᵀn / (w + prior),
    // which leaves nᵀ (D + shrink m mᵀ) n with shrink = prior / (w + prior).
    let shrink = if prior > 0.0 { prior / (w + prior) } else { 0.0 };
    let [mx, my] = m.b_centroid;
    let dm = Sym2::new(
        m.d.xx + shrink * mx * mx,
        m.d.xy + shrink * mx * my,
        m.d.yy + shrink * my * my,
    );
    let eig = eig2_sym(&dm);
    let n = eig.v_min;
    let c = (n[0] * mx + n[1] * my) * w / (w + prior);
    let line = canonicalize(LineParams { a: n[0], b: n[1], c })?;

    let mut acc = 0.0;
    for (i, p) in d.iter().enumerate() {
        let wi = weights.map_or(1.0, |ws| ws[i]);
        acc += wi * residual(&line, p).powi(2);
    }
    acc += prior * line.c * line.c;
    Ok(TlsSolution {
        line,
        p_star: acc / w,
        lambda_min: eig.lambda_min,
        lambda_max: eig.lambda_max,
        eigvec_min: n,
    })
}

/// Total least squares fit, optionally weighted.
pub fn solve_tls(d: &Dataset, weights: Option<&[f64]>) -> Result<TlsSolution> {
    solve_weighted(d, weights, 0.0)
}

/// Gap between the primal cost of the fitted line and the dual optimum
/// `lambda_min(D)`.
pub fn duality_gap(d: &Dataset) -> Result<f64> {
    let sol = solve_tls(d, None)?;
    Ok(sol.p_star - sol.lambda_min)
}

/// Solves `min tr(N D)` s.t. `tr(N) = 1`, `N ⪰ 0`.
///
/// Writing `N = [[1/2 + u, v], [v, 1/2 - u]]`, feasibility is the disk
/// `u^2 + v^2 <= 1/4` and the objective is affine in `(u, v)`, so the optimum
/// sits on the rim of the disk opposite the gradient.
pub fn solve_tls_sdp(d: &Sym2) -> TlsSdpSolution {
    let gu = d.xx - d.yy;
    let gv = 2.0 * d.xy;
    let g = gu.hypot(gv);
    let (u, v) = if g == 0.0 {
        (0.5, 0.0)
    } else {
        (-0.5 * gu / g, -0.5 * gv / g)
    };
    let n_mat = Sym2::new(0.5 + u, v, 0.5 - u);
    let cost = 0.5 * d.trace() - 0.5 * g;
    TlsSdpSolution {
        n_mat,
        cost,
        rank1_defect: eig2_sym(&n_mat).lambda_min,
    }
}
