//! Black-Rangarajan lifting of the Geman-McClure fit.
//!
//! Each point gets a confidence `alpha_n` and a lifted copy `q_n = alpha_n q_0`
//! of the line vector `q_0 = (a, b, c)`. Stacking the copies turns the robust
//! cost into the quadratic form `qᵀ H q` with an arrowhead `H`.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{canonicalize, residual, Dataset, LineParams};

/// Regularizer placed on the `c` entry of the first diagonal block of `H`.
pub const DEFAULT_EPS: f64 = 1e-6;

/// Selector `diag(1, 1, 0)`: `q_0ᵀ J q_0 = a^2 + b^2`.
pub fn selector() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0))
}

/// Skew matrix with `cross(u) * v == u.cross(&v)`.
pub fn cross(u: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -u.z, u.y, u.z, 0.0, -u.x, -u.y, u.x, 0.0)
}

/// Inverse of [`cross`] on the skew-symmetric part of `m`.
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

pub(crate) fn block(m: &DMatrix<f64>, i: usize, j: usize) -> Matrix3<f64> {
    m.fixed_view::<3, 3>(3 * i, 3 * j).into_owned()
}

pub(crate) fn set_block(m: &mut DMatrix<f64>, i: usize, j: usize, b: &Matrix3<f64>) {
    m.fixed_view_mut::<3, 3>(3 * i, 3 * j).copy_from(b);
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftedVector {
    pub q: DVector<f64>,
}

impl LiftedVector {
    pub fn from_vec(q: DVector<f64>) -> Result<Self> {
        if q.len() < 3 || !q.len().is_multiple_of(3) {
            return Err(Error::DimensionMismatch {
                expected: 3 * (q.len() / 3).max(1),
                got: q.len(),
            });
        }
        Ok(Self { q })
    }

    /// Number of data blocks (`N`).
    pub fn n_points(&self) -> usize {
        self.q.len() / 3 - 1
    }

    pub fn block(&self, n: usize) -> Vector3<f64> {
        self.q.fixed_rows::<3>(3 * n).into_owned()
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaVector {
    pub alpha: Vec<f64>,
}

impl AlphaVector {
    /// Optimal confidences for `line`.
    pub fn optimal(line: &LineParams, d: &Dataset) -> Self {
        Self {
            alpha: d
                .iter()
                .map(|p| alpha_from_residual(residual(line, p)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftedProblem {
    pub h: DMatrix<f64>,
    pub d_list: Vec<Vector3<f64>>,
    pub eps: f64,
    pub n: usize,
}

impl LiftedProblem {
    pub fn dim(&self) -> usize {
        3 * (self.n + 1)
    }
}

/// Minimizer over `alpha` of `alpha^2 e^2 + (alpha - 1)^2`.
#[inline]
pub fn alpha_from_residual(e: f64) -> f64 {
    1.0 / (1.0 + e * e)
}

/// Assembles the arrowhead cost matrix
///
/// ```text
/// [ N J + eps e3 e3ᵀ   -J            ...  -J          ]
/// [ -J                 J + d_1 d_1ᵀ       0           ]
/// [ ...                                   ...         ]
/// [ -J                 0             ...  J + d_N d_Nᵀ]
/// ```
///
/// with `d_n = (x_n, y_n, -1)`.
pub fn build_lifted(d: &Dataset, eps: f64) -> Result<LiftedProblem> {
    d.require(1)?;
    if !(eps >= 0.0) {
        return Err(Error::InvalidConfig("eps must be >= 0".into()));
    }
    let n = d.len();
    let dim = 3 * (n + 1);
    let j = selector();
    let mut h = DMatrix::zeros(dim, dim);

    let mut top = j * n as f64;
    top[(2, 2)] += eps;
    set_block(&mut h, 0, 0, &top);

    let d_list: Vec<Vector3<f64>> = d.iter().map(|p| Vector3::new(p.x, p.y, -1.0)).collect();
    for (k, dn) in d_list.iter().enumerate() {
        let i = k + 1;
        set_block(&mut h, 0, i, &(-j));
        set_block(&mut h, i, 0, &(-j));
        set_block(&mut h, i, i, &(j + dn * dn.transpose()));
    }
    Ok(LiftedProblem { h, d_list, eps, n })
}

/// Stacks `q_0 = (a, b, c)` and `q_n = alpha_n q_0`.
pub fn lift_solution(line: &LineParams, alpha: &AlphaVector) -> Result<LiftedVector> {
    let line = canonicalize(*line)?;
    let q0 = Vector3::new(line.a, line.b, line.c);
    let mut q = DVector::zeros(3 * (alpha.alpha.len() + 1));
    q.fixed_rows_mut::<3>(0).copy_from(&q0);
    for (k, &a) in alpha.alpha.iter().enumerate() {
        q.fixed_rows_mut::<3>(3 * (k + 1)).copy_from(&(q0 * a));
    }
    Ok(LiftedVector { q })
}

/// `qᵀ H q`, including the `eps c^2` prior when `eps > 0`.
pub fn lifted_cost(q: &LiftedVector, lp: &LiftedProblem) -> Result<f64> {
    if q.dim() != lp.dim() {
        return Err(Error::DimensionMismatch {
            expected: lp.dim(),
            got: q.dim(),
        });
    }
    Ok(q.q.dot(&(&lp.h * &q.q)))
}

/// Black-Rangarajan objective `Σ alpha_n^2 e_n^2 + (alpha_n - 1)^2`, evaluated
/// directly from residuals.
pub fn black_rangarajan_cost(line: &LineParams, alpha: &AlphaVector, d: &Dataset) -> f64 {
    d.iter()
        .zip(&alpha.alpha)
        .map(|(p, &a)| {
            let e = residual(line, p);
            a * a * e * e + (a - 1.0) * (a - 1.0)
        })
        .sum()
}
