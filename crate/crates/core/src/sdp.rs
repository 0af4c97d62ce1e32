//! Semidefinite relaxation of the lifted robust fit.
//!
//! `q qᵀ` is replaced by a PSD matrix `Q`. Besides the unit-normal constraint
//! `tr(Q_00 J) = 1`, every off-diagonal block `Q_nm` (n > m) is required to be
//! symmetric. Those redundant constraints encode that all lifted copies are
//! parallel; dropping them (keeping only the `m = 0` column) gives a much
//! looser relaxation that is kept around for comparison.
//!
//! The relaxation is solved with ADMM: alternate a projection onto the affine
//! constraint set (Gram matrix factored once) with a spectral clamp onto the
//! PSD cone.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{canonicalize, LineParams};
use crate::lifting::{selector, AlphaVector, LiftedProblem, LiftedVector};
use crate::linalg::{clamp_psd, sorted_eigen};

/// Largest dataset the SDP path accepts.
pub const MAX_SDP_POINTS: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relaxation {
    /// Symmetric `Q_nm` for every pair `n > m >= 0`.
    Redundant,
    /// Symmetric `Q_n0` only.
    Plain,
}

/// Linear constraint `tr(A Q) = rhs` with `A` symmetric.
///
/// `entries` holds the upper triangle (`i <= j`); an off-diagonal entry `v`
/// stands for both `A_ij` and `A_ji`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseConstraint {
    pub entries: Vec<(usize, usize, f64)>,
    pub rhs: f64,
}

impl SparseConstraint {
    pub fn eval(&self, q: &DMatrix<f64>) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * q[(i, j)] } else { 2.0 * v * q[(i, j)] })
            .sum()
    }

    fn subtract_scaled(&self, x: &mut DMatrix<f64>, y: f64) {
        for &(i, j, v) in &self.entries {
            x[(i, j)] -= y * v;
            if i != j {
                x[(j, i)] -= y * v;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub h: DMatrix<f64>,
    pub dim: usize,
    pub n: usize,
    pub eps: f64,
    pub relaxation: Relaxation,
    pub constraints: Vec<SparseConstraint>,
}

impl SdpProblem {
    pub fn objective(&self, q: &DMatrix<f64>) -> f64 {
        self.h.component_mul(q).sum()
    }

    /// Largest absolute constraint violation.
    pub fn constraint_violation(&self, q: &DMatrix<f64>) -> f64 {
        self.constraints
            .iter()
            .map(|c| (c.eval(q) - c.rhs).abs())
            .fold(0.0, f64::max)
    }
}

/// Number of scalar constraints for `n` data points.
pub fn constraint_count(n: usize, relaxation: Relaxation) -> usize {
    match relaxation {
        Relaxation::Redundant => 1 + 3 * n * (n + 1) / 2,
        Relaxation::Plain => 1 + 3 * n,
    }
}

pub fn build_sdp(lp: &LiftedProblem, relaxation: Relaxation) -> SdpProblem {
    let n = lp.n;
    let mut constraints = Vec::with_capacity(constraint_count(n, relaxation));
    constraints.push(SparseConstraint {
        entries: vec![(0, 0, 1.0), (1, 1, 1.0)],
        rhs: 1.0,
    });
    for m in 0..n {
        if relaxation == Relaxation::Plain && m > 0 {
            break;
        }
        for blk in (m + 1)..=n {
            for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                // Q[3blk+i, 3m+j] - Q[3blk+j, 3m+i] = 0, stored in the upper triangle
                constraints.push(SparseConstraint {
                    entries: vec![
                        (3 * m + j, 3 * blk + i, 0.5),
                        (3 * m + i, 3 * blk + j, -0.5),
                    ],
                    rhs: 0.0,
                });
            }
        }
    }
    SdpProblem {
        h: lp.h.clone(),
        dim: lp.dim(),
        n,
        eps: lp.eps,
        relaxation,
        constraints,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdpSettings {
    pub tol: f64,
    pub max_iters: usize,
    pub over_relaxation: f64,
    /// Initial ADMM penalty.
    pub rho: f64,
    /// Rebalance `rho` every this many iterations (0 disables).
    pub adapt_every: usize,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iters: 100_000,
            over_relaxation: 1.5,
            rho: 1.0,
            adapt_every: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub q: DMatrix<f64>,
    /// `tr(Q H)`, including the offset prior.
    pub cost: f64,
    /// `tr(Q H)` with the offset prior removed.
    pub cost_without_prior: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Second-largest over largest eigenvalue of `Q`.
    pub tightness_ratio: f64,
}

/// Projection onto `{X : tr(A_i X) = b_i}` in the Frobenius norm.
struct AffineProjector<'a> {
    constraints: &'a [SparseConstraint],
    gram: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl<'a> AffineProjector<'a> {
    fn new(constraints: &'a [SparseConstraint]) -> Result<Self> {
        let m = constraints.len();
        let mut by_pos: BTreeMap<(usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
        for (k, c) in constraints.iter().enumerate() {
            for &(i, j, v) in &c.entries {
                let key = if i <= j { (i, j) } else { (j, i) };
                by_pos.entry(key).or_default().push((k, v));
            }
        }
        let mut gram = DMatrix::zeros(m, m);
        for ((i, j), list) in &by_pos {
            let mult = if i == j { 1.0 } else { 2.0 };
            for &(k, v) in list {
                for &(l, w) in list {
                    gram[(k, l)] += mult * v * w;
                }
            }
        }
        let gram = gram
            .cholesky()
            .ok_or_else(|| Error::InvalidConfig("constraints are linearly dependent".into()))?;
        Ok(Self { constraints, gram })
    }

    fn project(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let r = DVector::from_iterator(
            self.constraints.len(),
            self.constraints.iter().map(|c| c.eval(y) - c.rhs),
        );
        let mult = self.gram.solve(&r);
        let mut x = y.clone();
        for (c, &m) in self.constraints.iter().zip(mult.iter()) {
            c.subtract_scaled(&mut x, m);
        }
        x
    }
}

fn tightness(q: &DMatrix<f64>) -> f64 {
    let (vals, _) = sorted_eigen(q);
    let k = vals.len();
    if k < 2 || vals[k - 1] <= 0.0 {
        return 1.0;
    }
    vals[k - 2].max(0.0) / vals[k - 1]
}

/// Solves `min tr(Q H)` over the constraint set and the PSD cone.
///
/// Running out of iterations is reported through `converged = false`.
pub fn solve_sdp(p: &SdpProblem, settings: &SdpSettings) -> Result<SdpSolution> {
    if !(settings.tol > 0.0) {
        return Err(Error::InvalidConfig("tol must be > 0".into()));
    }
    if !(settings.over_relaxation > 0.0 && settings.over_relaxation < 2.0) {
        return Err(Error::InvalidConfig("over_relaxation must lie in (0, 2)".into()));
    }
    if !(settings.rho > 0.0) {
        return Err(Error::InvalidConfig("rho must be > 0".into()));
    }
    let dim = p.dim;
    // Congruence scaling Q = S Q~ S with S = diag(H)^(-1/2): the prior entry
    // of H is tiny and would otherwise dominate the iteration count.
    let scale: Vec<f64> = (0..dim)
        .map(|i| {
            let h = p.h[(i, i)];
            if h > 0.0 { 1.0 / h.sqrt() } else { 1.0 }
        })
        .collect();
    let h_scaled = DMatrix::from_fn(dim, dim, |i, j| p.h[(i, j)] * scale[i] * scale[j]);
    let scaled: Vec<SparseConstraint> = p
        .constraints
        .iter()
        .map(|c| SparseConstraint {
            entries: c.entries.iter().map(|&(i, j, v)| (i, j, v * scale[i] * scale[j])).collect(),
            rhs: c.rhs,
        })
        .collect();
    let proj = AffineProjector::new(&scaled)?;
    let alpha = settings.over_relaxation;
    let mut rho = settings.rho;

    let mut z = DMatrix::<f64>::zeros(dim, dim);
    // scaled dual: U = Y / rho
    let mut u = DMatrix::<f64>::zeros(dim, dim);
    let mut x: DMatrix<f64>;
    let mut iterations = 0;
    let mut converged = false;
    let (mut r_norm, mut s_norm) = (f64::INFINITY, f64::INFINITY);

    for it in 1..=settings.max_iters {
        iterations = it;
        let target = &z - &u - &h_scaled / rho;
        x = proj.project(&target);
        let x_hat = &x * alpha + &z * (1.0 - alpha);
        let z_prev = std::mem::replace(&mut z, clamp_psd(&(&x_hat + &u)));
        u += &x_hat - &z;

        r_norm = (&x - &z).norm();
        s_norm = rho * (&z - &z_prev).norm();
        let eps_pri = settings.tol * (1.0 + x.norm().max(z.norm()));
        let eps_dual = settings.tol * (1.0 + rho * u.norm());
        if r_norm <= eps_pri && s_norm <= eps_dual {
            converged = true;
            break;
        }

        if settings.adapt_every > 0 && it % settings.adapt_every == 0 {
            let rel_r = r_norm / (1.0 + x.norm().max(z.norm()));
            let rel_s = s_norm / (1.0 + rho * u.norm());
            let ratio = (rel_r / rel_s.max(1e-300)).sqrt();
            if !(0.2..=5.0).contains(&ratio) && ratio.is_finite() {
                let new_rho = (rho * ratio).clamp(1e-6, 1e6);
                u *= rho / new_rho;
                rho = new_rho;
            }
        }
    }
    let z = DMatrix::from_fn(dim, dim, |i, j| z[(i, j)] * scale[i] * scale[j]);

    let cost = p.objective(&z);
    let prior = p.eps * z[(2, 2)];
    Ok(SdpSolution {
        primal_residual: p.constraint_violation(&z).max(r_norm),
        dual_residual: s_norm,
        tightness_ratio: tightness(&z),
        cost,
        cost_without_prior: cost - prior,
        iterations,
        converged,
        q: z,
    })
}

/// Dominant rank-one factor of an SDP solution, read back as a line and the
/// per-point confidences.
pub fn extract_rank1(sol: &SdpSolution) -> Result<(LiftedVector, LineParams, AlphaVector)> {
    let (vals, vecs) = sorted_eigen(&sol.q);
    let k = vals.len();
    let top = vals[k - 1];
    if !(top > 0.0) || k < 3 || !k.is_multiple_of(3) {
        return Err(Error::DegenerateSdpSolution);
    }
    let mut q = vecs.column(k - 1) * top.sqrt();
    let raw = LineParams {
        a: q[0],
        b: q[1],
        c: q[2],
    };
    let line = canonicalize(raw).map_err(|_| Error::DegenerateSdpSolution)?;
    let flip = if raw.b < 0.0 || (raw.b == 0.0 && raw.a < 0.0) { -1.0 } else { 1.0 };
    q *= flip;

    let lifted = LiftedVector { q: q.clone_owned() };
    let j = selector();
    let q0 = lifted.block(0);
    let norm0 = (q0.transpose() * j * q0)[0];
    let n = lifted.n_points();
    let alpha = (1..=n)
        .map(|i| (lifted.block(i).transpose() * j * q0)[0] / norm0)
        .collect();
    Ok((lifted, line, AlphaVector { alpha }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Dataset;
    use crate::lifting::{build_lifted, lift_solution};
    use crate::linalg::min_eigenvalue;

    fn problem(pts: &[(f64, f64)], relaxation: Relaxation) -> SdpProblem {
        let d = Dataset::from_xy(pts).unwrap();
        build_sdp(&build_lifted(&d, 1e-6).unwrap(), relaxation)
    }

    #[test]
    fn constraint_counts() {
        let p2 = problem(&[(0.0, 0.0), (1.0, 1.0)], Relaxation::Redundant);
        assert_eq!(p2.constraints.len(), 10);
        let pts: Vec<_> = (0..10).map(|i| (i as f64, 0.0)).collect();
        assert_eq!(problem(&pts, Relaxation::Redundant).constraints.len(), 166);
        assert_eq!(problem(&pts, Relaxation::Plain).constraints.len(), 31);
        assert_eq!(constraint_count(10, Relaxation::Plain), 31);
    }

    #[test]
    fn lifted_points_are_feasible() {
        let pts = [(0.0, 0.3), (1.0, 1.2), (2.0, 1.8), (-1.0, 4.0)];
        let d = Dataset::from_xy(&pts).unwrap();
        let p = problem(&pts, Relaxation::Redundant);
        for theta in [0.1, 1.0, 2.5] {
            let line = LineParams::from_angle(theta, 0.7);
            let q = lift_solution(&line, &AlphaVector::optimal(&line, &d)).unwrap();
            let qq = &q.q * q.q.transpose();
            assert!(p.constraint_violation(&qq) < 1e-15);
        }
    }

    #[test]
    fn affine_projection_is_idempotent() {
        let p = problem(&[(0.0, 0.3), (1.0, 1.2), (2.0, 1.8)], Relaxation::Redundant);
        let proj = AffineProjector::new(&p.constraints).unwrap();
        let mut y = DMatrix::from_fn(p.dim, p.dim, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        crate::linalg::symmetrize(&mut y);
        let x = proj.project(&y);
        assert!(p.constraint_violation(&x) < 1e-12);
        assert!((proj.project(&x) - &x).amax() < 1e-12);
    }

    #[test]
    fn collinear_instance_is_tight() {
        let pts: Vec<_> = (0..5).map(|i| { let x = i as f64 * 0.5 - 1.0; (x, 0.5 * x + 0.2) }).collect();
        let p = problem(&pts, Relaxation::Redundant);
        let sol = solve_sdp(&p, &SdpSettings::default()).unwrap();
        assert!(sol.converged, "{} iterations", sol.iterations);
        let (_, line, alpha) = extract_rank1(&sol).unwrap();
        assert!(sol.cost <= 1e-6 * line.c * line.c + 1e-6, "cost {}", sol.cost);
        assert!(sol.tightness_ratio <= 1e-6, "ratio {}", sol.tightness_ratio);
        assert!(min_eigenvalue(&sol.q) >= -1e-7 * (1.0 + sol.q.trace()));
        let truth = LineParams::new(-0.5, 1.0, 0.2).unwrap();
        assert!(line.approx_eq(&truth, 1e-3));
        assert!(alpha.alpha.iter().all(|a| (a - 1.0).abs() < 1e-3));
    }

    #[test]
    fn rank1_extraction() {
        let q = DVector::from_vec(vec![0.6, -0.8, 1.0, 0.3, -0.4, 0.5]);
        let sol = SdpSolution {
            q: &q * q.transpose(),
            cost: 0.0,
            cost_without_prior: 0.0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            iterations: 0,
            converged: true,
            tightness_ratio: 0.0,
        };
        let (lifted, line, alpha) = extract_rank1(&sol).unwrap();
        assert!((lifted.q.clone() + &q).amax() < 1e-12);
        assert!(line.approx_eq(&LineParams::new(0.6, -0.8, 1.0).unwrap(), 1e-12));
        assert!((alpha.alpha[0] - 0.5).abs() < 1e-12);

        let rank2 = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.5, 0.0, 0.0, 0.0, 0.0]));
        let sol2 = SdpSolution { q: rank2.clone(), tightness_ratio: tightness(&rank2), ..sol.clone() };
        assert!(extract_rank1(&sol2).is_ok());
        assert!((sol2.tightness_ratio - 0.5).abs() < 1e-12);

        let zero = SdpSolution { q: DMatrix::zeros(6, 6), ..sol };
        assert_eq!(extract_rank1(&zero).unwrap_err(), Error::DegenerateSdpSolution);
    }
}
