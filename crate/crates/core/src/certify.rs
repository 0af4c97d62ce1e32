//! Post-hoc global optimality certificate for a candidate robust fit.
//!
//! For a candidate `q` with cost `lambda`, the Lagrangian of the lifted QCQP
//! with the redundant parallelism constraints is `lambda + qᵀ K q` where
//!
//! ```text
//! K = M - Gamma(gamma),   M = H - lambda * blockdiag(J, 0, ..., 0)
//! ```
//!
//! and `Gamma` places the cross-product matrices of the multipliers
//! `gamma_nm` (n > m) below the block diagonal and their transposes above it.
//! Any such `K` that is PSD proves that no feasible point costs less than
//! `lambda`. Douglas-Rachford splitting looks for one by alternating between
//! the PSD cone and the affine set of structured `K` with `K q = 0`.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Dataset, LineParams};
use crate::lifting::{
    block, build_lifted, cross, lift_solution, lifted_cost, selector, set_block, vee, AlphaVector,
    LiftedVector,
};
use crate::linalg::{check_symmetric, clamp_psd, min_eigenvalue, psd_pinv};

/// Relative eigenvalue cutoff for `(R Rᵀ)^+`.
const PINV_CUTOFF: f64 = 1e-10;

/// Multiplier pairs `(n, m)` with `n > m`, in stacking order
/// `(1,0), (2,0), ..., (N,0), (2,1), ..., (N,N-1)`.
pub fn pair_order(n_points: usize) -> Vec<(usize, usize)> {
    (0..n_points)
        .flat_map(|m| ((m + 1)..=n_points).map(move |n| (n, m)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaMultipliers {
    pub n_points: usize,
    /// One 3-vector per pair in [`pair_order`].
    pub gamma: Vec<[f64; 3]>,
}

impl GammaMultipliers {
    pub fn zeros(n_points: usize) -> Self {
        Self {
            n_points,
            gamma: vec![[0.0; 3]; n_points * (n_points + 1) / 2],
        }
    }

    pub fn from_vector(n_points: usize, v: &DVector<f64>) -> Result<Self> {
        let pairs = n_points * (n_points + 1) / 2;
        if v.len() != 3 * pairs {
            return Err(Error::DimensionMismatch {
                expected: 3 * pairs,
                got: v.len(),
            });
        }
        Ok(Self {
            n_points,
            gamma: (0..pairs).map(|k| [v[3 * k], v[3 * k + 1], v[3 * k + 2]]).collect(),
        })
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(3 * self.gamma.len(), self.gamma.iter().flatten().copied())
    }
}

/// Builds the symmetric block matrix `Gamma` from stacked multipliers.
pub fn gamma_to_matrix(g: &GammaMultipliers) -> Result<DMatrix<f64>> {
    let n = g.n_points;
    let pairs = pair_order(n);
    if g.gamma.len() != pairs.len() {
        return Err(Error::DimensionMismatch {
            expected: pairs.len(),
            got: g.gamma.len(),
        });
    }
    let dim = 3 * (n + 1);
    let mut out = DMatrix::zeros(dim, dim);
    for (&(bn, bm), v) in pairs.iter().zip(&g.gamma) {
        let x = cross(&Vector3::from(*v));
        set_block(&mut out, bn, bm, &x);
        set_block(&mut out, bm, bn, &x.transpose());
    }
    Ok(out)
}

fn block_count(dim_rows: usize, dim_cols: usize) -> Result<usize> {
    if dim_rows != dim_cols || dim_rows < 3 || !dim_rows.is_multiple_of(3) {
        return Err(Error::InvalidGamma(format!(
            "expected a square matrix with a multiple of 3 rows, got {dim_rows}x{dim_cols}"
        )));
    }
    Ok(dim_rows / 3 - 1)
}

/// Inverse of [`gamma_to_matrix`]. Rejects matrices that do not have the
/// exact `Gamma` structure (zero diagonal blocks, skew blocks below the
/// diagonal mirrored by their transposes above).
pub fn matrix_to_gamma(m: &DMatrix<f64>) -> Result<GammaMultipliers> {
    let n = block_count(m.nrows(), m.ncols())?;
    let tol = 1e-10 * (1.0 + m.amax());
    for i in 0..=n {
        if block(m, i, i).amax() > tol {
            return Err(Error::InvalidGamma(format!("diagonal block {i} is not zero")));
        }
    }
    let mut gamma = Vec::new();
    for (bn, bm) in pair_order(n) {
        let lower = block(m, bn, bm);
        if (lower + lower.transpose()).amax() > tol {
            return Err(Error::InvalidGamma(format!("block ({bn},{bm}) is not skew-symmetric")));
        }
        if (block(m, bm, bn) - lower.transpose()).amax() > tol {
            return Err(Error::InvalidGamma(format!("block ({bm},{bn}) does not mirror ({bn},{bm})")));
        }
        gamma.push(vee(&lower).into());
    }
    Ok(GammaMultipliers { n_points: n, gamma })
}

/// Multipliers of the structured matrix nearest to `m` in Frobenius norm.
fn nearest_gamma(m: &DMatrix<f64>, n: usize) -> DVector<f64> {
    let pairs = pair_order(n);
    let mut out = DVector::zeros(3 * pairs.len());
    for (k, &(bn, bm)) in pairs.iter().enumerate() {
        let avg = (block(m, bn, bm) + block(m, bm, bn).transpose()) * 0.5;
        out.fixed_rows_mut::<3>(3 * k).copy_from(&vee(&avg));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateProblem {
    pub n_points: usize,
    pub m: DMatrix<f64>,
    /// Candidate cost `qᵀ H q` (prior included).
    pub lambda: f64,
    pub q: LiftedVector,
    pub r: DMatrix<f64>,
    pub rrt_pinv: DMatrix<f64>,
    /// `M q`, the right-hand side of `R gamma = M q`.
    pub mq: DVector<f64>,
    pub eps: f64,
}

impl CertificateProblem {
    pub fn m_norm(&self) -> f64 {
        self.m.norm()
    }
}

/// Assembles `R` so that `Gamma(gamma) q == R gamma` for every `gamma`.
pub fn build_r(q: &LiftedVector) -> DMatrix<f64> {
    let n = q.n_points();
    let pairs = pair_order(n);
    let mut r = DMatrix::zeros(3 * (n + 1), 3 * pairs.len());
    for (k, &(bn, bm)) in pairs.iter().enumerate() {
        // gamma_nm^x q_m = -q_m^x gamma_nm in block-row n,
        // gamma_nm^xT q_n = q_n^x gamma_nm in block-row m.
        r.fixed_view_mut::<3, 3>(3 * bn, 3 * k)
            .copy_from(&(-cross(&q.block(bm))));
        r.fixed_view_mut::<3, 3>(3 * bm, 3 * k)
            .copy_from(&cross(&q.block(bn)));
    }
    r
}

pub fn build_certificate_problem(d: &Dataset, candidate: &LineParams, eps: f64) -> Result<CertificateProblem> {
    let lp = build_lifted(d, eps)?;
    let alpha = AlphaVector::optimal(candidate, d);
    let q = lift_solution(candidate, &alpha)?;
    let lambda = lifted_cost(&q, &lp)?;

    let mut m = lp.h.clone();
    let top = block(&m, 0, 0) - selector() * lambda;
    set_block(&mut m, 0, 0, &top);

    let r = build_r(&q);
    let rrt = &r * r.transpose();
    let rrt_pinv = psd_pinv(&rrt, PINV_CUTOFF);
    let mq = &m * &q.q;
    Ok(CertificateProblem {
        n_points: d.len(),
        m,
        lambda,
        q,
        r,
        rrt_pinv,
        mq,
        eps,
    })
}

/// Nearest PSD matrix in Frobenius norm: negative eigenvalues clamped to 0.
pub fn proj_psd(k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(k, 1e-10)?;
    Ok(clamp_psd(k))
}

/// Projects `k` onto the structured matrices `M - Gamma(gamma)` satisfying
/// `K q = 0` (as closely as `M q` allows):
///
/// 1. `Gamma = M - K`
/// 2. read `gamma` off `Gamma` (least squares on the off-diagonal blocks)
/// 3. `gamma' = gamma - Rᵀ (R Rᵀ)^+ (R gamma - M q)`
/// 4. rebuild `Gamma'`
/// 5. `K' = M - Gamma'`
pub fn proj_sub(k: &DMatrix<f64>, prob: &CertificateProblem) -> Result<DMatrix<f64>> {
    let dim = prob.m.nrows();
    if k.nrows() != dim || k.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: k.nrows(),
        });
    }
    check_symmetric(k, 1e-10)?;
    let gamma_mat = &prob.m - k;
    let gamma = nearest_gamma(&gamma_mat, prob.n_points);
    let resid = &prob.r * &gamma - &prob.mq;
    let corrected = gamma - prob.r.transpose() * (&prob.rrt_pinv * resid);
    let g = GammaMultipliers::from_vector(prob.n_points, &corrected)?;
    Ok(&prob.m - gamma_to_matrix(&g)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrConfig {
    /// Relaxation step, stable for `0 < beta < 2`.
    pub beta: f64,
    pub max_iters: usize,
    /// Accept when `lambda_min(K_2) >= -cert_tol * (1 + ||M||_F)`.
    pub cert_tol: f64,
    /// Accept only when `||K_2 q|| <= sub_tol * (1 + ||M||_F)`.
    pub sub_tol: f64,
    /// Return as soon as the acceptance test passes instead of running all
    /// `max_iters` iterations.
    pub stop_when_certified: bool,
}

impl Default for DrConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            max_iters: 300,
            cert_tol: 1e-5,
            sub_tol: 1e-6,
            stop_when_certified: true,
        }
    }
}

impl DrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 2.0) {
            return Err(Error::InvalidConfig("beta must lie in (0, 2)".into()));
        }
        if !(self.cert_tol >= 0.0 && self.sub_tol >= 0.0) {
            return Err(Error::InvalidConfig("tolerances must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateResult {
    pub certified: bool,
    pub min_eig_k2: f64,
    pub iterations_used: usize,
    pub k_final: DMatrix<f64>,
    pub gamma_final: GammaMultipliers,
    pub eig_trace: Vec<f64>,
    /// `||K_2 q||` at the last iteration.
    pub subspace_residual: f64,
    pub lambda: f64,
    pub m_norm: f64,
    /// Absolute eigenvalue tolerance that was applied.
    pub cert_threshold: f64,
    pub diverged: bool,
}

/// Runs Douglas-Rachford from `Gamma = 0`.
///
/// Failing to certify is a normal outcome (the test is sufficient, not
/// necessary) and is reported through `certified = false`.
pub fn certify_problem(prob: &CertificateProblem, cfg: &DrConfig) -> Result<CertificateResult> {
    cfg.validate()?;
    let m_norm = prob.m_norm();
    let eig_tol = cfg.cert_tol * (1.0 + m_norm);
    let sub_tol = cfg.sub_tol * (1.0 + m_norm);

    let mut k = prob.m.clone();
    let mut k2 = prob.m.clone();
    let mut eig_trace = Vec::with_capacity(cfg.max_iters);
    let mut certified = false;
    let mut diverged = false;
    let mut subspace_residual = (&prob.m * &prob.q.q).norm();

    for _ in 0..cfg.max_iters {
        let k1 = clamp_psd(&k);
        k2 = proj_sub(&(&k1 * 2.0 - &k), prob)?;
        k += (&k2 - &k1) * cfg.beta;

        let me = min_eigenvalue(&k2);
        eig_trace.push(me);
        subspace_residual = (&k2 * &prob.q.q).norm();
        certified = me >= -eig_tol && subspace_residual <= sub_tol;
        if certified && cfg.stop_when_certified {
            break;
        }
        if k.norm() > 1e6 * m_norm {
            diverged = true;
            certified = false;
            break;
        }
    }

    let gamma_final = matrix_to_gamma(&(&prob.m - &k2))?;
    Ok(CertificateResult {
        certified,
        min_eig_k2: eig_trace.last().copied().unwrap_or_else(|| min_eigenvalue(&k2)),
        iterations_used: eig_trace.len(),
        k_final: k2,
        gamma_final,
        eig_trace,
        subspace_residual,
        lambda: prob.lambda,
        m_norm,
        cert_threshold: eig_tol,
        diverged,
    })
}

pub fn certify(d: &Dataset, candidate: &LineParams, eps: f64, cfg: &DrConfig) -> Result<CertificateResult> {
    cfg.validate()?;
    let prob = build_certificate_problem(d, candidate, eps)?;
    certify_problem(&prob, cfg)
}

/// Writes the per-iteration eigenvalue trace followed by the final `Gamma`
/// as whitespace-separated numbers.
pub fn write_trace<W: Write>(res: &CertificateResult, mut w: W) -> std::io::Result<()> {
    writeln!(w, "# iteration min_eig_K2")?;
    for (i, e) in res.eig_trace.iter().enumerate() {
        writeln!(w, "{} {:e}", i + 1, e)?;
    }
    let gamma = gamma_to_matrix(&res.gamma_final).map_err(std::io::Error::other)?;
    writeln!(w, "# Gamma {}x{}", gamma.nrows(), gamma.ncols())?;
    for row in gamma.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn dump_trace(res: &CertificateResult, path: &Path) -> std::io::Result<()> {
    let f = std::fs::File::create(path)?;
    write_trace(res, std::io::BufWriter::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_gamma(rng: &mut ChaCha8Rng, n: usize) -> GammaMultipliers {
        let mut g = GammaMultipliers::zeros(n);
        for v in &mut g.gamma {
            *v = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        }
        g
    }

    fn sample_problem() -> (Dataset, CertificateProblem) {
        let d = Dataset::from_xy(&[(0.0, 0.1), (1.0, 0.9), (2.0, 2.1), (3.0, 3.0)]).unwrap();
        let cfg = crate::irls::IrlsConfig { cost_tol: 1e-15, max_iters: 500, c_prior: 1e-6, ..Default::default() };
        let line = crate::irls::run_irls(&d, &cfg, None).unwrap().line;
        let p = build_certificate_problem(&d, &line, 1e-6).unwrap();
        (d, p)
    }

    #[test]
    fn single_pair_r_layout() {
        let d = Dataset::from_xy(&[(1.0, 2.0)]).unwrap();
        let line = LineParams::from_angle(0.4, 0.3);
        let p = build_certificate_problem(&d, &line, 1e-6).unwrap();
        assert_eq!(p.r.shape(), (6, 3));
        let r_top = p.r.fixed_view::<3, 3>(0, 0).into_owned();
        let r_bot = p.r.fixed_view::<3, 3>(3, 0).into_owned();
        assert_eq!(r_top, cross(&p.q.block(1)));
        assert_eq!(r_bot, -cross(&p.q.block(0)));
    }

    #[test]
    fn three_point_r_pattern() {
        let d = Dataset::from_xy(&[(1.0, 2.0), (0.0, 1.0), (-1.0, 3.0)]).unwrap();
        let line = LineParams::from_angle(1.1, 0.5);
        let p = build_certificate_problem(&d, &line, 1e-6).unwrap();
        assert_eq!(p.r.shape(), (12, 18));
        let qx = |i: usize| cross(&p.q.block(i));
        let z = nalgebra::Matrix3::<f64>::zeros();
        // column groups: 10 20 30 21 31 32
        let expected = [
            [qx(1), qx(2), qx(3), z, z, z],
            [-qx(0), z, z, qx(2), qx(3), z],
            [z, -qx(0), z, -qx(1), z, qx(3)],
            [z, z, -qx(0), z, -qx(1), -qx(2)],
        ];
        for (br, row) in expected.iter().enumerate() {
            for (bc, b) in row.iter().enumerate() {
                assert_eq!(p.r.fixed_view::<3, 3>(3 * br, 3 * bc).into_owned(), *b, "({br},{bc})");
            }
        }
    }

    #[test]
    fn r_gamma_matches_gamma_q() {
        let (_, p) = sample_problem();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let g = random_gamma(&mut rng, p.n_points);
            let lhs = gamma_to_matrix(&g).unwrap() * &p.q.q;
            let rhs = &p.r * g.to_vector();
            assert!((lhs - rhs).amax() <= 1e-12);
        }
    }

    #[test]
    fn gamma_round_trip_and_structure() {
        let zero = gamma_to_matrix(&GammaMultipliers::zeros(3)).unwrap();
        assert_eq!(zero, DMatrix::zeros(12, 12));

        let mut g = GammaMultipliers::zeros(2);
        g.gamma[0] = [0.0, 0.0, 1.0];
        let m = gamma_to_matrix(&g).unwrap();
        let e3 = cross(&Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(block(&m, 1, 0), e3);
        assert_eq!(block(&m, 0, 1), e3.transpose());

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = random_gamma(&mut rng, 5);
        let m = gamma_to_matrix(&g).unwrap();
        assert_eq!(m, m.transpose());
        assert_eq!(matrix_to_gamma(&m).unwrap(), g);

        let mut bad = m.clone();
        bad[(3, 0)] += 1e-3;
        assert!(matches!(matrix_to_gamma(&bad), Err(Error::InvalidGamma(_))));
        let mut diag = m;
        diag[(4, 4)] = 1.0;
        assert!(matches!(matrix_to_gamma(&diag), Err(Error::InvalidGamma(_))));
    }

    #[test]
    fn proj_psd_examples() {
        let d = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -2.0]);
        let p = proj_psd(&d).unwrap();
        assert!((p - DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).amax() < 1e-15);
        let psd = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!((proj_psd(&psd).unwrap() - &psd).amax() < 1e-12);
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(proj_psd(&asym), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn proj_sub_fixes_m_and_kills_kq() {
        let (_, p) = sample_problem();
        let k = proj_sub(&p.m, &p).unwrap();
        assert!((&k * &p.q.q).norm() < 1e-9, "{}", (&k * &p.q.q).norm());
        let again = proj_sub(&k, &p).unwrap();
        assert!((again - &k).amax() < 1e-12);
        // diagonal blocks are untouched
        for i in 0..=p.n_points {
            assert_eq!(block(&k, i, i), block(&p.m, i, i));
        }
    }

    #[test]
    fn lambda_matches_lifted_cost() {
        let (d, p) = sample_problem();
        let lp = build_lifted(&d, 1e-6).unwrap();
        assert!((p.lambda - lifted_cost(&p.q, &lp).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn full_run_continues_after_certification() {
        let (_, p) = sample_problem();
        let early = certify_problem(&p, &DrConfig::default()).unwrap();
        let full = certify_problem(&p, &DrConfig { stop_when_certified: false, ..DrConfig::default() }).unwrap();
        assert!(early.certified && full.certified);
        assert!(early.iterations_used < 300);
        assert_eq!(full.iterations_used, 300);
        assert_eq!(full.eig_trace.len(), 300);
        assert!(full.min_eig_k2 >= early.min_eig_k2 - 1e-12);
    }

    #[test]
    fn beta_out_of_range_rejected() {
        let (d, p) = sample_problem();
        let line = LineParams::new(p.q.q[0], p.q.q[1], p.q.q[2]).unwrap();
        for beta in [0.0, 2.0, -1.0] {
            let cfg = DrConfig { beta, ..Default::default() };
            assert!(certify(&d, &line, 1e-6, &cfg).is_err());
        }
    }

    #[test]
    fn trace_dump_layout() {
        let (_, p) = sample_problem();
        let res = certify_problem(&p, &DrConfig { max_iters: 3, ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        write_trace(&res, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let dim = p.m.nrows();
        assert!(text.starts_with("# iteration min_eig_K2\n"));
        assert!(text.contains(&format!("# Gamma {dim}x{dim}")));
        assert_eq!(text.lines().count(), 2 + res.eig_trace.len() + dim);
    }
}
