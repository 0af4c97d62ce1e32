//! Geman-McClure M-estimation by iteratively reweighted least squares.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{gm_cost, residual, Dataset, LineParams};
use crate::tls::{check_weights, solve_weighted};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrlsConfig {
    pub max_iters: usize,
    /// Stop once the objective changes by less than this between iterations.
    pub cost_tol: f64,
    /// Lower bound applied to every recomputed weight.
    pub weight_floor: f64,
    /// Weight of a `c^2` prior added to the robust objective. Set this to the
    /// lifting regularizer when the result is going to be certified, so the
    /// fixed point is stationary for the same cost the certificate uses.
    pub c_prior: f64,
    /// When set, convergence additionally requires every line parameter to
    /// move by less than this. The cost change alone stalls near machine
    /// precision while the line is still drifting by about its square root.
    pub step_tol: Option<f64>,
}

impl Default for IrlsConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            cost_tol: 1e-10,
            weight_floor: 1e-12,
            c_prior: 0.0,
            step_tol: None,
        }
    }
}

impl IrlsConfig {
    /// Settings for candidates that will be handed to the certifier: the
    /// offset prior matches the lifting regularizer and iteration continues
    /// until the line itself has settled.
    pub fn for_certification(eps: f64) -> Self {
        Self {
            max_iters: 1000,
            c_prior: eps,
            step_tol: Some(1e-13),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if !(self.cost_tol > 0.0) {
            return Err(Error::InvalidConfig("cost_tol must be > 0".into()));
        }
        if self.step_tol.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::InvalidConfig("step_tol must be > 0".into()));
        }
        if !(self.weight_floor >= 0.0) || !(self.c_prior >= 0.0) {
            return Err(Error::InvalidConfig(
                "weight_floor and c_prior must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub gm_cost: f64,
    pub line: LineParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrlsResult {
    pub line: LineParams,
    /// Weights recomputed from the residuals of `line`.
    pub weights: Vec<f64>,
    pub gm_cost_final: f64,
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
    pub iterations: usize,
}

/// IRLS weight `rho'(e) / e = 2 / (1 + e^2)^2`.
#[inline]
pub fn gm_weight(e: f64) -> f64 {
    let s = 1.0 + e * e;
    2.0 / (s * s)
}

/// One weighted solve with the weights held fixed.
pub fn irls_step(d: &Dataset, weights: &[f64]) -> Result<(LineParams, f64)> {
    check_weights(d, Some(weights))?;
    let sol = solve_weighted(d, Some(weights), 0.0)?;
    Ok((sol.line, gm_cost(&sol.line, d)))
}

fn reweight(d: &Dataset, line: &LineParams, floor: f64) -> Vec<f64> {
    d.iter()
        .map(|p| gm_weight(residual(line, p)).max(floor))
        .collect()
}

pub fn run_irls(d: &Dataset, cfg: &IrlsConfig, init_weights: Option<&[f64]>) -> Result<IrlsResult> {
    cfg.validate()?;
    d.require(2)?;
    let mut weights = match init_weights {
        Some(w) => {
            check_weights(d, Some(w))?;
            w.to_vec()
        }
        None => vec![1.0; d.len()],
    };

    let objective = |line: &LineParams| gm_cost(line, d) + cfg.c_prior * line.c * line.c;
    let mut trace = Vec::new();
    let mut prev: Option<f64> = None;
    let mut converged = false;
    let mut line = None;

    for _ in 0..cfg.max_iters {
        let sol = solve_weighted(d, Some(&weights), 2.0 * cfg.c_prior)?;
        let cost = objective(&sol.line);
        trace.push(TraceEntry {
            gm_cost: gm_cost(&sol.line, d),
            line: sol.line,
        });
        weights = reweight(d, &sol.line, cfg.weight_floor);
        let step = line.map_or(f64::INFINITY, |l: LineParams| {
            (l.a - sol.line.a)
                .abs()
                .max((l.b - sol.line.b).abs())
                .max((l.c - sol.line.c).abs())
        });
        line = Some(sol.line);
        let settled = cfg.step_tol.is_none_or(|t| step < t);
        if let Some(p) = prev {
            if (cost - p).abs() < cfg.cost_tol && settled {
                converged = true;
                break;
            }
        }
        prev = Some(cost);
    }

    let line = line.expect("max_iters >= 1");
    Ok(IrlsResult {
        line,
        gm_cost_final: gm_cost(&line, d),
        iterations: trace.len(),
        weights,
        trace,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::residuals;
    use crate::tls::solve_tls;

    #[test]
    fn gm_weight_examples() {
        assert_eq!(gm_weight(0.0), 2.0);
        assert_eq!(gm_weight(1.0), 0.5);
        assert!((gm_weight(3.0) - 0.02).abs() < 1e-17);
        assert_eq!(gm_weight(-2.5), gm_weight(2.5));
    }

    #[test]
    fn gm_weight_is_derivative_ratio() {
        // rho'(e) / e by central differences
        for &e in &[0.3, 1.0, 2.0, -4.0] {
            let h = 1e-6;
            let rho = crate::geometry::gm_rho;
            let fd = (rho(e + h) - rho(e - h)) / (2.0 * h) / e;
            assert!((fd - gm_weight(e)).abs() < 1e-8, "{e}");
        }
    }

    #[test]
    fn unit_weights_reproduce_tls() {
        let d = Dataset::from_xy(&[(0.0, 0.1), (1.0, 0.9), (2.0, 2.2), (3.0, 2.8), (1.0, 5.0)]).unwrap();
        let (line, cost) = irls_step(&d, &[1.0; 5]).unwrap();
        let tls = solve_tls(&d, None).unwrap().line;
        assert!(line.approx_eq(&tls, 1e-14));
        assert!((cost - gm_cost(&tls, &d)).abs() < 1e-14);
    }

    #[test]
    fn concentrated_weights_interpolate() {
        let d = Dataset::from_xy(&[(0.0, 0.0), (4.0, 2.0), (1.0, 7.0), (-3.0, 3.0)]).unwrap();
        let (line, _) = irls_step(&d, &[1.0, 1.0, 1e-12, 1e-12]).unwrap();
        let e = residuals(&line, &d);
        assert!(e[0].abs() < 1e-9 && e[1].abs() < 1e-9);
    }

    #[test]
    fn collinear_converges_fast() {
        let pts: Vec<_> = (0..8).map(|i| (i as f64, 0.5 * i as f64 - 1.0)).collect();
        let d = Dataset::from_xy(&pts).unwrap();
        let r = run_irls(&d, &IrlsConfig::default(), None).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 2);
        assert!(r.gm_cost_final <= 1e-20);
    }

    #[test]
    fn final_weights_match_residuals() {
        let d = Dataset::from_xy(&[(0.0, 0.0), (1.0, 1.1), (2.0, 1.9), (3.0, 3.0), (0.0, 4.0), (4.0, 0.0)]).unwrap();
        let cfg = IrlsConfig::default();
        let r = run_irls(&d, &cfg, None).unwrap();
        for (w, e) in r.weights.iter().zip(residuals(&r.line, &d)) {
            assert!((w - gm_weight(e).max(cfg.weight_floor)).abs() < 1e-10);
            assert!(*w >= cfg.weight_floor && *w <= 2.0);
        }
        assert_eq!(r.trace.len(), r.iterations);
    }

    #[test]
    fn non_convergence_is_flagged_not_raised() {
        let d = Dataset::from_xy(&[(0.0, 0.0), (1.0, 1.1), (2.0, 1.9), (3.0, 3.0), (0.0, 4.0), (4.0, 0.0)]).unwrap();
        let cfg = IrlsConfig { max_iters: 1, ..Default::default() };
        let r = run_irls(&d, &cfg, None).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn config_validation() {
        let d = Dataset::from_xy(&[(0.0, 0.0), (1.0, 1.0)]).unwrap();
        let bad = IrlsConfig { max_iters: 0, ..Default::default() };
        assert!(run_irls(&d, &bad, None).is_err());
        let bad = IrlsConfig { cost_tol: 0.0, ..Default::default() };
        assert!(run_irls(&d, &bad, None).is_err());
        assert!(run_irls(&d, &IrlsConfig::default(), Some(&[1.0, 0.0])).is_err());
        let bad = IrlsConfig { step_tol: Some(0.0), ..Default::default() };
        assert!(run_irls(&d, &bad, None).is_err());
    }

    #[test]
    fn step_tol_keeps_iterating_until_the_line_settles() {
        let d = Dataset::from_xy(&[(0.0, 0.1), (1.0, 0.9), (2.0, 2.1), (3.0, 3.0), (0.5, 3.5), (3.0, -1.0)]).unwrap();
        let loose = IrlsConfig { cost_tol: 1e-6, ..Default::default() };
        let tight = IrlsConfig { step_tol: Some(1e-13), max_iters: 1000, ..loose };
        let a = run_irls(&d, &loose, None).unwrap();
        let b = run_irls(&d, &tight, None).unwrap();
        assert!(a.converged && b.converged);
        assert!(b.iterations > a.iterations);
        let last = b.trace[b.trace.len() - 2].line;
        assert!(last.approx_eq(&b.line, 1e-12));
    }

    #[test]
    fn prior_pulls_offset_towards_zero() {
        let d = Dataset::from_xy(&[(-2.0, 3.0), (0.0, 3.1), (2.0, 2.9), (1.0, 3.0)]).unwrap();
        let plain = run_irls(&d, &IrlsConfig::default(), None).unwrap().line;
        let pulled = run_irls(&d, &IrlsConfig { c_prior: 0.5, ..Default::default() }, None).unwrap().line;
        assert!(pulled.c.abs() < plain.c.abs());
    }
}
