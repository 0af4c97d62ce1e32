//! End-to-end fitting runs that produce a [`Report`].

use std::collections::BTreeMap;
use std::time::Instant;

use crate::certify::{certify, CertificateResult, DrConfig};
use crate::error::{Error, Result};
use crate::geometry::{gm_cost, residual, tls_cost, Dataset, LineParams};
use crate::irls::{gm_weight, run_irls, IrlsConfig};
use crate::lifting::{build_lifted, DEFAULT_EPS};
use crate::oracle::{grid_search, OracleConfig};
use crate::report::{CertificateSummary, IrlsSummary, Method, OracleSummary, Report, SdpSummary};
use crate::sdp::{build_sdp, extract_rank1, solve_sdp, Relaxation, SdpSettings, MAX_SDP_POINTS};
use crate::tls::solve_tls;

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub method: Method,
    /// Offset regularizer of the lifted problem.
    pub eps: f64,
    pub certify: bool,
    pub oracle: bool,
    pub irls_iters: usize,
    pub dr: DrConfig,
    pub sdp: SdpSettings,
    pub relaxation: Relaxation,
    pub oracle_cfg: OracleConfig,
    pub seed: u64,
    pub timings: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            method: Method::Irls,
            eps: DEFAULT_EPS,
            certify: false,
            oracle: false,
            irls_iters: IrlsConfig::for_certification(DEFAULT_EPS).max_iters,
            dr: DrConfig::default(),
            sdp: SdpSettings::default(),
            relaxation: Relaxation::Redundant,
            oracle_cfg: OracleConfig::default(),
            seed: 0,
            timings: false,
        }
    }
}

impl FitOptions {
    fn irls_config(&self) -> IrlsConfig {
        IrlsConfig {
            max_iters: self.irls_iters,
            ..IrlsConfig::for_certification(self.eps)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutput {
    pub report: Report,
    /// Full certificate, including the final `K` and `Gamma`.
    pub certificate: Option<CertificateResult>,
}

struct Clock {
    enabled: bool,
    laps: BTreeMap<String, f64>,
}

impl Clock {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        if self.enabled {
            self.laps
                .insert(stage.to_string(), start.elapsed().as_secs_f64() * 1e3);
        }
        out
    }
}

fn base_report(d: &Dataset, method: Method, line: LineParams, opts: &FitOptions) -> Result<Report> {
    let gm = gm_cost(&line, d);
    Ok(Report {
        method,
        n_points: d.len(),
        eps: opts.eps,
        line,
        tls_cost: tls_cost(&line, d)?,
        gm_cost: gm,
        gm_cost_with_prior: gm + opts.eps * line.c * line.c,
        weights: None,
        alphas: None,
        irls: None,
        certificate: None,
        sdp: None,
        oracle: None,
        seed: opts.seed,
        timings: BTreeMap::new(),
    })
}

/// Polishes a line into a stationary point of the regularized cost, starting
/// IRLS from the weights the line induces.
fn polish(d: &Dataset, line: &LineParams, opts: &FitOptions) -> Result<LineParams> {
    let w: Vec<f64> = d.iter().map(|p| gm_weight(residual(line, p))).collect();
    Ok(run_irls(d, &opts.irls_config(), Some(&w))?.line)
}

fn finish(
    d: &Dataset,
    mut report: Report,
    candidate: Option<LineParams>,
    opts: &FitOptions,
    clock: &mut Clock,
) -> Result<FitOutput> {
    let mut certificate = None;
    if let Some(candidate) = candidate {
        let res = clock.time("certify", || certify(d, &candidate, opts.eps, &opts.dr))?;
        report.certificate = Some(CertificateSummary::new(&res, candidate));
        certificate = Some(res);
    }
    if opts.oracle {
        let o = clock.time("oracle", || grid_search(d, &opts.oracle_cfg))?;
        report.oracle = Some(OracleSummary {
            cost: o.cost,
            line: o.line,
        });
    }
    report.timings = std::mem::take(&mut clock.laps);
    Ok(FitOutput {
        report,
        certificate,
    })
}

/// Runs the requested method and the optional certificate and oracle.
///
/// The IRLS path always minimizes the regularized cost used by the lifted
/// problem, so its result is directly certifiable. For the SDP path the
/// extracted line is polished with IRLS before certification; the report
/// records which line was certified.
pub fn fit(d: &Dataset, opts: &FitOptions) -> Result<FitOutput> {
    if !(opts.eps >= 0.0) {
        return Err(Error::InvalidConfig("eps must be >= 0".into()));
    }
    opts.dr.validate()?;
    let mut clock = Clock {
        enabled: opts.timings,
        laps: BTreeMap::new(),
    };
    match opts.method {
        Method::Tls => {
            let sol = clock.time("tls", || solve_tls(d, None))?;
            let report = base_report(d, Method::Tls, sol.line, opts)?;
            finish(d, report, opts.certify.then_some(sol.line), opts, &mut clock)
        }
        Method::Irls => {
            let res = clock.time("irls", || run_irls(d, &opts.irls_config(), None))?;
            let mut report = base_report(d, Method::Irls, res.line, opts)?;
            report.weights = Some(res.weights);
            report.irls = Some(IrlsSummary {
                iterations: res.iterations,
                converged: res.converged,
            });
            finish(d, report, opts.certify.then_some(res.line), opts, &mut clock)
        }
        Method::Sdp => {
            if d.len() > MAX_SDP_POINTS {
                return Err(Error::TooManyPoints {
                    max: MAX_SDP_POINTS,
                    got: d.len(),
                });
            }
            d.require(2)?;
            let sol = clock.time("sdp", || {
                let lp = build_lifted(d, opts.eps)?;
                solve_sdp(&build_sdp(&lp, opts.relaxation), &opts.sdp)
            })?;
            let (_, line, alpha) = extract_rank1(&sol)?;
            let mut report = base_report(d, Method::Sdp, line, opts)?;
            report.alphas = Some(alpha.alpha);
            report.sdp = Some(SdpSummary {
                cost: sol.cost,
                cost_without_prior: sol.cost_without_prior,
                tightness_ratio: sol.tightness_ratio,
                iterations: sol.iterations,
                converged: sol.converged,
            });
            let candidate = if opts.certify {
                Some(clock.time("polish", || polish(d, &line, opts))?)
            } else {
                None
            };
            finish(d, report, candidate, opts, &mut clock)
        }
        Method::Given => Err(Error::InvalidConfig(
            "use certify_line for a given line".into(),
        )),
    }
}

/// Certifies a caller-supplied line as is.
pub fn certify_line(d: &Dataset, line: LineParams, opts: &FitOptions) -> Result<FitOutput> {
    opts.dr.validate()?;
    let mut clock = Clock {
        enabled: opts.timings,
        laps: BTreeMap::new(),
    };
    let report = base_report(d, Method::Given, line, opts)?;
    finish(d, report, Some(line), opts, &mut clock)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SyntheticSpec};

    #[test]
    fn tls_on_collinear_data() {
        let d = Dataset::from_xy(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]).unwrap();
        let out = fit(
            &d,
            &FitOptions {
                method: Method::Tls,
                ..FitOptions::default()
            },
        )
        .unwrap();
        assert!(out.report.tls_cost < 1e-20);
        assert!(out.report.gm_cost < 1e-20);
        assert!(out.report.weights.is_none() && out.report.certificate.is_none());
    }

    #[test]
    fn sdp_rejects_large_inputs() {
        let pts: Vec<_> = (0..30).map(|i| (i as f64, (i * i % 7) as f64)).collect();
        let d = Dataset::from_xy(&pts).unwrap();
        let opts = FitOptions {
            method: Method::Sdp,
            ..FitOptions::default()
        };
        let err = fit(&d, &opts).unwrap_err();
        assert!(matches!(err, Error::TooManyPoints { max: 25, got: 30 }));
        assert!(err.is_usage());
    }

    #[test]
    fn timings_only_on_request() {
        let d = generate(&SyntheticSpec::golden(0)).unwrap().dataset;
        let mut opts = FitOptions::default();
        assert!(fit(&d, &opts).unwrap().report.timings.is_empty());
        opts.timings = true;
        assert!(fit(&d, &opts).unwrap().report.timings.contains_key("irls"));
    }

    #[test]
    fn given_line_goes_through_certify_line() {
        let d = generate(&SyntheticSpec::golden(0)).unwrap().dataset;
        let opts = FitOptions {
            method: Method::Given,
            ..FitOptions::default()
        };
        assert!(fit(&d, &opts).is_err());
        let line = LineParams::new(-0.5, 1.0, 0.5).unwrap();
        let out = certify_line(&d, line, &opts).unwrap();
        assert_eq!(out.report.method, Method::Given);
        assert_eq!(out.report.certificate.unwrap().candidate, line);
    }
}
