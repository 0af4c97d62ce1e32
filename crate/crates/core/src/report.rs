//! Machine-readable summary of a fit, written as pretty-printed JSON.
//!
//! Floats are printed in shortest round-trip form, so parsing a report gives
//! back exactly the values that were written. Timings are only filled in on
//! request because they would otherwise make repeated runs differ.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::certify::CertificateResult;
use crate::geometry::LineParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Tls,
    Irls,
    Sdp,
    /// Line supplied by the caller (standalone certification).
    Given,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Tls => "tls",
            Method::Irls => "irls",
            Method::Sdp => "sdp",
            Method::Given => "given",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrlsSummary {
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateSummary {
    pub certified: bool,
    /// Smallest eigenvalue of the last `K_2` iterate.
    pub min_eig_k2: f64,
    pub iterations_used: usize,
    /// Eigenvalue threshold that was applied.
    pub threshold: f64,
    pub subspace_residual: f64,
    pub lambda: f64,
    pub diverged: bool,
    /// Line the certificate was computed for.
    pub candidate: LineParams,
}

impl CertificateSummary {
    pub fn new(res: &CertificateResult, candidate: LineParams) -> Self {
        Self {
            certified: res.certified,
            min_eig_k2: res.min_eig_k2,
            iterations_used: res.iterations_used,
            threshold: res.cert_threshold,
            subspace_residual: res.subspace_residual,
            lambda: res.lambda,
            diverged: res.diverged,
            candidate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdpSummary {
    pub cost: f64,
    pub cost_without_prior: f64,
    pub tightness_ratio: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSummary {
    pub cost: f64,
    pub line: LineParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub method: Method,
    pub n_points: usize,
    pub eps: f64,
    pub line: LineParams,
    pub tls_cost: f64,
    pub gm_cost: f64,
    /// `gm_cost + eps * c^2`, the objective of the lifted problem.
    pub gm_cost_with_prior: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub irls: Option<IrlsSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sdp: Option<SdpSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSummary>,
    pub seed: u64,
    /// Milliseconds per stage; empty unless timing was requested.
    pub timings: BTreeMap<String, f64>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}
