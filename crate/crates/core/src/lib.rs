//! Certifiable robust line fitting in the plane.
//!
//! The crate fits `a x + b y = c` (with `a^2 + b^2 = 1`) to 2-D points in
//! three ways:
//!
//! - [`tls`]: closed-form total least squares through the 2x2 covariance
//!   eigenproblem, with its Lagrangian dual and SDP forms;
//! - [`irls`]: Geman-McClure M-estimation by iteratively reweighted least
//!   squares, fast but only locally optimal;
//! - [`sdp`]: a semidefinite relaxation of the Black-Rangarajan lifted problem
//!   ([`lifting`]) that returns the global minimum when it is tight.
//!
//! [`certify`] checks a candidate after the fact: Douglas-Rachford splitting
//! searches for Lagrange multipliers proving that no better line exists.
//! [`oracle`] is a brute-force grid search used to label results in tests.
//!
//! [`pipeline`] runs these end to end and produces a [`report::Report`];
//! [`io`], [`sdpa`] and [`plot`] handle the file formats used by the CLI.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod error;
pub mod geometry;
pub mod io;
pub mod irls;
pub mod lifting;
pub mod linalg;
pub mod oracle;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod sdp;
pub mod sdpa;
pub mod synth;
pub mod tls;

pub use error::{Error, Result};
pub use geometry::{canonicalize, gm_cost, residual, residuals, tls_cost, DataPoint, Dataset, LineParams};
