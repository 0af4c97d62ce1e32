//! Synthetic line-with-outliers scenarios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{canonicalize, DataPoint, Dataset, LineParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_total: usize,
    pub n_outliers: usize,
    pub true_line: LineParams,
    pub inlier_noise_sigma: f64,
    /// Half-width of the square `[-h, h]^2` outliers are drawn from; inliers
    /// are spread over `[-h, h]` along the line.
    pub outlier_box: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Ten points, four of them outliers, around `y = 0.5 x + 0.5`.
    pub fn golden(seed: u64) -> Self {
        Self {
            n_total: 10,
            n_outliers: 4,
            true_line: LineParams::new(-0.5, 1.0, 0.5).expect("valid line"),
            inlier_noise_sigma: 0.05,
            outlier_box: 5.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_outliers > self.n_total {
            return Err(Error::InvalidConfig("n_outliers exceeds n_total".into()));
        }
        if !(self.inlier_noise_sigma >= 0.0) || !self.inlier_noise_sigma.is_finite() {
            return Err(Error::InvalidConfig("noise sigma must be finite and >= 0".into()));
        }
        if !(self.outlier_box > 0.0) || !self.outlier_box.is_finite() {
            return Err(Error::InvalidConfig("outlier box must be finite and > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticData {
    pub spec: SyntheticSpec,
    pub dataset: Dataset,
    /// Same order as `dataset.points`.
    pub is_outlier: Vec<bool>,
}

/// Inliers first (uniform along the line plus perpendicular Gaussian noise),
/// then outliers (uniform in the box). Fully determined by `spec.seed`.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let line = canonicalize(spec.true_line)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.inlier_noise_sigma)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let h = spec.outlier_box;
    let (nx, ny) = (line.a, line.b);
    let (foot_x, foot_y) = (line.c * nx, line.c * ny);

    let n_in = spec.n_total - spec.n_outliers;
    let mut points = Vec::with_capacity(spec.n_total);
    for _ in 0..n_in {
        let t: f64 = rng.random_range(-h..=h);
        let e = noise.sample(&mut rng);
        points.push(DataPoint::new(foot_x - t * ny + e * nx, foot_y + t * nx + e * ny));
    }
    for _ in 0..spec.n_outliers {
        points.push(DataPoint::new(rng.random_range(-h..=h), rng.random_range(-h..=h)));
    }
    let mut is_outlier = vec![false; n_in];
    is_outlier.resize(spec.n_total, true);
    Ok(SyntheticData {
        spec: *spec,
        dataset: Dataset::new(points)?,
        is_outlier,
    })
}
