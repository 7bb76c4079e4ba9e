//! Dataset-wide description of trajlet positions over progression time:
//! spline resampling, GMM cluster counts and positional entropy.

mod gmm;
mod spline;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::log_sum_exp;
use crate::types::{Trajlet, Vec2};

pub use gmm::{cluster_count, fit_gmm, ClusterSelection, Component, Cov2, GmmConfig, GmmFit};
pub use spline::{fit_spline, CubicSpline, SplineTrajlet, MIN_SPLINE_SAMPLES};

/// `overall` section of the pipeline config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverallConfig {
    pub n_times: usize,
    /// Progression horizon in seconds.
    pub duration: f64,
    /// KDE bandwidth in meters.
    pub h: f64,
    #[serde(flatten)]
    pub gmm: GmmConfig,
}

impl Default for OverallConfig {
    fn default() -> Self {
        OverallConfig {
            n_times: 50,
            duration: 4.8,
            h: 0.5,
            gmm: GmmConfig::default(),
        }
    }
}

impl OverallConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_times < 2 || !(self.duration > 0.0) || !(self.h > 0.0) || self.gmm.k_max == 0 {
            return Err(Error::Config(
                "overall needs n_times >= 2, duration > 0, h > 0, k_max >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Spline positions of every trajlet at one progression time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressionSampleSet {
    pub t: f64,
    pub points: Vec<Vec2>,
}

/// Evaluates every spline at `n_times` uniformly spaced times over
/// `[0, duration]`, endpoints included.
pub fn progression_samples(
    splines: &[SplineTrajlet],
    n_times: usize,
    duration: f64,
) -> Result<Vec<ProgressionSampleSet>> {
    if splines.is_empty() {
        return Err(Error::Insufficient("no splines to sample".into()));
    }
    if n_times < 2 {
        return Err(Error::InvalidArgument("need at least 2 progression times".into()));
    }
    Ok((0..n_times)
        .map(|j| {
            let t = duration * j as f64 / (n_times - 1) as f64;
            ProgressionSampleSet {
                t,
                points: splines.iter().map(|s| s.eval(t)).collect(),
            }
        })
        .collect())
}

/// Leave-one-out Gaussian KDE entropy (nats) of a 2D point set:
/// `H = -(1/n) Σᵢ log p̂₋ᵢ(xᵢ)`, with `p̂₋ᵢ` the isotropic kernel estimate
/// built from all other points. Log-space throughout.
pub fn positional_entropy(points: &[Vec2], h: f64) -> Result<f64> {
    let n = points.len();
    if n < 2 {
        return Err(Error::Insufficient(format!(
            "entropy needs at least 2 points, got {n}"
        )));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("bandwidth must be > 0, got {h}")));
    }
    let inv = 1.0 / (2.0 * h * h);
    let log_norm = (2.0 * std::f64::consts::PI * h * h).ln() + ((n - 1) as f64).ln();
    // collect first: a parallel float sum would depend on the work split
    let per_point: Vec<f64> = points
        .par_iter()
        .enumerate()
        .map(|(i, xi)| {
            let terms: Vec<f64> = points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, xj)| -(xi - xj).norm_squared() * inv)
                .collect();
            log_sum_exp(&terms) - log_norm
        })
        .collect();
    Ok(-per_point.iter().sum::<f64>() / n as f64)
}

/// Entropy and cluster count at each progression time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallIndicators {
    pub t: Vec<f64>,
    #[serde(rename = "H_t")]
    pub entropy: Vec<f64>,
    #[serde(rename = "M_t")]
    pub clusters: Vec<usize>,
}

/// Runs the full description over non-static trajlets. Progression sets are
/// processed in parallel; each GMM selection is single-threaded and seeded
/// by `(seed, set index)`.
pub fn describe(trajlets: &[&Trajlet], cfg: &OverallConfig, seed: u64) -> Result<OverallIndicators> {
    cfg.validate()?;
    let splines = trajlets
        .iter()
        .map(|t| fit_spline(t, cfg.duration))
        .collect::<Result<Vec<_>>>()?;
    let sets = progression_samples(&splines, cfg.n_times, cfg.duration)?;
    let results: Vec<(f64, f64, usize)> = sets
        .par_iter()
        .enumerate()
        .map(|(j, set)| {
            let h = positional_entropy(&set.points, cfg.h)?;
            let m = cluster_count(&set.points, &cfg.gmm, crate::math::stream_seed(seed, j as u64))?;
            Ok((set.t, h, m.k))
        })
        .collect::<Result<_>>()?;
    Ok(OverallIndicators {
        t: results.iter().map(|r| r.0).collect(),
        entropy: results.iter().map(|r| r.1).collect(),
        clusters: results.iter().map(|r| r.2).collect(),
    })
}
