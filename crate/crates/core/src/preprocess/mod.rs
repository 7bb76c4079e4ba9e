//! Downsampling, constant-acceleration smoothing, trajlet splitting and
//! static filtering.

mod downsample;
mod smoother;
mod trajlets;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use downsample::{downsample, downsample_on_grid, source_period, split_at_gaps, Downsampled};
pub use smoother::{kalman_smooth, SmootherConfig};
pub use trajlets::{filter_static, split_trajlets, TrajletConfig};

/// Relative deviation from the nominal period tolerated in "uniform" sampling.
pub const SPACING_JITTER: f64 = 0.1;

/// `preprocess` section of the pipeline config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub target_fps: f64,
    pub delta: f64,
    pub stride: f64,
    pub obs_duration: f64,
    pub min_path_len: f64,
    pub sigma_z: f64,
    pub q: f64,
    pub init_cov: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        let t = TrajletConfig::default();
        let s = SmootherConfig::default();
        PreprocessConfig {
            target_fps: t.target_fps,
            delta: t.delta,
            stride: t.stride,
            obs_duration: t.obs_duration,
            min_path_len: t.min_path_len,
            sigma_z: s.sigma_z,
            q: s.q,
            init_cov: s.init_cov,
        }
    }
}

impl PreprocessConfig {
    pub fn trajlet(&self) -> TrajletConfig {
        TrajletConfig {
            delta: self.delta,
            stride: self.stride,
            obs_duration: self.obs_duration,
            min_path_len: self.min_path_len,
            target_fps: self.target_fps,
        }
    }

    pub fn smoother(&self) -> SmootherConfig {
        SmootherConfig {
            q: self.q,
            sigma_z: self.sigma_z,
            init_cov: self.init_cov,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.trajlet().validate()?;
        self.smoother().validate()
    }
}

/// Checks that consecutive timestamps are spaced by `period` within the
/// jitter tolerance.
pub(crate) fn check_uniform(timestamps: &[f64], period: f64) -> Result<()> {
    for w in timestamps.windows(2) {
        let dev = (w[1] - w[0] - period).abs();
        if dev > SPACING_JITTER * period {
            return Err(Error::NonUniformSpacing {
                period,
                deviation: dev,
            });
        }
    }
    Ok(())
}
