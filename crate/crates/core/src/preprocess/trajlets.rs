use serde::{Deserialize, Serialize};

use super::check_uniform;
use crate::error::{Error, Result};
use crate::types::{Trajectory, Trajlet};

/// Trajlet geometry. A trajlet covers the half-open window
/// `[start, start + delta)`: at 2.5 fps and 4.8 s that is 12 samples, the
/// first 8 observed (`[0, 3.2)`) and the last 4 to predict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajletConfig {
    pub delta: f64,
    pub stride: f64,
    pub obs_duration: f64,
    pub min_path_len: f64,
    pub target_fps: f64,
}

impl Default for TrajletConfig {
    fn default() -> Self {
        TrajletConfig {
            delta: 4.8,
            stride: 4.8,
            obs_duration: 3.2,
            min_path_len: 1.0,
            target_fps: 2.5,
        }
    }
}

impl TrajletConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.target_fps > 0.0) {
            return bad(format!("target_fps must be > 0, got {}", self.target_fps));
        }
        if !(self.obs_duration > 0.0 && self.obs_duration < self.delta) {
            return bad(format!(
                "need 0 < obs_duration < delta, got {} and {}",
                self.obs_duration, self.delta
            ));
        }
        if !(self.stride > 0.0) {
            return bad(format!("stride must be > 0, got {}", self.stride));
        }
        if !(self.min_path_len >= 0.0) {
            return bad(format!("min_path_len must be >= 0, got {}", self.min_path_len));
        }
        if self.observed_count() == self.window_len() {
            return bad("observed part leaves no future samples".into());
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        1.0 / self.target_fps
    }

    fn samples_in(&self, duration: f64) -> usize {
        (duration * self.target_fps - 1e-6).ceil().max(0.0) as usize
    }

    /// Grid samples in `[0, delta)`.
    pub fn window_len(&self) -> usize {
        self.samples_in(self.delta)
    }

    /// Grid samples in `[0, obs_duration)`.
    pub fn observed_count(&self) -> usize {
        self.samples_in(self.obs_duration)
    }

    /// Grid samples in `[obs_duration, delta)`.
    pub fn future_count(&self) -> usize {
        self.window_len() - self.observed_count()
    }
}

/// Cuts windows of `delta` seconds at offsets `0, stride, 2·stride, …` that
/// fit inside the trajectory; the tail shorter than `delta` is dropped.
/// Trajlet ids are local window indices; the pipeline renumbers them.
pub fn split_trajlets(traj: &Trajectory, cfg: &TrajletConfig) -> Result<Vec<Trajlet>> {
    cfg.validate()?;
    let states = traj.states();
    let duration = traj.duration();
    if duration + 1e-6 < cfg.delta {
        return Ok(Vec::new());
    }
    let period = cfg.period();
    let times: Vec<f64> = states.iter().map(|s| s.timestamp).collect();
    check_uniform(&times, period)?;

    let n_win = cfg.window_len();
    let n_obs = cfg.observed_count();
    let t0 = traj.start_time();
    let mut out = Vec::new();
    let mut j = 0usize;
    loop {
        let offset = j as f64 * cfg.stride;
        if offset + cfg.delta > duration + 1e-6 {
            break;
        }
        let start = states.partition_point(|s| s.timestamp < t0 + offset - 0.5 * period);
        let end = start + n_win;
        if end > states.len() {
            break;
        }
        out.push(Trajlet {
            id: j,
            agent_id: traj.agent_id.clone(),
            states: states[start..end].to_vec(),
            observed_count: n_obs,
            future_count: n_win - n_obs,
            is_static: false,
        });
        j += 1;
    }
    Ok(out)
}

/// Marks trajlets whose polyline length is below `min_path_len` as static.
pub fn filter_static(mut trajlets: Vec<Trajlet>, cfg: &TrajletConfig) -> Vec<Trajlet> {
    for t in &mut trajlets {
        t.is_static = t.path_length() < cfg.min_path_len;
    }
    trajlets
}
