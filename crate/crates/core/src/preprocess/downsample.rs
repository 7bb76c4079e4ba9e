use crate::error::{Error, Result};
use crate::types::{AgentState, Trajectory};

/// Output of [`downsample`]; `flagged` marks trajectories too short to
/// resample, which are passed through untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct Downsampled {
    pub trajectory: Trajectory,
    pub flagged: bool,
}

/// Median spacing between consecutive samples, or `None` for a single sample.
pub fn source_period(traj: &Trajectory) -> Option<f64> {
    let mut dts: Vec<f64> = traj
        .states()
        .windows(2)
        .map(|w| w[1].timestamp - w[0].timestamp)
        .collect();
    if dts.is_empty() {
        return None;
    }
    dts.sort_by(f64::total_cmp);
    Some(dts[dts.len() / 2])
}

/// Resamples onto a uniform grid at `target_fps` anchored at the trajectory's
/// first timestamp. See [`downsample_on_grid`].
pub fn downsample(traj: &Trajectory, target_fps: f64) -> Result<Downsampled> {
    downsample_on_grid(traj, target_fps, traj.start_time())
}

/// Resamples onto the grid `anchor + k / target_fps`. Each grid time takes the
/// position of the nearest source sample lying within half a source period;
/// grid times without such a sample are skipped, so gaps in the source stay
/// gaps. Sharing one anchor across a dataset keeps frames aligned.
pub fn downsample_on_grid(traj: &Trajectory, target_fps: f64, anchor: f64) -> Result<Downsampled> {
    if !(target_fps > 0.0 && target_fps.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "target fps must be > 0, got {target_fps}"
        )));
    }
    let period = 1.0 / target_fps;
    let unchanged = || Downsampled {
        trajectory: traj.clone(),
        flagged: true,
    };
    let src = match source_period(traj) {
        Some(p) if traj.duration() >= period - 1e-9 => p,
        _ => return Ok(unchanged()),
    };
    if src > period * (1.0 + 1e-6) {
        return Err(Error::InvalidArgument(format!(
            "source period {src}s is longer than target period {period}s"
        )));
    }

    let half = 0.5 * src + 1e-9;
    let states = traj.states();
    let first = states[0].timestamp;
    let last = states[states.len() - 1].timestamp;
    let k_min = ((first - half - anchor) / period).ceil() as i64;
    let k_max = ((last + half - anchor) / period).floor() as i64;

    let mut out = Vec::new();
    for k in k_min..=k_max {
        let g = anchor + k as f64 * period;
        let idx = states.partition_point(|s| s.timestamp < g);
        let nearest = [idx.checked_sub(1), Some(idx)]
            .into_iter()
            .flatten()
            .filter(|&i| i < states.len())
            .min_by(|&a, &b| {
                (states[a].timestamp - g)
                    .abs()
                    .total_cmp(&(states[b].timestamp - g).abs())
            });
        if let Some(i) = nearest {
            if (states[i].timestamp - g).abs() <= half {
                out.push(AgentState {
                    timestamp: g,
                    ..states[i].clone()
                });
            }
        }
    }
    if out.is_empty() {
        return Ok(unchanged());
    }
    Ok(Downsampled {
        trajectory: Trajectory::new(traj.agent_id.clone(), out)?,
        flagged: false,
    })
}

/// Splits a trajectory wherever consecutive samples are more than 1.5
/// periods apart.
pub fn split_at_gaps(traj: &Trajectory, period: f64) -> Vec<Trajectory> {
    let mut pieces = Vec::new();
    let mut current: Vec<AgentState> = Vec::new();
    for s in traj.states() {
        if let Some(prev) = current.last() {
            if s.timestamp - prev.timestamp > 1.5 * period {
                pieces.push(std::mem::take(&mut current));
            }
        }
        current.push(s.clone());
    }
    pieces.push(current);
    pieces
        .into_iter()
        .map(|states| {
            Trajectory::new(traj.agent_id.clone(), states)
                .expect("sub-slices of a valid trajectory are valid")
        })
        .collect()
}
