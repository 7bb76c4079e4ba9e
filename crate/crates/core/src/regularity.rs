//! Per-trajlet motion regularity: speed and acceleration statistics, path
//! efficiency and angular deviation from straight-line motion.
//!
//! Acceleration here is the finite difference of scalar speed, not the norm
//! of the velocity derivative. A walk that curves at constant speed has zero
//! acceleration by this measure.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Trajlet, Vec2};

/// Initial speeds below this leave the heading undefined.
pub const MIN_ALIGN_SPEED: f64 = 1e-6;
/// Aligned points this close to the origin have no deviation angle.
pub const ORIGIN_EXCLUSION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityRecord {
    pub trajlet_id: usize,
    pub speed_avg: f64,
    pub speed_range: f64,
    pub accel_avg: f64,
    pub accel_max: f64,
    /// `None` for trajlets without path length.
    pub efficiency: Option<f64>,
    /// Per-sample deviation, `None` where the aligned point sits at the origin.
    pub deviation: Vec<Option<f64>>,
    /// Mean signed deviation, radians.
    pub deviation_avg: Option<f64>,
    /// Mean absolute deviation, degrees.
    pub deviation_absavg_deg: Option<f64>,
}

fn speeds(trajlet: &Trajlet) -> Result<Vec<f64>> {
    trajlet
        .states
        .iter()
        .map(|s| s.require_velocity().map(|v| v.norm()))
        .collect()
}

/// Mean speed and speed range (max − min), from the smoothed velocities.
pub fn speed_stats(trajlet: &Trajlet) -> Result<(f64, f64)> {
    let s = speeds(trajlet)?;
    if s.is_empty() {
        return Err(Error::Insufficient(format!("trajlet {} is empty", trajlet.id)));
    }
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    let (lo, hi) = s
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    Ok((mean, hi - lo))
}

/// Mean and max of `|Δs / Δt|` over consecutive samples.
pub fn accel_stats(trajlet: &Trajlet) -> Result<(f64, f64)> {
    let s = speeds(trajlet)?;
    if s.len() < 2 {
        return Err(Error::Insufficient(format!(
            "trajlet {} needs 2 samples for acceleration",
            trajlet.id
        )));
    }
    let acc: Vec<f64> = trajlet
        .states
        .windows(2)
        .zip(s.windows(2))
        .map(|(st, sp)| ((sp[1] - sp[0]) / (st[1].timestamp - st[0].timestamp)).abs())
        .collect();
    let mean = acc.iter().sum::<f64>() / acc.len() as f64;
    let max = acc.iter().copied().fold(0.0, f64::max);
    Ok((mean, max))
}

/// Endpoint distance over polyline length.
pub fn path_efficiency(trajlet: &Trajlet) -> Result<f64> {
    let n = trajlet.states.len();
    if n < 2 {
        return Err(Error::Insufficient(format!("trajlet {} has < 2 samples", trajlet.id)));
    }
    let length = trajlet.path_length();
    if !(length > 0.0) {
        return Err(Error::InvalidTrajectory {
            agent: trajlet.agent_id.to_string(),
            reason: format!("trajlet {} has zero path length", trajlet.id),
        });
    }
    let chord = (trajlet.states[n - 1].position - trajlet.states[0].position).norm();
    Ok((chord / length).clamp(0.0, 1.0))
}

/// Positions translated to start at the origin and rotated so the initial
/// velocity points along +x.
pub fn align_trajlet(trajlet: &Trajlet) -> Result<Vec<Vec2>> {
    let first = trajlet
        .states
        .first()
        .ok_or_else(|| Error::Insufficient(format!("trajlet {} is empty", trajlet.id)))?;
    let v0 = first.require_velocity()?;
    if v0.norm() < MIN_ALIGN_SPEED {
        return Err(Error::InvalidTrajectory {
            agent: trajlet.agent_id.to_string(),
            reason: format!("trajlet {} has no initial heading", trajlet.id),
        });
    }
    let rot = nalgebra::Rotation2::new(-v0.y.atan2(v0.x));
    Ok(trajlet
        .states
        .iter()
        .map(|s| rot * (s.position - first.position))
        .collect())
}

/// `atan2` of every aligned point, `None` at the origin; plus the mean of the
/// defined angles.
pub fn angular_deviation(trajlet: &Trajlet) -> Result<(Vec<Option<f64>>, Option<f64>)> {
    let aligned = align_trajlet(trajlet)?;
    let series: Vec<Option<f64>> = aligned
        .iter()
        .map(|p| {
            if p.norm() < ORIGIN_EXCLUSION {
                None
            } else {
                let a = p.y.atan2(p.x);
                // atan2 already lands in [-π, π]; fold -π onto π
                Some(if a == -std::f64::consts::PI { std::f64::consts::PI } else { a })
            }
        })
        .collect();
    let defined: Vec<f64> = series.iter().flatten().copied().collect();
    let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok((series, mean))
}

/// All regularity indicators of one trajlet. A missing initial heading only
/// blanks the deviation fields.
pub fn regularity(trajlet: &Trajlet) -> Result<RegularityRecord> {
    let (speed_avg, speed_range) = speed_stats(trajlet)?;
    let (accel_avg, accel_max) = accel_stats(trajlet)?;
    let efficiency = path_efficiency(trajlet).ok();
    let (deviation, deviation_avg, deviation_absavg_deg) = match angular_deviation(trajlet) {
        Ok((series, mean)) => {
            let abs: Vec<f64> = series.iter().flatten().map(|a| a.abs()).collect();
            let absavg = (!abs.is_empty())
                .then(|| (abs.iter().sum::<f64>() / abs.len() as f64).to_degrees());
            (series, mean, absavg)
        }
        Err(Error::InvalidTrajectory { reason, .. }) => {
            log::debug!("{reason}; deviation left absent");
            (vec![None; trajlet.states.len()], None, None)
        }
        Err(e) => return Err(e),
    };
    Ok(RegularityRecord {
        trajlet_id: trajlet.id,
        speed_avg,
        speed_range,
        accel_avg,
        accel_max,
        efficiency,
        deviation,
        deviation_avg,
        deviation_absavg_deg,
    })
}

pub fn regularity_all(trajlets: &[&Trajlet]) -> Vec<Result<RegularityRecord>> {
    trajlets.par_iter().map(|t| regularity(t)).collect()
}
