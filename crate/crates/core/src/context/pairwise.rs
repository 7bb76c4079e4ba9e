use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{AgentState, Vec2};

/// Relative speeds below this are treated as no relative motion.
pub const MIN_RELATIVE_SPEED: f64 = 1e-9;

fn relative(a: &AgentState, b: &AgentState) -> Result<(Vec2, Vec2)> {
    Ok((a.position - b.position, a.require_velocity()? - b.require_velocity()?))
}

/// Distance of closest approach under constant velocities, looking forward
/// in time only. Diverging pairs keep their current distance.
pub fn dca_pair(a: &AgentState, b: &AgentState) -> Result<f64> {
    let (dx, dv) = relative(a, b)?;
    Ok(dca_relative(dx, dv))
}

pub(crate) fn dca_relative(dx: Vec2, dv: Vec2) -> f64 {
    let speed = dv.norm();
    let dist = dx.norm();
    if speed < MIN_RELATIVE_SPEED {
        return dist;
    }
    let ahead = (-dv.dot(&dx) / speed).max(0.0);
    (dist * dist - ahead * ahead).max(0.0).sqrt()
}

/// Outcome of a time-to-collision query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Ttc {
    /// The disks never touch going forward.
    Never,
    /// Already overlapping (`‖Δx‖ ≤ 2R`); reported as τ = 0.
    Overlap,
    /// First contact after this many seconds.
    At(f64),
}

impl Ttc {
    pub fn time(self) -> Option<f64> {
        match self {
            Ttc::Never => None,
            Ttc::Overlap => Some(0.0),
            Ttc::At(t) => Some(t),
        }
    }
}

/// Smallest positive root of `‖Δx + τΔv‖ = 2R`.
pub fn ttc_pair(a: &AgentState, b: &AgentState, radius: f64) -> Result<Ttc> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("agent radius must be > 0, got {radius}")));
    }
    let (dx, dv) = relative(a, b)?;
    Ok(ttc_relative(dx, dv, radius))
}

pub(crate) fn ttc_relative(dx: Vec2, dv: Vec2, radius: f64) -> Ttc {
    let reach = 2.0 * radius;
    let gap2 = dx.norm_squared() - reach * reach;
    if gap2 <= 0.0 {
        return Ttc::Overlap;
    }
    let dot = dv.dot(&dx);
    let speed2 = dv.norm_squared();
    if dot >= 0.0 || speed2 < MIN_RELATIVE_SPEED * MIN_RELATIVE_SPEED {
        return Ttc::Never;
    }
    let disc = dot * dot - speed2 * gap2;
    if disc < 0.0 {
        return Ttc::Never;
    }
    Ttc::At((-dot - disc.sqrt()) / speed2)
}

/// `E(τ) = k / τ² · exp(-τ / τ⁺)`.
pub fn interaction_energy(tau: f64, k: f64, tau_upper: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("energy needs τ > 0, got {tau}")));
    }
    Ok(k / (tau * tau) * (-tau / tau_upper).exp())
}
