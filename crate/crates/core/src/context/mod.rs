//! Social context indicators: closest approach, time-to-collision and
//! interaction energy between co-present agents, plus global and local
//! crowd density.
//!
//! Only states sharing a timestamp are compared. Pairwise quantities use the
//! usual forward-looking conventions: a diverging pair keeps its current
//! distance as DCA, and TTC is the first future contact time.

mod density;
mod pairwise;
mod tau;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{AgentState, Frame, FrameIndex, Trajlet, Vec2};

pub use density::{density_at, global_density, local_density, nearest_neighbor_distances};
pub use pairwise::{dca_pair, interaction_energy, ttc_pair, Ttc, MIN_RELATIVE_SPEED};
pub use tau::{estimate_tau_lower_bound, TauEstimate};

/// `context` section of the pipeline config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InteractionParams {
    /// Agent disk radius, meters.
    #[serde(rename = "R")]
    pub radius: f64,
    /// Energy scale.
    pub k: f64,
    /// Upper TTC bound, seconds.
    pub tau_upper: f64,
    /// Lower TTC bound, seconds; estimated from the data when absent.
    pub tau_lower: Option<f64>,
    /// Density kernel width multiplier.
    pub lambda: f64,
    /// TTC histogram bin width, seconds.
    pub bin_width: f64,
    /// Family-wise significance level of the bin comparisons.
    pub significance: f64,
    /// Frame blocks (replicates) for the lower-bound estimate.
    pub replicates: usize,
    /// Median per-bin TTC count below which the estimate falls back to 0.
    pub min_bin_count: usize,
    /// Pairwise neighborhood radius, meters; `None` compares every pair.
    pub neighborhood: Option<f64>,
    /// Floor on nearest-neighbour distances in local density, meters.
    pub nn_floor: f64,
}

impl Default for InteractionParams {
    fn default() -> Self {
        InteractionParams {
            radius: 0.3,
            k: 1.0,
            tau_upper: 3.0,
            tau_lower: None,
            lambda: 1.0,
            bin_width: 0.2,
            significance: 0.05,
            replicates: 20,
            min_bin_count: 30,
            neighborhood: Some(20.0),
            nn_floor: 0.05,
        }
    }
}

impl InteractionParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.radius > 0.0
            && self.tau_upper > 0.0
            && self.lambda > 0.0
            && self.bin_width > 0.0
            && self.bin_width <= self.tau_upper
            && self.significance > 0.0
            && self.significance < 1.0
            && self.replicates >= 2
            && self.nn_floor >= 0.0
            && self.neighborhood.map_or(true, |r| r > 0.0)
            && self.tau_lower.map_or(true, |t| t >= 0.0 && t <= self.tau_upper);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid context parameters: {self:?}")))
        }
    }

    /// Parameters comparing every co-present pair.
    pub fn unbounded(mut self) -> Self {
        self.neighborhood = None;
        self
    }

    fn in_neighborhood(&self, a: &AgentState, b: &AgentState) -> bool {
        self.neighborhood
            .map_or(true, |r| (a.position - b.position).norm_squared() <= r * r)
    }
}

/// Frame lookup with per-frame nearest-neighbour distances cached.
pub struct Scene<'a> {
    frames: &'a [Frame],
    index: FrameIndex,
    positions: Vec<Vec<Vec2>>,
    nn: Vec<Option<Vec<f64>>>,
    params: InteractionParams,
}

impl<'a> Scene<'a> {
    pub fn new(frames: &'a [Frame], params: InteractionParams) -> Result<Self> {
        params.validate()?;
        let positions: Vec<Vec<Vec2>> = frames
            .iter()
            .map(|f| f.entries.iter().map(|s| s.position).collect())
            .collect();
        let nn = positions
            .par_iter()
            .map(|p| nearest_neighbor_distances(p, params.nn_floor))
            .collect();
        Ok(Scene {
            frames,
            index: FrameIndex::new(frames),
            positions,
            nn,
            params,
        })
    }

    pub fn params(&self) -> &InteractionParams {
        &self.params
    }

    pub fn frames(&self) -> &[Frame] {
        self.frames
    }

    fn frame_of(&self, state: &AgentState) -> Result<usize> {
        self.index.lookup(state.timestamp).ok_or_else(|| {
            Error::Insufficient(format!(
                "no frame at t = {} for agent {}",
                state.timestamp, state.agent_id
            ))
        })
    }

    /// Other agents in the same frame as `state`, within the neighborhood.
    fn neighbors<'s>(&'s self, state: &'s AgentState) -> Result<impl Iterator<Item = &'s AgentState> + 's> {
        let f = self.frame_of(state)?;
        Ok(self.frames[f]
            .entries
            .iter()
            .filter(move |o| o.agent_id != state.agent_id && self.params.in_neighborhood(state, o)))
    }

    /// Local density at `state`'s own position in its frame.
    pub fn local_density_of(&self, state: &AgentState) -> Result<Option<f64>> {
        let f = self.frame_of(state)?;
        Ok(self.nn[f]
            .as_ref()
            .map(|nn| density_at(state.position, &self.positions[f], nn, self.params.lambda)))
    }
}

/// Minimum DCA over the trajlet's timestamps and co-present neighbours.
pub fn min_dca_trajlet(trajlet: &Trajlet, scene: &Scene) -> Result<Option<f64>> {
    let mut best: Option<f64> = None;
    for s in &trajlet.states {
        for o in scene.neighbors(s)? {
            let d = dca_pair(s, o)?;
            best = Some(best.map_or(d, |b| b.min(d)));
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtcSummary {
    /// Minimum predicted collision time; overlapping pairs are not included.
    pub ttc: Option<f64>,
    /// Energy at `ttc`, present only for `ttc` within `[τ⁻, τ⁺]`.
    pub energy: Option<f64>,
    /// Neighbour states already overlapping the agent's disk.
    pub overlaps: usize,
}

pub fn ttc_energy_trajlet(trajlet: &Trajlet, scene: &Scene, tau_lower: f64) -> Result<TtcSummary> {
    let p = scene.params();
    let mut ttc: Option<f64> = None;
    let mut overlaps = 0;
    for s in &trajlet.states {
        for o in scene.neighbors(s)? {
            match ttc_pair(s, o, p.radius)? {
                Ttc::At(t) => ttc = Some(ttc.map_or(t, |b| b.min(t))),
                Ttc::Overlap => overlaps += 1,
                Ttc::Never => {}
            }
        }
    }
    let energy = match ttc {
        Some(t) if t >= tau_lower && t <= p.tau_upper && t > 0.0 => {
            Some(interaction_energy(t, p.k, p.tau_upper)?)
        }
        _ => None,
    };
    Ok(TtcSummary {
        ttc,
        energy,
        overlaps,
    })
}

/// Maximum local density at the agent's own position over the trajlet.
pub fn local_density_trajlet(trajlet: &Trajlet, scene: &Scene) -> Result<Option<f64>> {
    let mut best: Option<f64> = None;
    for s in &trajlet.states {
        if let Some(r) = scene.local_density_of(s)? {
            best = Some(best.map_or(r, |b| b.max(r)));
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextRecord {
    pub trajlet_id: usize,
    #[serde(rename = "C")]
    pub min_dca: Option<f64>,
    #[serde(rename = "T")]
    pub min_ttc: Option<f64>,
    #[serde(rename = "E")]
    pub energy: Option<f64>,
    #[serde(rename = "L")]
    pub local_density: Option<f64>,
    pub overlaps: usize,
}

pub fn context_record(trajlet: &Trajlet, scene: &Scene, tau_lower: f64) -> Result<ContextRecord> {
    let ttc = ttc_energy_trajlet(trajlet, scene, tau_lower)?;
    Ok(ContextRecord {
        trajlet_id: trajlet.id,
        min_dca: min_dca_trajlet(trajlet, scene)?,
        min_ttc: ttc.ttc,
        energy: ttc.energy,
        local_density: local_density_trajlet(trajlet, scene)?,
        overlaps: ttc.overlaps,
    })
}

pub fn context_records(trajlets: &[&Trajlet], scene: &Scene, tau_lower: f64) -> Vec<Result<ContextRecord>> {
    trajlets
        .par_iter()
        .map(|t| context_record(t, scene, tau_lower))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameIndicator {
    pub timestamp: f64,
    pub agent_count: usize,
    pub global_density: Option<f64>,
}

pub fn frame_indicators(frames: &[Frame], area: f64) -> Vec<FrameIndicator> {
    if !(area > 0.0) {
        log::warn!("degenerate scene area {area}; global density left absent");
    }
    frames
        .iter()
        .map(|f| FrameIndicator {
            timestamp: f.timestamp,
            agent_count: f.count(),
            global_density: global_density(f, area),
        })
        .collect()
}
