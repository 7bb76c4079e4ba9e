//! Domain types shared by every stage: agent states, trajectories, frames,
//! datasets and trajlets, plus frame indexing and spatial extent.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = nalgebra::Vector2<f64>;

/// Resolution used to decide whether two timestamps name the same frame.
const TIME_KEY_RESOLUTION: f64 = 1e-6;

/// Integer key for a timestamp, stable against float noise below a microsecond.
pub fn time_key(timestamp: f64) -> i64 {
    (timestamp / TIME_KEY_RESOLUTION).round() as i64
}

/// Opaque agent identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub String);

impl AgentId {
    pub fn new(id: impl Into<String>) -> Self {
        AgentId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        AgentId(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub agent_id: AgentId,
    /// Absolute time in seconds.
    pub timestamp: f64,
    /// World position in meters.
    pub position: Vec2,
    /// Velocity in m/s; populated by smoothing.
    pub velocity: Option<Vec2>,
}

impl AgentState {
    pub fn new(agent_id: AgentId, timestamp: f64, position: Vec2) -> Self {
        AgentState {
            agent_id,
            timestamp,
            position,
            velocity: None,
        }
    }

    pub fn with_velocity(mut self, velocity: Vec2) -> Self {
        self.velocity = Some(velocity);
        self
    }

    /// Velocity, or an error naming the state when smoothing has not run.
    pub fn require_velocity(&self) -> Result<Vec2> {
        self.velocity.ok_or_else(|| Error::MissingVelocity {
            agent: self.agent_id.to_string(),
            timestamp: self.timestamp,
        })
    }
}

/// Time-ordered states of a single agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub agent_id: AgentId,
    states: Vec<AgentState>,
}

impl Trajectory {
    /// Builds a trajectory, checking that timestamps strictly increase, values
    /// are finite and every state belongs to `agent_id`.
    pub fn new(agent_id: AgentId, states: Vec<AgentState>) -> Result<Self> {
        let invalid = |reason: String| Error::InvalidTrajectory {
            agent: agent_id.to_string(),
            reason,
        };
        if states.is_empty() {
            return Err(invalid("no states".into()));
        }
        for s in &states {
            if s.agent_id != agent_id {
                return Err(invalid(format!("state belongs to agent {}", s.agent_id)));
            }
            if !s.timestamp.is_finite() || !s.position.iter().all(|v| v.is_finite()) {
                return Err(invalid(format!("non-finite state at t = {}", s.timestamp)));
            }
        }
        for w in states.windows(2) {
            if w[1].timestamp <= w[0].timestamp {
                return Err(invalid(format!(
                    "timestamps not strictly increasing at t = {}",
                    w[1].timestamp
                )));
            }
        }
        Ok(Trajectory { agent_id, states })
    }

    pub fn states(&self) -> &[AgentState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.states[0].timestamp
    }

    pub fn duration(&self) -> f64 {
        self.states[self.states.len() - 1].timestamp - self.states[0].timestamp
    }

    pub fn positions(&self) -> impl Iterator<Item = Vec2> + '_ {
        self.states.iter().map(|s| s.position)
    }
}

/// All agent states observed at one timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub timestamp: f64,
    pub entries: Vec<AgentState>,
}

impl Frame {
    pub fn count(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, agent: &AgentId) -> Option<&AgentState> {
        self.entries.iter().find(|s| &s.agent_id == agent)
    }
}

/// Groups states by timestamp. Frames come out sorted by time, entries
/// within a frame in trajectory order.
pub fn build_frames(trajectories: &[Trajectory]) -> Result<Vec<Frame>> {
    let mut by_time: BTreeMap<i64, Frame> = BTreeMap::new();
    let mut seen: HashSet<(i64, &AgentId)> = HashSet::new();
    for traj in trajectories {
        for state in traj.states() {
            let key = time_key(state.timestamp);
            if !seen.insert((key, &state.agent_id)) {
                return Err(Error::DuplicateState {
                    agent: state.agent_id.to_string(),
                    timestamp: state.timestamp,
                });
            }
            by_time
                .entry(key)
                .or_insert_with(|| Frame {
                    timestamp: state.timestamp,
                    entries: Vec::new(),
                })
                .entries
                .push(state.clone());
        }
    }
    Ok(by_time.into_values().collect())
}

/// Lookup from timestamp to frame position.
#[derive(Debug, Clone, Default)]
pub struct FrameIndex {
    keys: std::collections::HashMap<i64, usize>,
}

impl FrameIndex {
    pub fn new(frames: &[Frame]) -> Self {
        FrameIndex {
            keys: frames
                .iter()
                .enumerate()
                .map(|(i, f)| (time_key(f.timestamp), i))
                .collect(),
        }
    }

    pub fn lookup(&self, timestamp: f64) -> Option<usize> {
        self.keys.get(&time_key(timestamp)).copied()
    }
}

/// Axis-aligned bounding box of all positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub min: Vec2,
    pub max: Vec2,
}

impl Extent {
    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// True when the box has collapsed to a segment or a point.
    pub fn is_degenerate(&self) -> bool {
        !(self.area() > 0.0)
    }
}

/// Extent and area (m²) spanned by every position in `trajectories`.
pub fn bounding_area(trajectories: &[Trajectory]) -> Result<(Extent, f64)> {
    let mut positions = trajectories.iter().flat_map(|t| t.positions());
    let first = positions
        .next()
        .ok_or_else(|| Error::Insufficient("bounding area needs at least one position".into()))?;
    let mut extent = Extent {
        min: first,
        max: first,
    };
    for p in positions {
        extent.min = extent.min.inf(&p);
        extent.max = extent.max.sup(&p);
    }
    Ok((extent, extent.area()))
}

/// Flags raised while assembling a dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetFlags {
    /// Fewer than 100 trajectories.
    pub small: bool,
    /// Agents observed once; they never yield trajlets.
    pub single_observation_agents: Vec<AgentId>,
    /// All positions collapse onto a point or segment.
    pub degenerate_extent: bool,
    /// Rows dropped during ingestion (invalid projections, non-pedestrians).
    pub excluded_rows: usize,
}

/// Immutable collection of trajectories with their frame index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub trajectories: Vec<Trajectory>,
    pub frames: Vec<Frame>,
    pub extent: Extent,
    pub area: f64,
    pub source_fps: f64,
    pub flags: DatasetFlags,
}

/// Datasets below this many trajectories are flagged.
pub const SMALL_DATASET_THRESHOLD: usize = 100;

impl Dataset {
    /// Assembles a dataset: builds frames, computes extent and raises flags.
    pub fn from_trajectories(
        name: impl Into<String>,
        trajectories: Vec<Trajectory>,
        source_fps: f64,
    ) -> Result<Self> {
        let name = name.into();
        if trajectories.is_empty() {
            return Err(Error::EmptyDataset(name));
        }
        let frames = build_frames(&trajectories)?;
        let (extent, area) = bounding_area(&trajectories)?;
        let flags = DatasetFlags {
            small: trajectories.len() < SMALL_DATASET_THRESHOLD,
            single_observation_agents: trajectories
                .iter()
                .filter(|t| t.len() == 1)
                .map(|t| t.agent_id.clone())
                .collect(),
            degenerate_extent: extent.is_degenerate(),
            excluded_rows: 0,
        };
        Ok(Dataset {
            name,
            trajectories,
            frames,
            extent,
            area,
            source_fps,
            flags,
        })
    }

    pub fn agent_count(&self) -> usize {
        self.trajectories.len()
    }

    pub fn state_count(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    /// Time from the first to the last frame, in seconds.
    pub fn duration(&self) -> f64 {
        match (self.frames.first(), self.frames.last()) {
            (Some(a), Some(b)) => b.timestamp - a.timestamp,
            _ => 0.0,
        }
    }

    /// Sum of all trajectory durations, in seconds.
    pub fn total_trajectory_duration(&self) -> f64 {
        self.trajectories.iter().map(Trajectory::duration).sum()
    }
}

/// Fixed-duration resampled segment of one agent's trajectory, split into an
/// observed prefix and a future suffix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajlet {
    pub id: usize,
    pub agent_id: AgentId,
    pub states: Vec<AgentState>,
    pub observed_count: usize,
    pub future_count: usize,
    pub is_static: bool,
}

impl Trajlet {
    pub fn observed(&self) -> &[AgentState] {
        &self.states[..self.observed_count]
    }

    pub fn future(&self) -> &[AgentState] {
        &self.states[self.observed_count..]
    }

    pub fn start_time(&self) -> f64 {
        self.states[0].timestamp
    }

    pub fn span(&self) -> f64 {
        self.states[self.states.len() - 1].timestamp - self.states[0].timestamp
    }

    pub fn positions(&self) -> impl ExactSizeIterator<Item = Vec2> + '_ {
        self.states.iter().map(|s| s.position)
    }

    /// Polyline length in meters.
    pub fn path_length(&self) -> f64 {
        self.states
            .windows(2)
            .map(|w| (w[1].position - w[0].position).norm())
            .sum()
    }
}
