//! Pipeline orchestration, dataset-level aggregation and report export.

mod config;
mod export;
mod pipeline;
mod summary;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::context::{FrameIndicator, TauEstimate};
use crate::error::Result;
use crate::math::round_significant;
use crate::overall::OverallIndicators;

pub use config::{parse_indicators, AssessConfig, Indicator};
pub use export::{export, write_csv_rows};
pub use pipeline::{assess_dataset, prepare, run_pipeline, Prepared};
pub use summary::{histogram, percentile, summarize, HistogramBin, IndicatorSummary, Stats, PERCENTILE_CONVENTION};

/// Significant digits kept for every float in a report.
pub const REPORT_DIGITS: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub name: String,
    /// Distinct pedestrians.
    pub agent_count: usize,
    /// Source frames.
    pub frame_count: usize,
    /// Frames on the downsampled grid.
    pub grid_frame_count: usize,
    /// First to last annotation, seconds.
    pub duration: f64,
    /// Sum of per-agent trajectory durations, seconds.
    pub total_trajectory_duration: f64,
    pub trajlet_count: usize,
    pub non_static_count: usize,
    pub non_static_fraction: f64,
    pub source_fps: f64,
    pub target_fps: f64,
    pub stride: f64,
    pub area: f64,
    pub excluded_rows: usize,
    /// Trajectories too short to resample.
    pub short_trajectories: usize,
    /// Single-sample segments left after gap splitting.
    pub dropped_segments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    pub seed: u64,
    pub indicators: Vec<Indicator>,
    pub percentile_convention: String,
    pub float_digits: usize,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictabilityFields {
    #[serde(rename = "H_cond")]
    pub conditional_entropy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityFields {
    #[serde(rename = "S_avg")]
    pub speed_avg: f64,
    #[serde(rename = "S_rg")]
    pub speed_range: f64,
    #[serde(rename = "A_avg")]
    pub accel_avg: f64,
    #[serde(rename = "A_max")]
    pub accel_max: f64,
    #[serde(rename = "F")]
    pub efficiency: Option<f64>,
    #[serde(rename = "D_avg_rad")]
    pub deviation_avg: Option<f64>,
    #[serde(rename = "D_absavg_deg")]
    pub deviation_absavg_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextFields {
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

/// Per-trajlet indicator values; blocks are absent when not selected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorRecord {
    pub trajlet_id: usize,
    pub agent_id: String,
    pub start_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictability: Option<PredictabilityFields>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularity: Option<RegularityFields>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<ContextFields>,
}

impl IndicatorRecord {
    /// Value of a per-trajlet indicator by report name; `None` when the value
    /// or its block is absent.
    pub fn value(&self, name: &str) -> Option<f64> {
        let r = self.regularity.as_ref();
        let c = self.context.as_ref();
        match name {
            "H_cond" => self.predictability.as_ref()?.conditional_entropy,
            "S_avg" => r.map(|r| r.speed_avg),
            "S_rg" => r.map(|r| r.speed_range),
            "A_avg" => r.map(|r| r.accel_avg),
            "A_max" => r.map(|r| r.accel_max),
            "F" => r?.efficiency,
            "D_avg_rad" => r?.deviation_avg,
            "D_absavg_deg" => r?.deviation_absavg_deg,
            "C" => c?.min_dca,
            "T" => c?.min_ttc,
            "E" => c?.energy,
            "L" => c?.local_density,
            _ => None,
        }
    }
}

/// Per-trajlet indicator names of each block, in export order.
pub fn record_indicators(block: Indicator) -> &'static [&'static str] {
    match block {
        Indicator::Predictability => &["H_cond"],
        Indicator::Regularity => &["S_avg", "S_rg", "A_avg", "A_max", "F", "D_avg_rad", "D_absavg_deg"],
        Indicator::Context => &["C", "T", "E", "L"],
        Indicator::Overall => &[],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentReport {
    pub metadata: DatasetMetadata,
    pub run: RunMetadata,
    pub records: Vec<IndicatorRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<Vec<FrameIndicator>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overall: Option<OverallIndicators>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_lower_bound: Option<TauEstimate>,
    pub summaries: BTreeMap<String, IndicatorSummary>,
}

/// Rounds every non-integer number to [`REPORT_DIGITS`] significant digits.
/// Object keys come out sorted since `serde_json` maps are ordered.
pub fn canonical_value(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = round_significant(n.as_f64().unwrap_or(0.0), REPORT_DIGITS);
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(canonical_value).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, canonical_value(v))).collect()),
        v => v,
    }
}

impl AssessmentReport {
    /// The report with floats rounded as they will be written.
    pub fn canonicalize(self) -> Result<Self> {
        Ok(serde_json::from_value(canonical_value(serde_json::to_value(self)?))?)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&canonical_value(serde_json::to_value(self)?))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Per-trajlet values of one indicator, in record order.
    pub fn column(&self, name: &str) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.value(name)).collect()
    }
}
