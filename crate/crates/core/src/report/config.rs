use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::context::InteractionParams;
use crate::error::{Error, Result};
use crate::ingest::{DatasetConfig, SourceSchema};
use crate::overall::OverallConfig;
use crate::predictability::KernelConfig;
use crate::preprocess::PreprocessConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Indicator {
    Predictability,
    Regularity,
    Context,
    Overall,
}

impl Indicator {
    pub const ALL: [Indicator; 4] = [
        Indicator::Predictability,
        Indicator::Regularity,
        Indicator::Context,
        Indicator::Overall,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Indicator::Predictability => "predictability",
            Indicator::Regularity => "regularity",
            Indicator::Context => "context",
            Indicator::Overall => "overall",
        }
    }
}

impl fmt::Display for Indicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Indicator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Indicator::ALL
            .into_iter()
            .find(|i| i.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown indicator '{s}'")))
    }
}

/// Parses `all` or a comma-separated list of indicator names.
pub fn parse_indicators(spec: &str) -> Result<BTreeSet<Indicator>> {
    if spec.trim() == "all" {
        return Ok(Indicator::ALL.into_iter().collect());
    }
    let set: BTreeSet<Indicator> = spec
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if set.is_empty() {
        return Err(Error::Config("no indicators selected".into()));
    }
    Ok(set)
}

fn all_indicators() -> BTreeSet<Indicator> {
    Indicator::ALL.into_iter().collect()
}

fn default_bins() -> usize {
    30
}

/// The single JSON document driving a run: dataset source fields at the top
/// level plus one section per stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssessConfig {
    pub name: String,
    pub files: Vec<PathBuf>,
    pub schema: SourceSchema,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub homography: Option<PathBuf>,
    pub fps: f64,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub predictability: KernelConfig,
    #[serde(default)]
    pub context: InteractionParams,
    #[serde(default)]
    pub overall: OverallConfig,
    #[serde(default = "all_indicators")]
    pub indicators: BTreeSet<Indicator>,
    /// Run seed; overrides `predictability.seed` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
}

impl AssessConfig {
    /// Minimal config with defaults for every stage.
    pub fn new(name: &str, files: Vec<PathBuf>, schema: SourceSchema, fps: f64) -> Self {
        AssessConfig {
            name: name.to_owned(),
            files,
            schema,
            homography: None,
            fps,
            preprocess: PreprocessConfig::default(),
            predictability: KernelConfig::default(),
            context: InteractionParams::default(),
            overall: OverallConfig::default(),
            indicators: all_indicators(),
            seed: None,
            histogram_bins: default_bins(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    /// Reads a config file; relative data paths resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_json_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut ds = cfg.dataset();
        ds.resolve_paths(base);
        cfg.files = ds.files;
        cfg.homography = ds.homography;
        Ok(cfg)
    }

    pub fn dataset(&self) -> DatasetConfig {
        DatasetConfig {
            name: self.name.clone(),
            files: self.files.clone(),
            schema: self.schema.clone(),
            homography: self.homography.clone(),
            fps: self.fps,
        }
    }

    pub fn effective_seed(&self) -> u64 {
        self.seed.unwrap_or(self.predictability.seed)
    }

    /// Oracle-parity mode: no kernel pruning, no neighborhood cutoff.
    pub fn exact(&mut self) {
        self.predictability.prune = false;
        self.context.neighborhood = None;
    }

    pub fn selects(&self, indicator: Indicator) -> bool {
        self.indicators.contains(&indicator)
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset().validate()?;
        self.preprocess.validate()?;
        self.predictability.validate()?;
        self.context.validate()?;
        self.overall.validate()?;
        if self.indicators.is_empty() {
            return Err(Error::Config("no indicators selected".into()));
        }
        if self.histogram_bins == 0 {
            return Err(Error::Config("histogram_bins must be >= 1".into()));
        }
        if self.preprocess.target_fps > self.fps * (1.0 + 1e-9) {
            return Err(Error::Config(format!(
                "target fps {} exceeds source fps {}",
                self.preprocess.target_fps, self.fps
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "toy",
        "files": ["toy.csv"],
        "schema": {"format": "generic-csv"},
        "fps": 2.5
    }"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = AssessConfig::from_json_str(MINIMAL).unwrap();
        assert_eq!(cfg.indicators.len(), 4);
        assert_eq!(cfg.preprocess, PreprocessConfig::default());
        assert_eq!(cfg.predictability.samples, 30);
        assert_eq!(cfg.context.radius, 0.3);
        cfg.validate().unwrap();
    }

    #[test]
    fn sections_and_selection() {
        let text = r#"{
            "name": "toy", "files": ["a.txt"], "schema": {"format": "eth-obsmat"}, "fps": 2.5,
            "preprocess": {"stride": 1.6},
            "predictability": {"h": 0.4, "M": 50, "seed": 3, "prune": false},
            "context": {"R": 0.25, "tau_lower": 0.4},
            "indicators": ["regularity"],
            "seed": 9
        }"#;
        let cfg = AssessConfig::from_json_str(text).unwrap();
        assert_eq!(cfg.preprocess.stride, 1.6);
        assert_eq!(cfg.predictability.samples, 50);
        assert_eq!(cfg.context.tau_lower, Some(0.4));
        assert!(cfg.selects(Indicator::Regularity) && !cfg.selects(Indicator::Context));
        assert_eq!(cfg.effective_seed(), 9);
    }

    #[test]
    fn unknown_fields_are_config_errors() {
        let bad = MINIMAL.replace("\"fps\"", "\"fsp\": 1, \"fps\"");
        let e = AssessConfig::from_json_str(&bad).unwrap_err();
        assert_eq!(e.kind(), crate::ErrorKind::Config);
        let bad = MINIMAL.replace("generic-csv", "parquet");
        assert_eq!(AssessConfig::from_json_str(&bad).unwrap_err().kind(), crate::ErrorKind::Config);
    }

    #[test]
    fn indicator_lists() {
        assert_eq!(parse_indicators("all").unwrap().len(), 4);
        let s = parse_indicators("context, overall").unwrap();
        assert!(s.contains(&Indicator::Context) && s.contains(&Indicator::Overall));
        assert!(parse_indicators("speed").is_err());
        assert!(parse_indicators("").is_err());
    }

    #[test]
    fn upsampling_is_rejected() {
        let mut cfg = AssessConfig::from_json_str(MINIMAL).unwrap();
        cfg.fps = 1.0;
        assert!(cfg.validate().is_err());
    }
}
