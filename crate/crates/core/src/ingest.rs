//! Annotation parsing, image-to-world projection and dataset assembly.
//!
//! Two source layouts are understood: the ETH `obsmat` text layout
//! (whitespace-separated, eight columns, no header) and generic delimited
//! text with configurable columns. Frame numbers become absolute timestamps
//! through the configured frame rate.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{AgentId, AgentState, Dataset, Trajectory, Vec2};

/// Minimum |det H| accepted for a homography.
pub const MIN_HOMOGRAPHY_DET: f64 = 1e-12;
/// Homogeneous denominators below this magnitude invalidate a projected point.
pub const MIN_PROJECTION_DENOMINATOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceFormat {
    EthObsmat,
    GenericCsv,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoordinateSpace {
    #[default]
    WorldMeters,
    ImagePixels,
}

/// A column given either by zero-based position or by header name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub frame: ColumnRef,
    pub agent_id: ColumnRef,
    pub x: ColumnRef,
    pub y: ColumnRef,
    /// Agent class column; rows whose class is not pedestrian are dropped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_type: Option<ColumnRef>,
}

impl ColumnMap {
    /// obsmat layout: frame, id, pos_x, pos_z, pos_y, v_x, v_z, v_y.
    pub fn eth_obsmat() -> Self {
        ColumnMap {
            frame: ColumnRef::Index(0),
            agent_id: ColumnRef::Index(1),
            x: ColumnRef::Index(2),
            y: ColumnRef::Index(4),
            agent_type: None,
        }
    }

    pub fn named(frame: &str, agent_id: &str, x: &str, y: &str) -> Self {
        ColumnMap {
            frame: ColumnRef::Name(frame.into()),
            agent_id: ColumnRef::Name(agent_id.into()),
            x: ColumnRef::Name(x.into()),
            y: ColumnRef::Name(y.into()),
            agent_type: None,
        }
    }
}

fn default_delimiter() -> String {
    ",".into()
}

fn default_true() -> bool {
    true
}

fn default_pedestrian_labels() -> Vec<String> {
    vec!["pedestrian".into(), "ped".into(), "person".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSchema {
    pub format: SourceFormat,
    /// Defaults to the obsmat layout for `eth-obsmat` and to the header
    /// names `frame,id,x,y` for `generic-csv`.
    #[serde(default)]
    pub columns: Option<ColumnMap>,
    #[serde(default)]
    pub coordinates: CoordinateSpace,
    /// Field separator for `generic-csv`; `"whitespace"` splits on runs of blanks.
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
    #[serde(default = "default_true")]
    pub has_header: bool,
    /// Case-insensitive class labels kept when `agent_type` is mapped.
    #[serde(default = "default_pedestrian_labels")]
    pub pedestrian_labels: Vec<String>,
}

impl SourceSchema {
    pub fn eth_obsmat() -> Self {
        SourceSchema {
            format: SourceFormat::EthObsmat,
            columns: None,
            coordinates: CoordinateSpace::WorldMeters,
            delimiter: "whitespace".into(),
            has_header: false,
            pedestrian_labels: default_pedestrian_labels(),
        }
    }

    pub fn generic_csv() -> Self {
        SourceSchema {
            format: SourceFormat::GenericCsv,
            columns: None,
            coordinates: CoordinateSpace::WorldMeters,
            delimiter: default_delimiter(),
            has_header: true,
            pedestrian_labels: default_pedestrian_labels(),
        }
    }

    pub fn column_map(&self) -> ColumnMap {
        self.columns.clone().unwrap_or_else(|| match self.format {
            SourceFormat::EthObsmat => ColumnMap::eth_obsmat(),
            SourceFormat::GenericCsv => ColumnMap::named("frame", "id", "x", "y"),
        })
    }

    fn has_header(&self) -> bool {
        match self.format {
            SourceFormat::EthObsmat => false,
            SourceFormat::GenericCsv => self.has_header,
        }
    }

    fn split<'a>(&self, line: &'a str) -> Vec<&'a str> {
        let whitespace = self.format == SourceFormat::EthObsmat || self.delimiter == "whitespace";
        if whitespace {
            line.split_whitespace().collect()
        } else {
            line.split(self.delimiter.as_str()).map(str::trim).collect()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cols = self.column_map();
        let mut refs = vec![&cols.frame, &cols.agent_id, &cols.x, &cols.y];
        refs.extend(cols.agent_type.as_ref());
        for (i, a) in refs.iter().enumerate() {
            if refs[i + 1..].contains(a) {
                return Err(Error::Config(format!("column {a:?} mapped twice")));
            }
            if !self.has_header() && matches!(a, ColumnRef::Name(_)) {
                return Err(Error::Config(format!(
                    "column {a:?} is named but the source has no header"
                )));
            }
        }
        if self.format == SourceFormat::GenericCsv && self.delimiter.is_empty() {
            return Err(Error::Config("empty delimiter".into()));
        }
        Ok(())
    }
}

/// One annotation row, in file order, before any grouping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub line: usize,
    pub frame: f64,
    pub agent_id: String,
    pub x: f64,
    pub y: f64,
    pub agent_type: Option<String>,
}

/// Numeric ids such as `1.0000000e+00` normalize to `1` so that the same
/// agent reads identically from obsmat and CSV sources.
fn normalize_id(token: &str) -> String {
    match token.parse::<f64>() {
        Ok(v) if v.is_finite() && v.fract() == 0.0 && v.abs() < 1e15 => format!("{}", v as i64),
        _ => token.to_owned(),
    }
}

/// Parses annotation text under `schema`. `origin` only labels errors.
pub fn parse_annotations_str(text: &str, schema: &SourceSchema, origin: &Path) -> Result<Vec<RawRow>> {
    schema.validate()?;
    let cols = schema.column_map();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };

    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));

    let header: Option<Vec<String>> = if schema.has_header() {
        let (_, l) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing header row".into()))?;
        Some(schema.split(l).iter().map(|s| s.to_string()).collect())
    } else {
        None
    };

    let resolve = |c: &ColumnRef| -> Result<usize> {
        match (c, &header) {
            (ColumnRef::Index(i), _) => Ok(*i),
            (ColumnRef::Name(n), Some(h)) => h
                .iter()
                .position(|x| x == n)
                .ok_or_else(|| Error::Config(format!("column '{n}' not found in header {h:?}"))),
            (ColumnRef::Name(n), None) => Err(Error::Config(format!("column '{n}' needs a header"))),
        }
    };
    let frame_col = resolve(&cols.frame)?;
    let id_col = resolve(&cols.agent_id)?;
    let x_col = resolve(&cols.x)?;
    let y_col = resolve(&cols.y)?;
    let type_col = cols.agent_type.as_ref().map(resolve).transpose()?;

    let mut rows = Vec::new();
    for (line_no, line) in lines {
        let fields = schema.split(line);
        let field = |col: usize, what: &str| -> Result<&str> {
            fields.get(col).copied().ok_or_else(|| {
                parse_err(
                    line_no,
                    format!("missing {what} column {col} ({} fields)", fields.len()),
                )
            })
        };
        let number = |col: usize, what: &str| -> Result<f64> {
            let raw = field(col, what)?;
            let v: f64 = raw
                .parse()
                .map_err(|_| parse_err(line_no, format!("{what} '{raw}' is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line_no, format!("{what} '{raw}' is not finite")));
            }
            Ok(v)
        };
        rows.push(RawRow {
            line: line_no,
            frame: number(frame_col, "frame")?,
            agent_id: normalize_id(field(id_col, "agent id")?),
            x: number(x_col, "x")?,
            y: number(y_col, "y")?,
            agent_type: type_col
                .map(|c| field(c, "agent type").map(str::to_owned))
                .transpose()?,
        });
    }
    Ok(rows)
}

pub fn parse_annotations(path: &Path, schema: &SourceSchema) -> Result<Vec<RawRow>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_annotations_str(&text, schema, path)
}

/// Planar projective transform from image pixels to world meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn new(matrix: Matrix3<f64>) -> Result<Self> {
        let det = matrix.determinant();
        if !(det.abs() > MIN_HOMOGRAPHY_DET) {
            return Err(Error::SingularHomography(det.abs()));
        }
        Ok(Homography(matrix))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .0
            .try_inverse()
            .ok_or(Error::SingularHomography(self.0.determinant().abs()))?;
        Homography::new(inv)
    }

    /// Three lines of three whitespace-separated numbers.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let rows: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| (i + 1, l))
            .collect();
        if rows.len() != 3 {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: rows.get(3).map_or(rows.len() + 1, |r| r.0),
                message: format!("homography needs 3 rows, found {}", rows.len()),
            });
        }
        let mut m = Matrix3::zeros();
        for (r, (line_no, line)) in rows.iter().enumerate() {
            let vals: Vec<&str> = line.split_whitespace().collect();
            if vals.len() != 3 {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: *line_no,
                    message: format!("homography row needs 3 values, found {}", vals.len()),
                });
            }
            for (c, v) in vals.iter().enumerate() {
                m[(r, c)] = v.parse().map_err(|_| Error::Parse {
                    path: origin.to_path_buf(),
                    line: *line_no,
                    message: format!("'{v}' is not a number"),
                })?;
            }
        }
        Homography::new(m)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Homography::parse(&text, path)
    }

    /// Projects one point; `None` when the homogeneous denominator vanishes.
    pub fn project(&self, p: Vec2) -> Option<Vec2> {
        let h = &self.0;
        let w = h[(2, 0)] * p.x + h[(2, 1)] * p.y + h[(2, 2)];
        if w.abs() < MIN_PROJECTION_DENOMINATOR {
            return None;
        }
        let u = h[(0, 0)] * p.x + h[(0, 1)] * p.y + h[(0, 2)];
        let v = h[(1, 0)] * p.x + h[(1, 1)] * p.y + h[(1, 2)];
        Some(Vec2::new(u / w, v / w))
    }
}

/// Maps pixel points to world points. Points with a vanishing homogeneous
/// denominator come back as `None` and are logged.
pub fn apply_homography(points: &[Vec2], h: &Homography) -> Vec<Option<Vec2>> {
    points
        .iter()
        .map(|&p| {
            let out = h.project(p);
            if out.is_none() {
                log::warn!("point ({}, {}) projects to infinity; excluded", p.x, p.y);
            }
            out
        })
        .collect()
}

/// Dataset source description, as found in the pipeline config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub name: String,
    pub files: Vec<PathBuf>,
    pub schema: SourceSchema,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub homography: Option<PathBuf>,
    /// Source annotation frame rate in Hz.
    pub fps: f64,
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::Config(format!("fps must be > 0, got {}", self.fps)));
        }
        if self.files.is_empty() {
            return Err(Error::Config("no annotation files listed".into()));
        }
        match (self.schema.coordinates, &self.homography) {
            (CoordinateSpace::ImagePixels, None) => {
                return Err(Error::Config("image-pixel coordinates need a homography".into()))
            }
            (CoordinateSpace::WorldMeters, Some(_)) => {
                return Err(Error::Config(
                    "homography given but coordinates are already world-meters".into(),
                ))
            }
            _ => {}
        }
        self.schema.validate()
    }

    /// Resolves relative file paths against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        for f in &mut self.files {
            if f.is_relative() {
                *f = base.join(&*f);
            }
        }
        if let Some(h) = &mut self.homography {
            if h.is_relative() {
                *h = base.join(&*h);
            }
        }
    }
}

/// Groups raw rows into a dataset. Rows excluded here (non-pedestrian or
/// unprojectable) are counted in the dataset flags.
pub fn assemble_dataset(
    name: &str,
    rows: Vec<RawRow>,
    schema: &SourceSchema,
    homography: Option<&Homography>,
    fps: f64,
) -> Result<Dataset> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset(name.to_owned()));
    }
    let labels: Vec<String> = schema
        .pedestrian_labels
        .iter()
        .map(|l| l.to_lowercase())
        .collect();
    let mut excluded = 0usize;
    let mut order: Vec<AgentId> = Vec::new();
    let mut groups: HashMap<AgentId, Vec<AgentState>> = HashMap::new();
    for row in rows {
        if let Some(kind) = &row.agent_type {
            if !labels.contains(&kind.to_lowercase()) {
                excluded += 1;
                continue;
            }
        }
        let raw = Vec2::new(row.x, row.y);
        let position = match homography {
            Some(h) => match h.project(raw) {
                Some(p) => p,
                None => {
                    log::warn!("row {} projects to infinity; excluded", row.line);
                    excluded += 1;
                    continue;
                }
            },
            None => raw,
        };
        let agent = AgentId(row.agent_id);
        let states = groups.entry(agent.clone()).or_insert_with(|| {
            order.push(agent.clone());
            Vec::new()
        });
        states.push(AgentState::new(agent, row.frame / fps, position));
    }
    if order.is_empty() {
        return Err(Error::EmptyDataset(format!("{name}: every row was excluded")));
    }

    let mut trajectories = Vec::with_capacity(order.len());
    for agent in order {
        let mut states = groups.remove(&agent).unwrap_or_default();
        states.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        if let Some(w) = states.windows(2).find(|w| w[0].timestamp == w[1].timestamp) {
            return Err(Error::DuplicateState {
                agent: agent.to_string(),
                timestamp: w[0].timestamp,
            });
        }
        trajectories.push(Trajectory::new(agent, states)?);
    }

    let mut dataset = Dataset::from_trajectories(name, trajectories, fps)?;
    dataset.flags.excluded_rows = excluded;
    if dataset.flags.small {
        log::warn!(
            "dataset '{}' has only {} trajectories",
            name,
            dataset.agent_count()
        );
    }
    if !dataset.flags.single_observation_agents.is_empty() {
        log::info!(
            "{} agents in '{}' have a single observation",
            dataset.flags.single_observation_agents.len(),
            name
        );
    }
    Ok(dataset)
}

/// Reads every listed file (in parallel), projects if needed and assembles
/// the dataset. Agent ids are prefixed with the file index when more than
/// one file is listed.
pub fn load_dataset(config: &DatasetConfig) -> Result<Dataset> {
    config.validate()?;
    let homography = config
        .homography
        .as_deref()
        .map(Homography::from_file)
        .transpose()?;
    let per_file: Vec<Vec<RawRow>> = config
        .files
        .par_iter()
        .map(|f| parse_annotations(f, &config.schema))
        .collect::<Result<_>>()?;
    let multi = per_file.len() > 1;
    let rows: Vec<RawRow> = per_file
        .into_iter()
        .enumerate()
        .flat_map(|(i, rows)| {
            rows.into_iter().map(move |mut r| {
                if multi {
                    r.agent_id = format!("{i}:{}", r.agent_id);
                }
                r
            })
        })
        .collect();
    assemble_dataset(
        &config.name,
        rows,
        &config.schema,
        homography.as_ref(),
        config.fps,
    )
}
