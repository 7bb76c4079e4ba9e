use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{
    record_indicators, summarize, AssessConfig, AssessmentReport, ContextFields, DatasetMetadata,
    Indicator, IndicatorRecord, PredictabilityFields, RegularityFields, RunMetadata, PERCENTILE_CONVENTION,
    REPORT_DIGITS,
};
use crate::context::{context_records, estimate_tau_lower_bound, frame_indicators, Scene};
use crate::error::{Error, Result};
use crate::ingest::load_dataset;
use crate::math::stream_seed;
use crate::overall::describe;
use crate::predictability::conditional_entropies;
use crate::preprocess::{
    downsample_on_grid, filter_static, kalman_smooth, split_at_gaps, split_trajlets, PreprocessConfig,
};
use crate::regularity::regularity_all;
use crate::types::{build_frames, Dataset, Frame, Trajectory, Trajlet};

/// Preprocessed dataset: smoothed trajectory segments on a shared time grid,
/// their frames, and all trajlets (static ones flagged) with global ids.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: Dataset,
    pub segments: Vec<Trajectory>,
    pub frames: Vec<Frame>,
    pub trajlets: Vec<Trajlet>,
    pub short_trajectories: usize,
    pub dropped_segments: usize,
}

impl Prepared {
    pub fn non_static(&self) -> Vec<&Trajlet> {
        self.trajlets.iter().filter(|t| !t.is_static).collect()
    }
}

enum Segmented {
    Short,
    Pieces(Vec<Trajectory>, usize),
}

/// Downsamples every trajectory onto one grid anchored at the dataset's
/// earliest timestamp, splits at gaps, smooths, and cuts trajlets.
pub fn prepare(dataset: Dataset, cfg: &PreprocessConfig) -> Result<Prepared> {
    cfg.validate()?;
    let anchor = dataset
        .trajectories
        .iter()
        .map(Trajectory::start_time)
        .fold(f64::INFINITY, f64::min);
    let period = 1.0 / cfg.target_fps;
    let smoother = cfg.smoother();
    let per_traj: Vec<Segmented> = dataset
        .trajectories
        .par_iter()
        .map(|traj| {
            let ctx = || format!("agent {}", traj.agent_id);
            let ds = downsample_on_grid(traj, cfg.target_fps, anchor).map_err(|e| e.in_stage("preprocess", ctx()))?;
            if ds.flagged {
                return Ok(Segmented::Short);
            }
            let mut pieces = Vec::new();
            let mut dropped = 0;
            for seg in split_at_gaps(&ds.trajectory, period) {
                if seg.len() < 2 {
                    dropped += 1;
                    continue;
                }
                pieces.push(kalman_smooth(&seg, &smoother).map_err(|e| e.in_stage("preprocess", ctx()))?);
            }
            Ok(Segmented::Pieces(pieces, dropped))
        })
        .collect::<Result<_>>()?;

    let mut segments = Vec::new();
    let mut short_trajectories = 0;
    let mut dropped_segments = 0;
    for s in per_traj {
        match s {
            Segmented::Short => short_trajectories += 1,
            Segmented::Pieces(p, d) => {
                segments.extend(p);
                dropped_segments += d;
            }
        }
    }
    if short_trajectories > 0 {
        log::info!("{short_trajectories} trajectories too short to resample were skipped");
    }
    let frames = build_frames(&segments).map_err(|e| e.in_stage("preprocess", "frames"))?;

    let tcfg = cfg.trajlet();
    let mut trajlets = Vec::new();
    for seg in &segments {
        let cut = split_trajlets(seg, &tcfg)
            .map_err(|e| e.in_stage("preprocess", format!("agent {}", seg.agent_id)))?;
        trajlets.extend(filter_static(cut, &tcfg));
    }
    for (i, t) in trajlets.iter_mut().enumerate() {
        t.id = i;
    }
    Ok(Prepared {
        dataset,
        segments,
        frames,
        trajlets,
        short_trajectories,
        dropped_segments,
    })
}

/// Loads the configured dataset and runs every selected indicator.
pub fn run_pipeline(cfg: &AssessConfig) -> Result<AssessmentReport> {
    cfg.validate()?;
    let dataset = load_dataset(&cfg.dataset()).map_err(|e| e.in_stage("ingestion", cfg.name.clone()))?;
    assess_dataset(dataset, cfg)
}

fn trajlet_context(trajlets: &[&Trajlet], i: usize) -> String {
    format!("trajlet {} (agent {})", trajlets[i].id, trajlets[i].agent_id)
}

/// Runs preprocessing and the selected indicators on an in-memory dataset.
pub fn assess_dataset(dataset: Dataset, cfg: &AssessConfig) -> Result<AssessmentReport> {
    let seed = cfg.effective_seed();
    let prepared = prepare(dataset, &cfg.preprocess)?;
    let active = prepared.non_static();
    log::info!(
        "{}: {} trajlets, {} non-static, {} grid frames",
        cfg.name,
        prepared.trajlets.len(),
        active.len(),
        prepared.frames.len()
    );

    let entropies: Option<Vec<Option<f64>>> = if cfg.selects(Indicator::Predictability) {
        if active.len() < 2 {
            log::warn!("fewer than 2 non-static trajlets; conditional entropy left absent");
            Some(vec![None; active.len()])
        } else {
            let kcfg = crate::predictability::KernelConfig {
                seed,
                ..cfg.predictability
            };
            Some(
                conditional_entropies(&active, &kcfg)
                    .into_iter()
                    .enumerate()
                    .map(|(i, r)| r.map(Some).map_err(|e| e.in_stage("predictability", trajlet_context(&active, i))))
                    .collect::<Result<_>>()?,
            )
        }
    } else {
        None
    };

    let regularity = if cfg.selects(Indicator::Regularity) {
        Some(
            regularity_all(&active)
                .into_iter()
                .enumerate()
                .map(|(i, r)| r.map_err(|e| e.in_stage("regularity", trajlet_context(&active, i))))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };

    let mut tau_estimate = None;
    let mut frames_out = None;
    let context = if cfg.selects(Indicator::Context) {
        let scene = Scene::new(&prepared.frames, cfg.context.clone())?;
        let tau_lower = match cfg.context.tau_lower {
            Some(t) => t,
            None => {
                let est = estimate_tau_lower_bound(&prepared.frames, &cfg.context, stream_seed(seed, 1))
                    .map_err(|e| e.in_stage("context", "TTC lower bound"))?;
                let t = est.tau_lower;
                tau_estimate = Some(est);
                t
            }
        };
        frames_out = Some(frame_indicators(&prepared.frames, prepared.dataset.area));
        Some(
            context_records(&active, &scene, tau_lower)
                .into_iter()
                .enumerate()
                .map(|(i, r)| r.map_err(|e| e.in_stage("context", trajlet_context(&active, i))))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };

    let overall = if cfg.selects(Indicator::Overall) {
        if active.len() < 2 {
            log::warn!("fewer than 2 non-static trajlets; overall description skipped");
            None
        } else {
            Some(
                describe(&active, &cfg.overall, stream_seed(seed, 2))
                    .map_err(|e| e.in_stage("overall", cfg.name.clone()))?,
            )
        }
    } else {
        None
    };

    let records: Vec<IndicatorRecord> = active
        .iter()
        .enumerate()
        .map(|(i, t)| IndicatorRecord {
            trajlet_id: t.id,
            agent_id: t.agent_id.to_string(),
            start_time: t.start_time(),
            predictability: entropies.as_ref().map(|h| PredictabilityFields {
                conditional_entropy: h[i],
            }),
            regularity: regularity.as_ref().map(|r| RegularityFields {
                speed_avg: r[i].speed_avg,
                speed_range: r[i].speed_range,
                accel_avg: r[i].accel_avg,
                accel_max: r[i].accel_max,
                efficiency: r[i].efficiency,
                deviation_avg: r[i].deviation_avg,
                deviation_absavg_deg: r[i].deviation_absavg_deg,
            }),
            context: context.as_ref().map(|c| ContextFields {
                min_dca: c[i].min_dca,
                min_ttc: c[i].min_ttc,
                energy: c[i].energy,
                local_density: c[i].local_density,
                overlaps: c[i].overlaps,
            }),
        })
        .collect();

    let mut summaries = BTreeMap::new();
    for block in &cfg.indicators {
        for name in record_indicators(*block) {
            let values: Vec<Option<f64>> = records.iter().map(|r| r.value(name)).collect();
            summaries.insert(name.to_string(), summarize(&values, cfg.histogram_bins));
        }
    }
    if let Some(frames) = &frames_out {
        let values: Vec<Option<f64>> = frames.iter().map(|f| f.global_density).collect();
        summaries.insert("global_density".into(), summarize(&values, cfg.histogram_bins));
    }

    let ds = &prepared.dataset;
    let trajlet_count = prepared.trajlets.len();
    let metadata = DatasetMetadata {
        name: ds.name.clone(),
        agent_count: ds.agent_count(),
        frame_count: ds.frames.len(),
        grid_frame_count: prepared.frames.len(),
        duration: ds.duration(),
        total_trajectory_duration: ds.total_trajectory_duration(),
        trajlet_count,
        non_static_count: active.len(),
        non_static_fraction: if trajlet_count == 0 {
            0.0
        } else {
            active.len() as f64 / trajlet_count as f64
        },
        source_fps: ds.source_fps,
        target_fps: cfg.preprocess.target_fps,
        stride: cfg.preprocess.stride,
        area: ds.area,
        excluded_rows: ds.flags.excluded_rows,
        short_trajectories: prepared.short_trajectories,
        dropped_segments: prepared.dropped_segments,
    };
    let run = RunMetadata {
        version: env!("CARGO_PKG_VERSION").into(),
        seed,
        indicators: cfg.indicators.iter().copied().collect(),
        percentile_convention: PERCENTILE_CONVENTION.into(),
        float_digits: REPORT_DIGITS,
        exact: !cfg.predictability.prune && cfg.context.neighborhood.is_none(),
    };
    if metadata.trajlet_count == 0 {
        log::warn!("{}: no trajlets could be cut", cfg.name);
    }
    AssessmentReport {
        metadata,
        run,
        records,
        frames: frames_out,
        overall,
        tau_lower_bound: tau_estimate,
        summaries,
    }
    .canonicalize()
    .map_err(|e| match e {
        Error::Serde(_) => e.in_stage("report", "canonical form"),
        other => other,
    })
}
