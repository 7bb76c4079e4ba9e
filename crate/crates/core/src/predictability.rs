//! Trajlet-wise conditional entropy of the future part given the observed
//! part, under a Gaussian-kernel density of the whole dataset.
//!
//! With the product kernel `K_{h,N}` over `ℝ^{2N}`, the conditional density
//! of a future given an observed prefix is a mixture of kernels centred on
//! the reference futures, weighted by how close each reference's observed
//! part is to the query's. The entropy is estimated by Monte Carlo from that
//! mixture. All kernel arithmetic is done in log space: at N = 12 and
//! h = 0.5 the normalizer alone is around e^±5, and distances push the
//! exponent far outside the f64 range.

use rand::distributions::{Distribution, WeightedIndex};
use nalgebra::Rotation2;
use rand::Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{log_sum_exp, stream_rng};
use crate::types::{Trajlet, Vec2};

/// `predictability` section of the pipeline config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    /// Kernel bandwidth, meters.
    pub h: f64,
    /// Monte Carlo samples per trajlet.
    #[serde(rename = "M")]
    pub samples: usize,
    pub seed: u64,
    /// Skip references whose observed part is far outside the kernel
    /// relative to the nearest reference.
    pub prune: bool,
    /// Exclude the query trajlet from its own reference set.
    pub leave_one_out: bool,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            h: 0.5,
            samples: 30,
            seed: 0,
            prune: true,
            leave_one_out: true,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || self.samples == 0 {
            return Err(Error::Config(format!(
                "predictability needs h > 0 and M >= 1 (got {}, {})",
                self.h, self.samples
            )));
        }
        Ok(())
    }

    /// Squared distance margin past the nearest reference beyond which a
    /// reference is skipped when pruning: `(6h·√(2N))²`.
    pub fn prune_radius_sq(&self, n_obs: usize) -> f64 {
        36.0 * self.h * self.h * 2.0 * n_obs as f64
    }
}

fn squared_distance(a: &[Vec2], b: &[Vec2]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(p, q)| (p - q).norm_squared()).sum())
}

/// `log K_{h,N}(X, X')` for two polylines of `N` points each:
/// `-N·log(2πh²) - ‖X - X'‖² / (2h²)`.
pub fn log_trajlet_kernel(a: &[Vec2], b: &[Vec2], h: f64) -> Result<f64> {
    let d2 = squared_distance(a, b)?;
    Ok(log_kernel_from_sq(d2, a.len(), h))
}

fn log_kernel_from_sq(d2: f64, n: usize, h: f64) -> f64 {
    -(n as f64) * (2.0 * std::f64::consts::PI * h * h).ln() - d2 / (2.0 * h * h)
}

/// `K_{h,N}(X, X')`; may underflow to zero, prefer [`log_trajlet_kernel`].
pub fn trajlet_kernel(a: &[Vec2], b: &[Vec2], h: f64) -> Result<f64> {
    log_trajlet_kernel(a, b, h).map(f64::exp)
}

fn positions(states: &[crate::types::AgentState]) -> Vec<Vec2> {
    states.iter().map(|s| s.position).collect()
}

/// Mixture weights over a reference set, aligned with the reference slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorWeights {
    pub query_id: usize,
    /// One weight per reference; excluded or pruned references hold 0.
    pub weights: Vec<f64>,
    /// Natural log of `weights` (`-∞` where the weight is 0).
    pub log_weights: Vec<f64>,
    /// Every kernel underflowed and the weights fell back to uniform.
    pub degenerate: bool,
}

impl PosteriorWeights {
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.log_weights
            .iter()
            .enumerate()
            .filter(|(_, lw)| lw.is_finite())
            .map(|(i, lw)| (i, *lw))
    }
}

/// `ω_l ∝ K_{h,N_obs}(X^k, X^l)` over the observed parts, normalized in log
/// space. The query (matched by id) is left out unless `leave_one_out` is off.
pub fn posterior_weights(
    query: &Trajlet,
    references: &[&Trajlet],
    cfg: &KernelConfig,
) -> Result<PosteriorWeights> {
    cfg.validate()?;
    let q = positions(query.observed());
    let n_obs = q.len();
    let excluded = |r: &Trajlet| cfg.leave_one_out && r.id == query.id;
    if references.iter().filter(|r| !excluded(r)).count() == 0 {
        return Err(Error::Insufficient(format!(
            "trajlet {} has no reference trajlets",
            query.id
        )));
    }

    let mut d2 = vec![f64::INFINITY; references.len()];
    for (d, r) in d2.iter_mut().zip(references) {
        if !excluded(r) {
            *d = squared_distance(&q, &positions(r.observed()))?;
        }
    }
    // pruned references weigh less than e^(-36·N_obs) of the nearest one
    let cutoff = if cfg.prune {
        d2.iter().copied().fold(f64::INFINITY, f64::min) + cfg.prune_radius_sq(n_obs)
    } else {
        f64::INFINITY
    };
    let log_k: Vec<f64> = d2
        .iter()
        .map(|&d| {
            if d.is_finite() && d <= cutoff {
                log_kernel_from_sq(d, n_obs, cfg.h)
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();

    let norm = log_sum_exp(&log_k);
    let mut degenerate = false;
    let log_weights: Vec<f64> = if norm.is_finite() {
        log_k.iter().map(|lk| lk - norm).collect()
    } else {
        log::warn!("all kernels underflow for trajlet {}; uniform weights", query.id);
        degenerate = true;
        let live = references.iter().filter(|r| !excluded(r)).count() as f64;
        references
            .iter()
            .map(|r| if excluded(r) { f64::NEG_INFINITY } else { -live.ln() })
            .collect()
    };
    Ok(PosteriorWeights {
        query_id: query.id,
        weights: log_weights.iter().map(|lw| lw.exp()).collect(),
        log_weights,
        degenerate,
    })
}

/// One Monte Carlo draw from the future mixture: the chosen reference and the
/// kernel noise added to its future points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FutureDraw {
    pub component: usize,
    pub noise: Vec<Vec2>,
}

/// Draws `M` mixture components and isotropic noise (std `h` per coordinate)
/// along the axes the caller chooses; see [`query_frame`].
pub fn draw_futures<R: Rng>(
    weights: &PosteriorWeights,
    future_len: usize,
    cfg: &KernelConfig,
    rng: &mut R,
) -> Result<Vec<FutureDraw>> {
    let pick = WeightedIndex::new(&weights.weights)
        .map_err(|e| Error::InvalidArgument(format!("posterior weights: {e}")))?;
    let noise = Normal::new(0.0, cfg.h).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok((0..cfg.samples)
        .map(|_| {
            let component = pick.sample(rng);
            let noise = (0..future_len)
                .map(|_| Vec2::new(noise.sample(rng), noise.sample(rng)))
                .collect();
            FutureDraw { component, noise }
        })
        .collect())
}

fn query_rng(cfg: &KernelConfig, query_id: usize) -> rand_chacha::ChaCha8Rng {
    stream_rng(cfg.seed, &[query_id as u64])
}

/// Rotation from the query's local frame to world coordinates: the x axis
/// points along the observed displacement (identity when the query has not
/// moved). Kernel noise is drawn in this frame, so a fixed seed gives the
/// same estimate for any rotated or translated copy of the dataset.
pub fn query_frame(query: &Trajlet) -> Rotation2<f64> {
    let obs = query.observed();
    let d = match (obs.first(), obs.last()) {
        (Some(a), Some(b)) => b.position - a.position,
        _ => Vec2::zeros(),
    };
    if d.norm() < 1e-9 {
        Rotation2::identity()
    } else {
        Rotation2::new(d.y.atan2(d.x))
    }
}

fn orient(draws: &mut [FutureDraw], frame: &Rotation2<f64>) {
    for e in draws.iter_mut().flat_map(|d| d.noise.iter_mut()) {
        *e = frame * *e;
    }
}

fn query_draws(
    query: &Trajlet,
    weights: &PosteriorWeights,
    future_len: usize,
    cfg: &KernelConfig,
) -> Result<Vec<FutureDraw>> {
    let mut rng = query_rng(cfg, query.id);
    let mut draws = draw_futures(weights, future_len, cfg, &mut rng)?;
    orient(&mut draws, &query_frame(query));
    Ok(draws)
}

/// `M` future polylines sampled from `query`'s mixture, seeded by
/// `(seed, query id)`.
pub fn sample_futures(
    query: &Trajlet,
    weights: &PosteriorWeights,
    references: &[&Trajlet],
    cfg: &KernelConfig,
) -> Result<Vec<Vec<Vec2>>> {
    let future_len = references
        .first()
        .map(|r| r.future().len())
        .ok_or_else(|| Error::Insufficient("no references".into()))?;
    let draws = query_draws(query, weights, future_len, cfg)?;
    Ok(draws
        .iter()
        .map(|d| realize(d, references[d.component]))
        .collect())
}

fn realize(draw: &FutureDraw, reference: &Trajlet) -> Vec<Vec2> {
    reference
        .future()
        .iter()
        .zip(&draw.noise)
        .map(|(s, e)| s.position + e)
        .collect()
}

/// `-(1/M) Σ_m log Σ_l ω_l K_{h,N_pred}(X₊⁽ᵐ⁾, X₊ˡ)` for given draws.
pub fn entropy_from_draws(
    weights: &PosteriorWeights,
    references: &[&Trajlet],
    draws: &[FutureDraw],
    h: f64,
) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::Insufficient("no Monte Carlo draws".into()));
    }
    let support: Vec<(usize, f64, Vec<Vec2>)> = weights
        .support()
        .map(|(l, lw)| (l, lw, positions(references[l].future())))
        .collect();
    let mut terms = Vec::with_capacity(support.len());
    let mut total = 0.0;
    for d in draws {
        let sample = realize(d, references[d.component]);
        terms.clear();
        for (_, lw, fut) in &support {
            terms.push(lw + log_trajlet_kernel(&sample, fut, h)?);
        }
        total += log_sum_exp(&terms);
    }
    Ok(-total / draws.len() as f64)
}

/// Conditional entropy (nats) of `query`'s future given its observed part.
/// Deterministic for a fixed seed and query id.
pub fn conditional_entropy(query: &Trajlet, references: &[&Trajlet], cfg: &KernelConfig) -> Result<f64> {
    let weights = posterior_weights(query, references, cfg)?;
    let future_len = query.future().len();
    if let Some(r) = references.iter().find(|r| r.future().len() != future_len) {
        return Err(Error::LengthMismatch {
            left: future_len,
            right: r.future().len(),
        });
    }
    let draws = query_draws(query, &weights, future_len, cfg)?;
    entropy_from_draws(&weights, references, &draws, cfg.h)
}

/// Conditional entropy of every trajlet against the whole set, in parallel.
pub fn conditional_entropies(trajlets: &[&Trajlet], cfg: &KernelConfig) -> Vec<Result<f64>> {
    trajlets
        .par_iter()
        .map(|q| conditional_entropy(q, trajlets, cfg))
        .collect()
}
