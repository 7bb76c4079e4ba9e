//! Data-driven lower bound on meaningful TTC values.
//!
//! Observed pairwise TTCs are binned over `(0, τ⁺]` and compared against a
//! no-interaction baseline obtained by pairing each agent with a state drawn
//! from a different timestamp. Frames are split into contiguous blocks; each
//! block is one replicate, with its own observed histogram and scrambled
//! baseline, giving one observed/baseline ratio per bin. Bootstrapping a
//! single sample instead would shrink the standard error without shrinking
//! the sample's own noise, and flag bins in null data. Consecutive bins are
//! compared with Welch t-tests (Bonferroni-corrected over all tested pairs);
//! the bound is the left edge of the upper bin of the first significant pair.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::pairwise::{ttc_relative, Ttc};
use super::InteractionParams;
use crate::error::{Error, Result};
use crate::math::stream_rng;
use crate::types::{AgentState, Frame};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauEstimate {
    pub tau_lower: f64,
    /// Left bin edges, seconds.
    pub bin_edges: Vec<f64>,
    pub observed_counts: Vec<usize>,
    /// Mean observed/baseline ratio per bin over frame blocks.
    pub ratio_mean: Vec<Option<f64>>,
    /// Welch p-value between bin `b` and `b + 1`.
    pub p_values: Vec<Option<f64>>,
    pub pair_count: usize,
    /// The data were too sparse and the bound defaulted to 0.
    pub fallback: bool,
}

struct Bins {
    width: f64,
    count: usize,
    upper: f64,
}

impl Bins {
    fn of(&self, ttc: Ttc) -> Option<usize> {
        match ttc {
            Ttc::At(t) if t > 0.0 && t <= self.upper => {
                Some(((t / self.width).ceil() as usize).saturating_sub(1).min(self.count - 1))
            }
            _ => None,
        }
    }
}

fn pair_bin(a: &AgentState, b: &AgentState, p: &InteractionParams, bins: &Bins) -> Result<Option<usize>> {
    if !p.in_neighborhood(a, b) {
        return Ok(None);
    }
    let dx = a.position - b.position;
    let dv = a.require_velocity()? - b.require_velocity()?;
    Ok(bins.of(ttc_relative(dx, dv, p.radius)))
}

fn histogram(outcomes: impl Iterator<Item = Option<usize>>, n: usize) -> Vec<usize> {
    let mut h = vec![0; n];
    for b in outcomes.flatten() {
        h[b] += 1;
    }
    h
}

/// Two-sided Welch t-test p-value; `None` with fewer than two samples.
pub(crate) fn welch_p_value(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let stats = |x: &[f64]| {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (n - 1.0);
        (n, m, v)
    };
    let (na, ma, va) = stats(a);
    let (nb, mb, vb) = stats(b);
    let sa = va / na;
    let sb = vb / nb;
    let se2 = sa + sb;
    if se2 <= 0.0 {
        return Some(if ma == mb { 1.0 } else { 0.0 });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    Some((2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0))
}

fn fallback(reason: &str, bins: &Bins, observed: Vec<usize>, pair_count: usize) -> TauEstimate {
    log::warn!("TTC lower bound defaults to 0: {reason}");
    TauEstimate {
        tau_lower: 0.0,
        bin_edges: (0..bins.count).map(|b| b as f64 * bins.width).collect(),
        observed_counts: observed,
        ratio_mean: vec![None; bins.count],
        p_values: vec![None; bins.count.saturating_sub(1)],
        pair_count,
        fallback: true,
    }
}

pub fn estimate_tau_lower_bound(frames: &[Frame], params: &InteractionParams, seed: u64) -> Result<TauEstimate> {
    params.validate()?;
    let bins = Bins {
        width: params.bin_width,
        count: ((params.tau_upper / params.bin_width).round() as usize).max(1),
        upper: params.tau_upper,
    };

    // (frame, i, j) for every co-present pair, and its observed TTC bin
    let pairs: Vec<(usize, usize, usize, Option<usize>)> = frames
        .par_iter()
        .enumerate()
        .map(|(f, frame)| {
            let e = &frame.entries;
            let mut out = Vec::new();
            for i in 0..e.len() {
                for j in i + 1..e.len() {
                    out.push((f, i, j, pair_bin(&e[i], &e[j], params, &bins)?));
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let observed = histogram(pairs.iter().map(|p| p.3), bins.count);
    let n_pairs = pairs.len();

    let populated = observed.iter().filter(|&&c| c > 0).count();
    if populated < 2 {
        return Ok(fallback("fewer than 2 populated TTC bins", &bins, observed, n_pairs));
    }
    let mut sorted = observed.clone();
    sorted.sort_unstable();
    let median = if bins.count % 2 == 1 {
        sorted[bins.count / 2] as f64
    } else {
        0.5 * (sorted[bins.count / 2 - 1] + sorted[bins.count / 2]) as f64
    };
    if median < params.min_bin_count as f64 {
        return Ok(fallback(
            &format!("median TTC bin count {median} < {}", params.min_bin_count),
            &bins,
            observed,
            n_pairs,
        ));
    }

    let states: Vec<(usize, usize)> = frames
        .iter()
        .enumerate()
        .flat_map(|(f, fr)| (0..fr.entries.len()).map(move |k| (f, k)))
        .collect();
    if frames.iter().any(|f| f.count() == states.len()) {
        return Err(Error::Insufficient("scrambling needs states from at least two timestamps".into()));
    }

    let blocks = params.replicates.min(frames.len());
    let block_of = |f: usize| f * blocks / frames.len();
    let ratios: Vec<Vec<Option<f64>>> = (0..blocks)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, &[r as u64]);
            let mine: Vec<&(usize, usize, usize, Option<usize>)> =
                pairs.iter().filter(|p| block_of(p.0) == r).collect();
            let obs = histogram(mine.iter().map(|p| p.3), bins.count);
            let mut scrambled = Vec::with_capacity(mine.len());
            for &&(f, i, _, _) in &mine {
                let (g, k) = loop {
                    let s = states[rng.gen_range(0..states.len())];
                    if s.0 != f {
                        break s;
                    }
                };
                scrambled.push(pair_bin(&frames[f].entries[i], &frames[g].entries[k], params, &bins)?);
            }
            let base = histogram(scrambled.into_iter(), bins.count);
            Ok(obs
                .iter()
                .zip(&base)
                .map(|(&o, &s)| (s > 0).then(|| o as f64 / s as f64))
                .collect())
        })
        .collect::<Result<_>>()?;

    let per_bin: Vec<Vec<f64>> = (0..bins.count)
        .map(|b| ratios.iter().filter_map(|r| r[b]).collect())
        .collect();
    let ratio_mean = per_bin
        .iter()
        .map(|v| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64))
        .collect();
    let p_values: Vec<Option<f64>> = per_bin
        .windows(2)
        .map(|w| welch_p_value(&w[0], &w[1]))
        .collect();
    let tests = p_values.iter().flatten().count().max(1);
    let threshold = params.significance / tests as f64;
    let tau_lower = p_values
        .iter()
        .position(|p| p.map_or(false, |p| p < threshold))
        .map_or(0.0, |b| (b + 1) as f64 * bins.width);

    Ok(TauEstimate {
        tau_lower,
        bin_edges: (0..bins.count).map(|b| b as f64 * bins.width).collect(),
        observed_counts: observed,
        ratio_mean,
        p_values,
        pair_count: n_pairs,
        fallback: false,
    })
}
