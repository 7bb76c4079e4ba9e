use serde::{Deserialize, Serialize};

/// How percentiles are computed, recorded in the report metadata.
pub const PERCENTILE_CONVENTION: &str =
    "linear interpolation between closest ranks: position q/100 * (n - 1) in the sorted values";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
}

/// Order statistics of the present values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    pub p5: f64,
    pub p25: f64,
    pub p75: f64,
    pub p95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSummary {
    pub record_count: usize,
    pub present_count: usize,
    pub absent_count: usize,
    pub stats: Option<Stats>,
    pub histogram: Vec<HistogramBin>,
}

/// Percentile `q ∈ [0, 100]` of sorted values by linear interpolation.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q / 100.0 * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Equal-width bins over `[min, max]`, the last bin closed on the right. A
/// constant sample lands in a single zero-width bin.
pub fn histogram(sorted: &[f64], bins: usize) -> Vec<HistogramBin> {
    let (Some(&lo), Some(&hi)) = (sorted.first(), sorted.last()) else {
        return Vec::new();
    };
    if hi == lo || bins <= 1 {
        return vec![HistogramBin {
            left: lo,
            right: hi,
            count: sorted.len(),
        }];
    }
    let width = (hi - lo) / bins as f64;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|b| HistogramBin {
            left: lo + b as f64 * width,
            right: if b + 1 == bins { hi } else { lo + (b + 1) as f64 * width },
            count: 0,
        })
        .collect();
    for &v in sorted {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        out[b].count += 1;
    }
    out
}

pub fn summarize(values: &[Option<f64>], bins: usize) -> IndicatorSummary {
    let mut present: Vec<f64> = values.iter().flatten().copied().collect();
    present.sort_by(f64::total_cmp);
    let stats = (!present.is_empty()).then(|| Stats {
        min: present[0],
        max: present[present.len() - 1],
        mean: present.iter().sum::<f64>() / present.len() as f64,
        median: percentile(&present, 50.0),
        p5: percentile(&present, 5.0),
        p25: percentile(&present, 25.0),
        p75: percentile(&present, 75.0),
        p95: percentile(&present, 95.0),
    });
    IndicatorSummary {
        record_count: values.len(),
        present_count: present.len(),
        absent_count: values.len() - present.len(),
        stats,
        histogram: histogram(&present, bins),
    }
}
