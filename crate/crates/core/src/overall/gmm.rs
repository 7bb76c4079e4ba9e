//! Two-dimensional full-covariance Gaussian mixtures fitted by EM, with the
//! component count chosen by BIC.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{log_sum_exp, stream_rng};
use crate::types::Vec2;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmmConfig {
    pub k_max: usize,
    pub n_init: usize,
    pub max_iter: usize,
    /// Convergence threshold on the mean per-point log-likelihood.
    pub tol: f64,
    /// Ridge added to every covariance diagonal.
    pub reg_covar: f64,
    /// Lloyd iterations run after k-means++ seeding.
    pub kmeans_iter: usize,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            k_max: 21,
            n_init: 5,
            max_iter: 200,
            tol: 1e-6,
            reg_covar: 1e-6,
            kmeans_iter: 10,
        }
    }
}

/// Symmetric 2×2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cov2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Cov2 {
    fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    fn regularized(self, eps: f64) -> Self {
        Cov2 {
            xx: self.xx + eps,
            yy: self.yy + eps,
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec2,
    pub cov: Cov2,
}

impl Component {
    fn log_density(&self, p: &Vec2) -> f64 {
        let det = self.cov.det();
        let d = p - self.mean;
        let maha = (self.cov.yy * d.x * d.x - 2.0 * self.cov.xy * d.x * d.y + self.cov.xx * d.y * d.y)
            / det;
        -LN_2PI - 0.5 * det.ln() - 0.5 * maha
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmFit {
    pub components: Vec<Component>,
    /// Total log-likelihood of the data.
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl GmmFit {
    /// Free parameters of a 2D full-covariance mixture: means, covariances
    /// and `k - 1` weights.
    pub fn parameter_count(k: usize) -> usize {
        6 * k - 1
    }

    pub fn bic(&self, n: usize) -> f64 {
        -2.0 * self.log_likelihood + Self::parameter_count(self.components.len()) as f64 * (n as f64).ln()
    }
}

fn weighted_cov(points: &[Vec2], resp: impl Fn(usize) -> f64, mean: Vec2, total: f64) -> Cov2 {
    let (mut xx, mut xy, mut yy) = (0.0, 0.0, 0.0);
    for (i, p) in points.iter().enumerate() {
        let r = resp(i);
        let d = p - mean;
        xx += r * d.x * d.x;
        xy += r * d.x * d.y;
        yy += r * d.y * d.y;
    }
    Cov2 {
        xx: xx / total,
        xy: xy / total,
        yy: yy / total,
    }
}

fn kmeans_pp<R: Rng>(points: &[Vec2], k: usize, iters: usize, rng: &mut R) -> Vec<usize> {
    let n = points.len();
    let mut centers = vec![points[rng.gen_range(0..n)]];
    let mut d2: Vec<f64> = points.iter().map(|p| (p - centers[0]).norm_squared()).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, d) in d2.iter().enumerate() {
                if u < *d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            pick
        } else {
            rng.gen_range(0..n)
        };
        let c = points[next];
        centers.push(c);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min((p - c).norm_squared());
        }
    }

    let mut labels = vec![0usize; n];
    for _ in 0..=iters {
        for (l, p) in labels.iter_mut().zip(points) {
            *l = (0..k)
                .min_by(|&a, &b| {
                    (p - centers[a])
                        .norm_squared()
                        .total_cmp(&(p - centers[b]).norm_squared())
                })
                .unwrap_or(0);
        }
        let mut sums = vec![(Vec2::zeros(), 0usize); k];
        for (l, p) in labels.iter().zip(points) {
            sums[*l].0 += p;
            sums[*l].1 += 1;
        }
        for (c, (s, cnt)) in centers.iter_mut().zip(&sums) {
            if *cnt > 0 {
                *c = s / *cnt as f64;
            }
        }
    }
    labels
}

fn data_cov(points: &[Vec2]) -> Cov2 {
    let n = points.len() as f64;
    let mean = points.iter().sum::<Vec2>() / n;
    weighted_cov(points, |_| 1.0, mean, n)
}

/// One EM run with k-means++ initialization. `None` if the likelihood
/// becomes non-finite.
pub fn fit_gmm<R: Rng>(points: &[Vec2], k: usize, cfg: &GmmConfig, rng: &mut R) -> Option<GmmFit> {
    let n = points.len();
    if k == 0 || n < k {
        return None;
    }
    let eps = cfg.reg_covar;
    let fallback = data_cov(points).regularized(eps);

    let labels = kmeans_pp(points, k, cfg.kmeans_iter, rng);
    let mut comps: Vec<Component> = (0..k)
        .map(|c| {
            let members: Vec<Vec2> = labels
                .iter()
                .zip(points)
                .filter(|(l, _)| **l == c)
                .map(|(_, p)| *p)
                .collect();
            if members.is_empty() {
                Component {
                    weight: 1.0 / n as f64,
                    mean: points[c % n],
                    cov: fallback,
                }
            } else {
                let m = members.len() as f64;
                let mean = members.iter().sum::<Vec2>() / m;
                Component {
                    weight: m / n as f64,
                    mean,
                    cov: weighted_cov(&members, |_| 1.0, mean, m).regularized(eps),
                }
            }
        })
        .collect();
    let wsum: f64 = comps.iter().map(|c| c.weight).sum();
    comps.iter_mut().for_each(|c| c.weight /= wsum);

    let mut resp = vec![0.0; n * k];
    let mut logp = vec![0.0; k];
    let mut prev = f64::NEG_INFINITY;
    let mut ll = f64::NEG_INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    for it in 0..cfg.max_iter {
        iterations = it + 1;
        // E step
        ll = 0.0;
        for (i, p) in points.iter().enumerate() {
            for (lp, c) in logp.iter_mut().zip(&comps) {
                *lp = c.weight.ln() + c.log_density(p);
            }
            let norm = log_sum_exp(&logp);
            ll += norm;
            for (c, lp) in logp.iter().enumerate() {
                resp[i * k + c] = (lp - norm).exp();
            }
        }
        if !ll.is_finite() {
            return None;
        }
        if (ll - prev).abs() / n as f64 <= cfg.tol {
            converged = true;
            break;
        }
        prev = ll;
        // M step
        for (c, comp) in comps.iter_mut().enumerate() {
            let nk: f64 = (0..n).map(|i| resp[i * k + c]).sum::<f64>() + 10.0 * f64::EPSILON;
            let mean = points
                .iter()
                .enumerate()
                .map(|(i, p)| p * resp[i * k + c])
                .sum::<Vec2>()
                / nk;
            comp.weight = nk / n as f64;
            comp.mean = mean;
            comp.cov = weighted_cov(points, |i| resp[i * k + c], mean, nk).regularized(eps);
        }
    }
    Some(GmmFit {
        components: comps,
        log_likelihood: ll,
        iterations,
        converged,
    })
}

/// Outcome of BIC model selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSelection {
    pub k: usize,
    /// `(k, BIC)` for every component count that fitted.
    pub bic: Vec<(usize, f64)>,
}

/// Fits mixtures for `k = 1..=k_max` (best of `n_init` restarts each) and
/// returns the `k` with the lowest BIC. `k_max` drops to `⌊n / 2⌋` for small
/// samples. Each `(k, restart)` pair draws from its own seeded stream.
pub fn cluster_count(points: &[Vec2], cfg: &GmmConfig, seed: u64) -> Result<ClusterSelection> {
    let n = points.len();
    if n < 2 {
        return Err(Error::Insufficient(format!(
            "cluster count needs at least 2 points, got {n}"
        )));
    }
    let k_max = if n < 2 * cfg.k_max {
        (n / 2).max(1)
    } else {
        cfg.k_max
    };
    let mut bic = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let best = (0..cfg.n_init.max(1))
            .filter_map(|r| {
                let mut rng = stream_rng(seed, &[k as u64, r as u64]);
                fit_gmm(points, k, cfg, &mut rng)
            })
            .max_by(|a, b| a.log_likelihood.total_cmp(&b.log_likelihood));
        match best {
            Some(fit) => bic.push((k, fit.bic(n))),
            None => log::warn!("EM failed for k = {k}; skipped"),
        }
    }
    let &(k, _) = bic
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .ok_or_else(|| Error::Insufficient("EM failed for every component count".into()))?;
    Ok(ClusterSelection { k, bic })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    pub(crate) fn blobs(centers: &[(f64, f64)], per: usize, sigma: f64, seed: u64) -> Vec<Vec2> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma).unwrap();
        centers
            .iter()
            .flat_map(|&(x, y)| {
                (0..per)
                    .map(|_| Vec2::new(x + noise.sample(&mut rng), y + noise.sample(&mut rng)))
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    fn quick() -> GmmConfig {
        GmmConfig {
            k_max: 6,
            ..GmmConfig::default()
        }
    }

    #[test]
    fn three_blobs() {
        let pts = blobs(&[(0.0, 0.0), (6.0, 0.0), (0.0, 7.0)], 200, 0.1, 1);
        assert_eq!(cluster_count(&pts, &quick(), 42).unwrap().k, 3);
    }

    #[test]
    fn single_blob() {
        let pts = blobs(&[(2.0, -1.0)], 500, 0.1, 2);
        assert_eq!(cluster_count(&pts, &quick(), 42).unwrap().k, 1);
    }

    #[test]
    fn translation_does_not_change_count() {
        let pts = blobs(&[(0.0, 0.0), (5.0, 5.0)], 150, 0.3, 3);
        let moved: Vec<Vec2> = pts.iter().map(|p| p + Vec2::new(100.0, -50.0)).collect();
        let a = cluster_count(&pts, &quick(), 9).unwrap().k;
        let b = cluster_count(&moved, &quick(), 9).unwrap().k;
        assert_eq!(a, b);
    }

    #[test]
    fn small_sample_lowers_k_max() {
        let pts = blobs(&[(0.0, 0.0)], 6, 1.0, 4);
        let sel = cluster_count(&pts, &GmmConfig::default(), 1).unwrap();
        assert!(sel.bic.iter().all(|(k, _)| *k <= 3));
    }

    #[test]
    fn single_gaussian_fit_recovers_moments() {
        let pts = blobs(&[(1.0, 2.0)], 2000, 0.5, 5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let fit = fit_gmm(&pts, 1, &GmmConfig::default(), &mut rng).unwrap();
        let c = &fit.components[0];
        assert!((c.mean - Vec2::new(1.0, 2.0)).norm() < 0.05);
        assert!((c.cov.xx - 0.25).abs() < 0.03);
        assert!(c.cov.xy.abs() < 0.03);
    }

    #[test]
    fn coincident_points_do_not_break_em() {
        let pts = vec![Vec2::new(1.0, 1.0); 40];
        let sel = cluster_count(&pts, &quick(), 0).unwrap();
        assert_eq!(sel.k, 1);
    }

    #[test]
    fn one_point_is_an_error() {
        assert!(cluster_count(&[Vec2::zeros()], &quick(), 0).is_err());
    }
}
