//! Rauch-Tung-Striebel smoother over a per-axis constant-acceleration model.
//!
//! State per axis is `[position, velocity, acceleration]`; the process noise
//! is continuous white jerk with spectral density `q`.

use nalgebra::{Matrix3, RowVector3, Vector3};
use serde::{Deserialize, Serialize};

use super::check_uniform;
use crate::error::{Error, Result};
use crate::types::{AgentState, Trajectory, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmootherConfig {
    /// Jerk spectral density, m²/s⁵.
    pub q: f64,
    /// Measurement noise standard deviation, m.
    pub sigma_z: f64,
    /// Initial covariance is `init_cov · I`.
    pub init_cov: f64,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        SmootherConfig {
            q: 0.5,
            sigma_z: 0.1,
            init_cov: 10.0,
        }
    }
}

impl SmootherConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0) || !(self.sigma_z > 0.0) || !(self.init_cov > 0.0) {
            return Err(Error::Config(format!(
                "smoother needs q, sigma_z, init_cov > 0 (got {}, {}, {})",
                self.q, self.sigma_z, self.init_cov
            )));
        }
        Ok(())
    }
}

fn transition(dt: f64) -> Matrix3<f64> {
    Matrix3::new(1.0, dt, 0.5 * dt * dt, 0.0, 1.0, dt, 0.0, 0.0, 1.0)
}

fn process_noise(dt: f64, q: f64) -> Matrix3<f64> {
    let (d2, d3, d4, d5) = (dt * dt, dt.powi(3), dt.powi(4), dt.powi(5));
    Matrix3::new(
        d5 / 20.0,
        d4 / 8.0,
        d3 / 6.0,
        d4 / 8.0,
        d3 / 3.0,
        d2 / 2.0,
        d3 / 6.0,
        d2 / 2.0,
        dt,
    ) * q
}

/// Smoothed `[p, v, a]` for one axis.
fn smooth_axis(z: &[f64], dt: f64, cfg: &SmootherConfig) -> Result<Vec<Vector3<f64>>> {
    let n = z.len();
    let f = transition(dt);
    let q = process_noise(dt, cfg.q);
    let r = cfg.sigma_z * cfg.sigma_z;
    let h = RowVector3::new(1.0, 0.0, 0.0);

    let mut x_pred = Vec::with_capacity(n);
    let mut p_pred = Vec::with_capacity(n);
    let mut x_filt = Vec::with_capacity(n);
    let mut p_filt = Vec::with_capacity(n);

    let v0 = (z[1] - z[0]) / dt;
    let mut x = Vector3::new(z[0], v0, 0.0);
    let mut p = Matrix3::identity() * cfg.init_cov;
    for (k, &zk) in z.iter().enumerate() {
        if k > 0 {
            x = f * x;
            p = f * p * f.transpose() + q;
        }
        x_pred.push(x);
        p_pred.push(p);

        let s = p[(0, 0)] + r;
        let gain: Vector3<f64> = p.column(0) / s;
        x += gain * (zk - x[0]);
        p -= gain * (h * p);
        p = 0.5 * (p + p.transpose());
        x_filt.push(x);
        p_filt.push(p);
    }

    let mut xs = x_filt.clone();
    let mut ps = p_filt.clone();
    for k in (0..n - 1).rev() {
        let inv = p_pred[k + 1]
            .try_inverse()
            .ok_or_else(|| Error::Insufficient("singular predicted covariance".into()))?;
        let c = p_filt[k] * f.transpose() * inv;
        xs[k] = x_filt[k] + c * (xs[k + 1] - x_pred[k + 1]);
        ps[k] = p_filt[k] + c * (ps[k + 1] - p_pred[k + 1]) * c.transpose();
    }
    Ok(xs)
}

/// Forward Kalman filter plus backward RTS pass on each axis. Positions are
/// replaced by smoothed positions and velocities are filled in from the
/// smoothed state. Input must be uniformly sampled (±10%).
pub fn kalman_smooth(traj: &Trajectory, cfg: &SmootherConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let states = traj.states();
    if states.len() < 2 {
        return Err(Error::Insufficient(format!(
            "smoothing agent {} needs at least 2 samples",
            traj.agent_id
        )));
    }
    let times: Vec<f64> = states.iter().map(|s| s.timestamp).collect();
    let dt = traj.duration() / (states.len() - 1) as f64;
    check_uniform(&times, dt)?;

    let xs: Vec<f64> = states.iter().map(|s| s.position.x).collect();
    let ys: Vec<f64> = states.iter().map(|s| s.position.y).collect();
    let sx = smooth_axis(&xs, dt, cfg)?;
    let sy = smooth_axis(&ys, dt, cfg)?;

    let smoothed = states
        .iter()
        .zip(sx.iter().zip(&sy))
        .map(|(s, (ax, ay))| AgentState {
            agent_id: s.agent_id.clone(),
            timestamp: s.timestamp,
            position: Vec2::new(ax[0], ay[0]),
            velocity: Some(Vec2::new(ax[1], ay[1])),
        })
        .collect();
    Trajectory::new(traj.agent_id.clone(), smoothed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::AgentId;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn from_fn(n: usize, dt: f64, mut f: impl FnMut(f64) -> Vec2) -> Trajectory {
        let agent = AgentId::from("a");
        Trajectory::new(
            agent.clone(),
            (0..n)
                .map(|i| {
                    let t = i as f64 * dt;
                    AgentState::new(agent.clone(), t, f(t))
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn constant_velocity_line_is_preserved() {
        let traj = from_fn(30, 0.4, |t| Vec2::new(t, 2.0 * t));
        let out = kalman_smooth(&traj, &SmootherConfig::default()).unwrap();
        for (a, b) in out.states().iter().zip(traj.states()) {
            assert!((a.position - b.position).norm() < 1e-3);
            assert!((a.velocity.unwrap() - Vec2::new(1.0, 2.0)).norm() < 1e-2);
        }
    }

    #[test]
    fn constant_acceleration_parabola_is_preserved() {
        let traj = from_fn(30, 0.4, |t| Vec2::new(0.5 + 1.2 * t + 0.15 * t * t, -0.1 * t * t));
        let out = kalman_smooth(&traj, &SmootherConfig::default()).unwrap();
        for (a, b) in out.states().iter().zip(traj.states()) {
            assert!((a.position - b.position).norm() < 1e-3);
        }
    }

    #[test]
    fn smoothing_reduces_noise() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let truth = |t: f64| Vec2::new(1.3 * t, 0.4 * t);
        let (mut raw_se, mut smooth_se, mut count) = (0.0, 0.0, 0usize);
        for _ in 0..50 {
            let noisy = from_fn(25, 0.4, |t| {
                truth(t) + Vec2::new(noise.sample(&mut rng), noise.sample(&mut rng))
            });
            let out = kalman_smooth(&noisy, &SmootherConfig::default()).unwrap();
            for (s, n) in out.states().iter().zip(noisy.states()) {
                let g = truth(s.timestamp);
                raw_se += (n.position - g).norm_squared();
                smooth_se += (s.position - g).norm_squared();
                count += 1;
            }
        }
        let raw = (raw_se / count as f64).sqrt();
        let smooth = (smooth_se / count as f64).sqrt();
        assert!(smooth < raw, "smoothed RMSE {smooth} vs raw {raw}");
    }

    #[test]
    fn smoothing_commutes_with_translation() {
        let traj = from_fn(15, 0.4, |t| Vec2::new(t.sin(), 0.3 * t * t));
        let shift = Vec2::new(120.0, -45.0);
        let shifted = from_fn(15, 0.4, |t| Vec2::new(t.sin(), 0.3 * t * t) + shift);
        let cfg = SmootherConfig::default();
        let a = kalman_smooth(&traj, &cfg).unwrap();
        let b = kalman_smooth(&shifted, &cfg).unwrap();
        for (x, y) in a.states().iter().zip(b.states()) {
            assert!((x.position + shift - y.position).norm() < 1e-9);
            assert!((x.velocity.unwrap() - y.velocity.unwrap()).norm() < 1e-9);
        }
    }

    #[test]
    fn irregular_spacing_is_rejected() {
        let agent = AgentId::from("a");
        let states = [0.0, 0.4, 0.8, 1.6, 2.0]
            .iter()
            .map(|&t| AgentState::new(agent.clone(), t, Vec2::new(t, 0.0)))
            .collect();
        let traj = Trajectory::new(agent, states).unwrap();
        assert!(matches!(
            kalman_smooth(&traj, &SmootherConfig::default()),
            Err(Error::NonUniformSpacing { .. })
        ));
    }

    #[test]
    fn single_sample_is_rejected() {
        let traj = from_fn(1, 0.4, |_| Vec2::zeros());
        assert!(kalman_smooth(&traj, &SmootherConfig::default()).is_err());
    }
}
