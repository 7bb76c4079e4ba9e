use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Trajlet, Vec2};

/// Natural cubic interpolating spline through `(knots[i], values[i])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    /// Second derivatives at the knots; zero at both ends.
    second: Vec<f64>,
}

impl CubicSpline {
    /// Solves the tridiagonal system for the interior second derivatives
    /// (Thomas algorithm). Knots must strictly increase.
    pub fn natural(knots: &[f64], values: &[f64]) -> Result<Self> {
        let n = knots.len();
        if n != values.len() {
            return Err(Error::LengthMismatch {
                left: n,
                right: values.len(),
            });
        }
        if n < 2 {
            return Err(Error::Insufficient("spline needs at least 2 knots".into()));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("spline knots must increase".into()));
        }
        let mut second = vec![0.0; n];
        if n > 2 {
            let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
            let m = n - 2;
            let mut diag = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            for i in 0..m {
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                rhs[i] = 6.0
                    * ((values[i + 2] - values[i + 1]) / h[i + 1]
                        - (values[i + 1] - values[i]) / h[i]);
            }
            // forward sweep; the off-diagonal of row i is h[i + 1]
            for i in 1..m {
                let w = h[i] / diag[i - 1];
                diag[i] -= w * h[i];
                rhs[i] -= w * rhs[i - 1];
            }
            second[m] = rhs[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                second[i + 1] = (rhs[i] - h[i + 1] * second[i + 2]) / diag[i];
            }
        }
        Ok(CubicSpline {
            knots: knots.to_vec(),
            values: values.to_vec(),
            second,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Evaluates the spline; outside the knot range the end cubic pieces
    /// are extended.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.knots.len();
        let i = self
            .knots
            .partition_point(|&k| k <= t)
            .saturating_sub(1)
            .min(n - 2);
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let h = x1 - x0;
        let a = (x1 - t) / h;
        let b = (t - x0) / h;
        a * self.values[i]
            + b * self.values[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h
                / 6.0
    }
}

/// Per-axis splines of one trajlet over normalized time `[0, duration]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineTrajlet {
    pub trajlet_id: usize,
    pub duration: f64,
    pub x: CubicSpline,
    pub y: CubicSpline,
}

impl SplineTrajlet {
    pub fn eval(&self, t: f64) -> Vec2 {
        Vec2::new(self.x.eval(t), self.y.eval(t))
    }
}

/// Minimum samples for a trajlet spline.
pub const MIN_SPLINE_SAMPLES: usize = 4;

/// Fits natural cubic splines to a trajlet with its time grid mapped affinely
/// onto `[0, duration]`, so `t = 0` is the first sample and `t = duration`
/// the last.
pub fn fit_spline(trajlet: &Trajlet, duration: f64) -> Result<SplineTrajlet> {
    let n = trajlet.states.len();
    if n < MIN_SPLINE_SAMPLES {
        return Err(Error::Insufficient(format!(
            "trajlet {} has {n} samples, splines need {MIN_SPLINE_SAMPLES}",
            trajlet.id
        )));
    }
    let t0 = trajlet.start_time();
    let span = trajlet.span();
    let knots: Vec<f64> = trajlet
        .states
        .iter()
        .map(|s| (s.timestamp - t0) / span * duration)
        .collect();
    let xs: Vec<f64> = trajlet.states.iter().map(|s| s.position.x).collect();
    let ys: Vec<f64> = trajlet.states.iter().map(|s| s.position.y).collect();
    Ok(SplineTrajlet {
        trajlet_id: trajlet.id,
        duration,
        x: CubicSpline::natural(&knots, &xs)?,
        y: CubicSpline::natural(&knots, &ys)?,
    })
}
