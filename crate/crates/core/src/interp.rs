//! Piecewise cubic interpolation on monotone abscissae.

use crate::error::{Error, Result};

/// Cubic Hermite interpolant through `(x_i, y_i, y'_i)`.
///
/// Built either from known slopes or, via [`CubicHermite::monotone`], with
/// Fritsch–Carlson slopes that preserve monotonicity (and hence positivity)
/// of the data.
#[derive(Debug, Clone)]
pub struct CubicHermite {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

fn check_abscissae(x: &[f64]) -> Result<()> {
    if x.len() < 2 {
        return Err(Error::InvalidInput("need at least two samples".into()));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput(
            "abscissae must be strictly increasing".into(),
        ));
    }
    Ok(())
}

impl CubicHermite {
    pub fn with_slopes(x: Vec<f64>, y: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        check_abscissae(&x)?;
        if y.len() != x.len() || d.len() != x.len() {
            return Err(Error::InvalidInput("length mismatch".into()));
        }
        Ok(Self { x, y, d })
    }

    /// Monotone piecewise cubic (PCHIP).
    pub fn monotone(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        check_abscissae(&x)?;
        if y.len() != x.len() {
            return Err(Error::InvalidInput("length mismatch".into()));
        }
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
            return Ok(Self { x, y, d });
        }
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] > 0.0 {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
        d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        Ok(Self { x, y, d })
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    fn locate(&self, t: f64) -> usize {
        let i = self.x.partition_point(|&xi| xi <= t);
        i.clamp(1, self.x.len() - 1) - 1
    }

    /// Value and first derivative. Outside the range the end cubic is
    /// continued linearly from the end value and slope.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let (lo, hi) = self.x_range();
        if t < lo {
            return (self.y[0] + self.d[0] * (t - lo), self.d[0]);
        }
        if t > hi {
            let n = self.x.len() - 1;
            return (self.y[n] + self.d[n] * (t - hi), self.d[n]);
        }
        let i = self.locate(t);
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let (y0, y1, d0, d1) = (self.y[i], self.y[i + 1], self.d[i] * h, self.d[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let value = h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1;
        let dh00 = 6.0 * s2 - 6.0 * s;
        let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
        let dh01 = -6.0 * s2 + 6.0 * s;
        let dh11 = 3.0 * s2 - 2.0 * s;
        let deriv = (dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1) / h;
        (value, deriv)
    }

    /// Second derivative of the local cubic.
    pub fn second_derivative(&self, t: f64) -> f64 {
        let (lo, hi) = self.x_range();
        if t < lo || t > hi {
            return 0.0;
        }
        let i = self.locate(t);
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let (y0, y1, d0, d1) = (self.y[i], self.y[i + 1], self.d[i] * h, self.d[i + 1] * h);
        let a = (12.0 * s - 6.0) * y0 + (6.0 * s - 4.0) * d0 + (6.0 - 12.0 * s) * y1
            + (6.0 * s - 2.0) * d1;
        a / (h * h)
    }
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}
