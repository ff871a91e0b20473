//! Radial potentials, the `(a, b, δ)` perturbation pair, the derived
//! quantities `G`, `G_δ`, `K_δ`, `B_δ`, and admissibility checks.

use std::io::BufRead;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::interp::CubicHermite;
use crate::quadrature::{integrate_to_origin, GaussLegendre};

#[derive(Debug, Clone)]
pub enum PotentialKind {
    /// `α₁ log r + α₂ r^{α₃} + α₄`
    LogPower {
        alpha1: f64,
        alpha2: f64,
        alpha3: f64,
        alpha4: f64,
    },
    /// `−μ r²`
    InvertedHarmonic { mu: f64 },
    Constant { c: f64 },
    /// Tabulated `(r, V)` samples, interpolated by a monotone cubic.
    Table { spline: CubicHermite },
}

/// A radial potential `V(r)` in dimension `N ≥ 2`.
#[derive(Debug, Clone)]
pub struct Potential {
    kind: PotentialKind,
    dim: usize,
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidInput(format!(
            "dimension must be at least 2, got {dim}"
        )));
    }
    Ok(())
}

impl Potential {
    pub fn log_power(dim: usize, alpha1: f64, alpha2: f64, alpha3: f64, alpha4: f64) -> Result<Self> {
        check_dim(dim)?;
        if alpha1 <= 1.0 - dim as f64 {
            return Err(Error::InvalidInput(format!(
                "log-power family needs alpha1 > 1 - N = {}, got {alpha1}",
                1.0 - dim as f64
            )));
        }
        if ![alpha1, alpha2, alpha3, alpha4].iter().all(|a| a.is_finite()) {
            return Err(Error::InvalidInput("non-finite coefficient".into()));
        }
        Ok(Self {
            kind: PotentialKind::LogPower {
                alpha1,
                alpha2,
                alpha3,
                alpha4,
            },
            dim,
        })
    }

    /// `V = α log r`.
    pub fn log(dim: usize, alpha: f64) -> Result<Self> {
        Self::log_power(dim, alpha, 0.0, 0.0, 0.0)
    }

    pub fn inverted_harmonic(dim: usize, mu: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::InvalidInput(format!("mu must be >= 0, got {mu}")));
        }
        Ok(Self {
            kind: PotentialKind::InvertedHarmonic { mu },
            dim,
        })
    }

    pub fn constant(dim: usize, c: f64) -> Result<Self> {
        check_dim(dim)?;
        if !c.is_finite() {
            return Err(Error::InvalidInput("non-finite constant".into()));
        }
        Ok(Self {
            kind: PotentialKind::Constant { c },
            dim,
        })
    }

    pub fn table(dim: usize, r: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        if r.first().is_some_and(|&r0| r0 <= 0.0) {
            return Err(Error::InvalidInput("table radii must be positive".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite table value".into()));
        }
        let spline = CubicHermite::monotone(r, v)?;
        Ok(Self {
            kind: PotentialKind::Table { spline },
            dim,
        })
    }

    /// Reads a two-column `r,V` CSV. A non-numeric first line is treated as
    /// a header; blank lines and `#` comments are skipped.
    pub fn table_from_csv(dim: usize, path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut r = Vec::new();
        let mut v = Vec::new();
        for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (a, b) = match (cols.next(), cols.next()) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(Error::Parse(format!(
                        "{}:{}: expected two columns",
                        path.display(),
                        lineno + 1
                    )))
                }
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => {
                    r.push(x);
                    v.push(y);
                }
                _ if r.is_empty() && lineno == 0 => continue,
                _ => {
                    return Err(Error::Parse(format!(
                        "{}:{}: not a number",
                        path.display(),
                        lineno + 1
                    )))
                }
            }
        }
        Self::table(dim, r, v)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn singular_at_origin(&self) -> bool {
        match self.kind {
            PotentialKind::LogPower {
                alpha1,
                alpha2,
                alpha3,
                ..
            } => alpha1 != 0.0 || (alpha2 != 0.0 && alpha3 < 0.0),
            _ => false,
        }
    }

    /// Returns a copy shifted by a constant, `V + c`.
    pub fn shifted(&self, c: f64) -> Self {
        let kind = match &self.kind {
            PotentialKind::LogPower {
                alpha1,
                alpha2,
                alpha3,
                alpha4,
            } => PotentialKind::LogPower {
                alpha1: *alpha1,
                alpha2: *alpha2,
                alpha3: *alpha3,
                alpha4: alpha4 + c,
            },
            PotentialKind::Constant { c: c0 } => PotentialKind::Constant { c: c0 + c },
            PotentialKind::InvertedHarmonic { mu } => PotentialKind::LogPower {
                // −μr² + c has no dedicated variant; express it through the
                // power term.
                alpha1: 0.0,
                alpha2: -mu,
                alpha3: 2.0,
                alpha4: c,
            },
            PotentialKind::Table { spline } => {
                let (lo, hi) = spline.x_range();
                let n = 2048;
                let r: Vec<f64> = (0..=n)
                    .map(|i| lo * (hi / lo).powf(i as f64 / n as f64))
                    .collect();
                let v: Vec<f64> = r.iter().map(|&x| spline.eval(x).0 + c).collect();
                PotentialKind::Table {
                    spline: CubicHermite::monotone(r, v).expect("valid resampling"),
                }
            }
        };
        Self {
            kind,
            dim: self.dim,
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        match &self.kind {
            PotentialKind::LogPower {
                alpha1,
                alpha2,
                alpha3,
                alpha4,
            } => {
                let mut v = alpha4 + alpha1 * r.ln();
                if *alpha2 != 0.0 {
                    v += alpha2 * r.powf(*alpha3);
                }
                v
            }
            PotentialKind::InvertedHarmonic { mu } => -mu * r * r,
            PotentialKind::Constant { c } => *c,
            PotentialKind::Table { spline } => spline.eval(r).0,
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        match &self.kind {
            PotentialKind::LogPower {
                alpha1,
                alpha2,
                alpha3,
                ..
            } => {
                let mut d = alpha1 / r;
                if *alpha2 != 0.0 && *alpha3 != 0.0 {
                    d += alpha2 * alpha3 * r.powf(alpha3 - 1.0);
                }
                d
            }
            PotentialKind::InvertedHarmonic { mu } => -2.0 * mu * r,
            PotentialKind::Constant { .. } => 0.0,
            PotentialKind::Table { spline } => spline.eval(r).1,
        }
    }

    pub fn second_derivative(&self, r: f64) -> f64 {
        match &self.kind {
            PotentialKind::LogPower {
                alpha1,
                alpha2,
                alpha3,
                ..
            } => {
                let mut d = -alpha1 / (r * r);
                if *alpha2 != 0.0 && *alpha3 != 0.0 && *alpha3 != 1.0 {
                    d += alpha2 * alpha3 * (alpha3 - 1.0) * r.powf(alpha3 - 2.0);
                }
                d
            }
            PotentialKind::InvertedHarmonic { mu } => -2.0 * mu,
            PotentialKind::Constant { .. } => 0.0,
            PotentialKind::Table { spline } => spline.second_derivative(r),
        }
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("radius must be positive, got {r}")))
    }
}

/// `G(r) = V(r) + (N−1)(N−3)/(4r²) + (N−1) log r`.
pub fn eval_g(potential: &Potential, r: f64) -> Result<f64> {
    check_radius(r)?;
    let n = potential.dim() as f64;
    Ok(potential.value(r) + (n - 1.0) * (n - 3.0) / (4.0 * r * r) + (n - 1.0) * r.ln())
}

/// `G′(r)` from the analytic `V′`.
pub fn eval_g_prime(potential: &Potential, r: f64) -> Result<f64> {
    check_radius(r)?;
    let n = potential.dim() as f64;
    Ok(potential.derivative(r) - (n - 1.0) * (n - 3.0) / (2.0 * r * r * r) + (n - 1.0) / r)
}

/// `G′(r)` by a five-point central difference with step `max(1e−5, 1e−4·r)`,
/// shrunk so the stencil stays inside `r > 0`.
pub fn eval_g_prime_fd(potential: &Potential, r: f64) -> Result<f64> {
    check_radius(r)?;
    let h = (1e-5_f64).max(1e-4 * r).min(0.25 * r);
    let g = |x: f64| eval_g(potential, x);
    Ok((g(r - 2.0 * h)? - 8.0 * g(r - h)? + 8.0 * g(r + h)? - g(r + 2.0 * h)?) / (12.0 * h))
}

/// The perturbation pair `(a, b)` with strength `δ`.
///
/// `b` equals 1 on `[0, plateau]`, falls to 0 on `[plateau, support]` along
/// a C³ septic smoothstep, and vanishes beyond. `a = a_amp · b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationPair {
    pub delta: f64,
    pub a_amp: f64,
    pub plateau: f64,
    pub support: f64,
}

impl Default for PerturbationPair {
    fn default() -> Self {
        Self::none()
    }
}

impl PerturbationPair {
    pub fn none() -> Self {
        Self {
            delta: 0.0,
            a_amp: 0.0,
            plateau: 1.0,
            support: 2.0,
        }
    }

    pub fn new(delta: f64, a_amp: f64, plateau: f64, support: f64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidInput(format!("delta must be >= 0, got {delta}")));
        }
        if !(plateau > 0.0 && support > plateau && support.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "need 0 < plateau < support, got {plateau}, {support}"
            )));
        }
        if !a_amp.is_finite() {
            return Err(Error::InvalidInput("non-finite a amplitude".into()));
        }
        Ok(Self {
            delta,
            a_amp,
            plateau,
            support,
        })
    }

    pub fn is_trivial(&self) -> bool {
        self.delta == 0.0
    }

    /// `[b, b′, b″, b‴]` at `r`.
    pub fn b(&self, r: f64) -> [f64; 4] {
        if r <= self.plateau {
            return [1.0, 0.0, 0.0, 0.0];
        }
        if r >= self.support {
            return [0.0; 4];
        }
        let w = self.support - self.plateau;
        let x = (r - self.plateau) / w;
        let y = 1.0 - x;
        let s = x.powi(4) * (35.0 - 84.0 * x + 70.0 * x * x - 20.0 * x.powi(3));
        let s1 = 140.0 * x.powi(3) * y.powi(3);
        let s2 = 420.0 * x * x * y * y * (1.0 - 2.0 * x);
        let s3 = 840.0 * x * y * (5.0 * x * x - 5.0 * x + 1.0);
        [1.0 - s, -s1 / w, -s2 / (w * w), -s3 / (w * w * w)]
    }

    /// `[a, a′, a″]` at `r`.
    pub fn a(&self, r: f64) -> [f64; 3] {
        let b = self.b(r);
        [self.a_amp * b[0], self.a_amp * b[1], self.a_amp * b[2]]
    }

    /// `B_δ = 1 + δ b ≥ 1`.
    pub fn b_delta(&self, r: f64) -> f64 {
        1.0 + self.delta * self.b(r)[0]
    }

    /// `[K, K′, K″, K‴]` with `K_δ = 1 / B_δ`.
    pub fn k_delta(&self, r: f64) -> [f64; 4] {
        let d = self.delta;
        let [b, b1, b2, b3] = self.b(r);
        let k = 1.0 / (1.0 + d * b);
        let k1 = -d * b1 * k * k;
        let k2 = -d * b2 * k * k + 2.0 * d * d * b1 * b1 * k * k * k;
        let k3 = -d * b3 * k * k - 2.0 * d * b2 * k * k1
            + 4.0 * d * d * b1 * b2 * k.powi(3)
            + 6.0 * d * d * b1 * b1 * k * k * k1;
        [k, k1, k2, k3]
    }

    /// Radius beyond which the pair has no effect.
    pub fn support_radius(&self) -> f64 {
        if self.is_trivial() {
            0.0
        } else {
            self.support
        }
    }
}

/// `V_δ = V + δ a`.
pub fn v_delta(potential: &Potential, pair: &PerturbationPair, r: f64) -> f64 {
    let v = potential.value(r);
    if pair.is_trivial() {
        v
    } else {
        v + pair.delta * pair.a(r)[0]
    }
}

/// `V_δ′`.
pub fn v_delta_prime(potential: &Potential, pair: &PerturbationPair, r: f64) -> f64 {
    let v = potential.derivative(r);
    if pair.is_trivial() {
        v
    } else {
        v + pair.delta * pair.a(r)[1]
    }
}

/// `G_δ = K V_δ − K″/4 + 3K′²/(16K) + (N−1)(N−3)K/(4r²) − (log K)/2 + (N−1) log r`.
pub fn eval_g_delta(potential: &Potential, pair: &PerturbationPair, r: f64) -> Result<f64> {
    check_radius(r)?;
    if pair.is_trivial() {
        return eval_g(potential, r);
    }
    let n = potential.dim() as f64;
    let [k, k1, k2, _] = pair.k_delta(r);
    Ok(k * v_delta(potential, pair, r) - k2 / 4.0 + 3.0 * k1 * k1 / (16.0 * k)
        + (n - 1.0) * (n - 3.0) * k / (4.0 * r * r)
        - 0.5 * k.ln()
        + (n - 1.0) * r.ln())
}

/// Analytic `G_δ′`.
pub fn eval_g_delta_prime(potential: &Potential, pair: &PerturbationPair, r: f64) -> Result<f64> {
    check_radius(r)?;
    if pair.is_trivial() {
        return eval_g_prime(potential, r);
    }
    let n = potential.dim() as f64;
    let [k, k1, k2, k3] = pair.k_delta(r);
    let c = (n - 1.0) * (n - 3.0) / 4.0;
    Ok(k1 * v_delta(potential, pair, r) + k * v_delta_prime(potential, pair, r) - k3 / 4.0
        + 3.0 / 16.0 * (2.0 * k1 * k2 / k - k1 * k1 * k1 / (k * k))
        + c * (k1 / (r * r) - 2.0 * k / (r * r * r))
        - 0.5 * k1 / k
        + (n - 1.0) / r)
}

/// Geometric grid with `n` points from `r_min` to `r_max`.
pub fn geometric_grid(r_min: f64, r_max: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && r_min > 0.0 && r_max > r_min);
    let q = (r_max / r_min).ln() / (n - 1) as f64;
    (0..n).map(|i| r_min * (q * i as f64).exp()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict")]
pub enum V2Verdict {
    Pass,
    Fail { r: f64, reason: String },
}

impl V2Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, V2Verdict::Pass)
    }
}

const V2_MIN_POINTS: usize = 64;
const V2_NEAR_ORIGIN_MARGIN: f64 = 1e-8;
const V2_SIMPLE_ZERO_SLOPE: f64 = 1e-8;

/// Sampled check of the sign pattern of `G′`.
///
/// For `N ∈ {2, 3}`: `G′ > 0` at every sample, with the near-origin samples
/// (the first eighth of the grid) bounded below by a positive margin. For
/// `N ≥ 4`: `r³G′` negative at the first sample, exactly one sign change,
/// positive afterwards, and a secant slope above `1e−8` across the change.
pub fn check_v2(potential: &Potential, grid: &[f64]) -> Result<V2Verdict> {
    if grid.len() < V2_MIN_POINTS {
        return Err(Error::InvalidInput(format!(
            "grid too coarse: {} points, need at least {V2_MIN_POINTS}",
            grid.len()
        )));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid[0] <= 0.0 {
        return Err(Error::InvalidInput(
            "grid must be positive and strictly increasing".into(),
        ));
    }
    let n = potential.dim();
    let gp: Vec<f64> = grid
        .iter()
        .map(|&r| eval_g_prime(potential, r))
        .collect::<Result<_>>()?;
    if n <= 3 {
        if let Some(i) = gp.iter().position(|&g| !(g > 0.0)) {
            return Ok(V2Verdict::Fail {
                r: grid[i],
                reason: format!("G'({}) = {:e} is not positive", grid[i], gp[i]),
            });
        }
        let near = (grid.len() / 8).max(1);
        if let Some(i) = gp[..near].iter().position(|&g| g < V2_NEAR_ORIGIN_MARGIN) {
            return Ok(V2Verdict::Fail {
                r: grid[i],
                reason: "G' not bounded away from zero near the origin".into(),
            });
        }
        return Ok(V2Verdict::Pass);
    }
    let h: Vec<f64> = grid.iter().zip(&gp).map(|(r, g)| r * r * r * g).collect();
    if !(h[0] < 0.0) {
        return Ok(V2Verdict::Fail {
            r: grid[0],
            reason: "r^3 G' is not negative near the origin".into(),
        });
    }
    let mut crossing = None;
    for i in 0..h.len() - 1 {
        let neg_now = h[i] < 0.0;
        let neg_next = h[i + 1] < 0.0;
        if neg_now && !neg_next {
            if crossing.is_some() {
                return Ok(V2Verdict::Fail {
                    r: grid[i + 1],
                    reason: "r^3 G' changes sign more than once".into(),
                });
            }
            let slope = (h[i + 1] - h[i]) / (grid[i + 1] - grid[i]);
            if !(slope > V2_SIMPLE_ZERO_SLOPE) {
                return Ok(V2Verdict::Fail {
                    r: grid[i + 1],
                    reason: "zero of r^3 G' is not simple".into(),
                });
            }
            crossing = Some(i);
        } else if !neg_now && neg_next {
            return Ok(V2Verdict::Fail {
                r: grid[i + 1],
                reason: "r^3 G' returns to negative values".into(),
            });
        } else if !neg_now && h[i] == 0.0 {
            return Ok(V2Verdict::Fail {
                r: grid[i],
                reason: "r^3 G' vanishes on an interval".into(),
            });
        }
    }
    match crossing {
        Some(_) => Ok(V2Verdict::Pass),
        None => Ok(V2Verdict::Fail {
            r: grid[grid.len() - 1],
            reason: "r^3 G' has no zero on the grid".into(),
        }),
    }
}

/// Advisory, sampled reading of the growth and local integrability conditions
/// on `V`. Never blocking: the conditions are asymptotic.
#[derive(Debug, Clone, Serialize)]
pub struct V1Advisory {
    /// Minimum of `V(r)/log r` over `r ∈ [1e3, 1e6]`.
    pub liminf_ratio_estimate: f64,
    pub ratio_ok: bool,
    /// `∫_0^1 r^{N−1} |V|^{N+1} dr` by dyadic quadrature (`None` when it
    /// failed to produce a finite number).
    pub local_integral: Option<f64>,
    pub integrable: bool,
}

pub fn check_v1(potential: &Potential) -> V1Advisory {
    let n = potential.dim();
    let grid = geometric_grid(1e3, 1e6, 200);
    let liminf = grid
        .iter()
        .map(|&r| potential.value(r) / r.ln())
        .fold(f64::INFINITY, f64::min);
    let q = (n + 1) as i32;
    let rule = GaussLegendre::new(10);
    let local = integrate_to_origin(&rule, 1.0, 200, |r| {
        r.powi(n as i32 - 1) * potential.value(r).abs().powi(q)
    })
    .ok()
    .filter(|v| v.is_finite());
    V1Advisory {
        liminf_ratio_estimate: liminf,
        ratio_ok: liminf > 1.0 - n as f64,
        local_integral: local,
        integrable: local.is_some(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict")]
pub enum Admissibility {
    Pass,
    Fail { failed: Vec<String> },
}

impl Admissibility {
    pub fn passed(&self) -> bool {
        matches!(self, Admissibility::Pass)
    }
}

/// Admissibility of `(α, σ, N)` for the power-law family:
/// `−σα < 2 min{1, N−1+α}` and `−σα < 1`.
pub fn check_power_admissible(alpha: f64, sigma: f64, dim: usize) -> Result<Admissibility> {
    check_dim(dim)?;
    let n = dim as f64;
    if alpha <= 1.0 - n {
        return Err(Error::InvalidInput(format!(
            "alpha must exceed 1 - N = {}, got {alpha}",
            1.0 - n
        )));
    }
    let sigma_max = if dim > 2 {
        2.0 / (n - 2.0)
    } else {
        f64::INFINITY
    };
    if !(sigma > 0.0 && sigma < sigma_max) {
        return Err(Error::InvalidInput(format!(
            "sigma must lie in (0, {sigma_max}), got {sigma}"
        )));
    }
    let lhs = -sigma * alpha;
    let mut failed = Vec::new();
    if !(lhs < 2.0 * (1.0_f64).min(n - 1.0 + alpha)) {
        failed.push(format!(
            "decay condition: -sigma*alpha = {lhs} >= 2 min(1, N-1+alpha) = {}",
            2.0 * (1.0_f64).min(n - 1.0 + alpha)
        ));
    }
    if !(lhs < 1.0) {
        failed.push(format!("regularity condition: -sigma*alpha = {lhs} >= 1"));
    }
    Ok(if failed.is_empty() {
        Admissibility::Pass
    } else {
        Admissibility::Fail { failed }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn zero(n: usize) -> Potential {
        Potential::constant(n, 0.0).unwrap()
    }

    #[test]
    fn g_examples() {
        let g = eval_g(&zero(3), 2.0).unwrap();
        assert!((g - 2.0 * 2.0_f64.ln()).abs() < 1e-15);
        assert!((eval_g(&zero(2), 1.0).unwrap() + 0.25).abs() < 1e-15);
        let p = Potential::inverted_harmonic(3, 3.0 / 16.0).unwrap();
        let g = eval_g(&p, 4.0).unwrap();
        assert!((g - (-3.0 + 2.0 * 4.0_f64.ln())).abs() < 1e-14);
        assert!((g + 0.227411).abs() < 1e-6);
        assert!(matches!(eval_g(&p, 0.0), Err(Error::Domain(_))));
        assert!(matches!(eval_g(&p, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(Potential::log(3, -2.0).is_err());
        assert!(Potential::log(3, -1.9).is_ok());
        assert!(Potential::constant(1, 0.0).is_err());
        assert!(Potential::inverted_harmonic(3, -0.1).is_err());
        assert!(PerturbationPair::new(-0.1, 0.0, 1.0, 2.0).is_err());
        assert!(PerturbationPair::new(0.1, 0.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let pots = [
            Potential::log_power(3, 1.0, 0.5, 1.5, -0.3).unwrap(),
            Potential::log_power(2, -0.5, 2.0, 2.0, 1.0).unwrap(),
            Potential::inverted_harmonic(3, 0.2).unwrap(),
        ];
        for p in &pots {
            for r in [0.3, 1.0, 2.7, 6.0] {
                let h = 1e-4 * r;
                let fd1 = (p.value(r + h) - p.value(r - h)) / (2.0 * h);
                let fd2 = (p.derivative(r + h) - p.derivative(r - h)) / (2.0 * h);
                assert!((fd1 - p.derivative(r)).abs() <= 1e-6 * p.derivative(r).abs().max(1.0));
                assert!(
                    (fd2 - p.second_derivative(r)).abs()
                        <= 1e-6 * p.second_derivative(r).abs().max(1.0)
                );
            }
        }
    }

    #[test]
    fn table_potential_interpolates() {
        let r: Vec<f64> = (1..=200).map(|i| i as f64 * 0.05).collect();
        let v: Vec<f64> = r.iter().map(|x| x.ln()).collect();
        let p = Potential::table(3, r, v).unwrap();
        assert!((p.value(1.234) - 1.234_f64.ln()).abs() < 1e-5);
        assert!((p.derivative(2.5) - 0.4).abs() < 1e-3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        std::fs::write(&path, "r,V\n0.5,1.0\n1.0,2.0\n2.0,3.0\n").unwrap();
        let q = Potential::table_from_csv(2, &path).unwrap();
        assert!((q.value(1.0) - 2.0).abs() < 1e-14);
        std::fs::write(&path, "0.5,1.0\n0.4,2.0\n").unwrap();
        assert!(Potential::table_from_csv(2, &path).is_err());
    }

    #[test]
    fn g_delta_reduces_to_g_without_perturbation() {
        let p = Potential::log(3, 1.0).unwrap();
        let pair = PerturbationPair::none();
        for r in [0.01, 0.5, 3.0, 10.0] {
            assert_eq!(eval_g_delta(&p, &pair, r).unwrap(), eval_g(&p, r).unwrap());
            assert_eq!(
                eval_g_delta_prime(&p, &pair, r).unwrap(),
                eval_g_prime(&p, r).unwrap()
            );
        }
    }

    #[test]
    fn g_delta_on_plateau() {
        let p = Potential::log(3, 1.0).unwrap();
        let pair = PerturbationPair::new(0.1, 0.0, 1.0, 2.0).unwrap();
        let r = 0.6;
        let k = 1.0 / 1.1;
        let n = 3.0;
        let expect = k * p.value(r) - 0.5 * k.ln()
            + (n - 1.0) * (n - 3.0) * k / (4.0 * r * r)
            + (n - 1.0) * r.ln();
        assert!((eval_g_delta(&p, &pair, r).unwrap() - expect).abs() < 1e-14);
    }

    /// Oracle: rebuild the `G_δ` formula from finite differences of the raw
    /// closure `K = 1/(1 + δ b)`, independent of the analytic `K′`, `K″`.
    #[test]
    fn g_delta_transition_band_matches_fd_reconstruction() {
        let p = Potential::log_power(3, 1.0, 0.3, 2.0, 0.0).unwrap();
        let pair = PerturbationPair::new(0.1, 0.7, 1.0, 2.0).unwrap();
        let kf = |r: f64| 1.0 / (1.0 + pair.delta * pair.b(r)[0]);
        let n = 3.0;
        for r in [1.2, 1.5, 1.8] {
            let h = 1e-3;
            let k = kf(r);
            let k1 = (kf(r - 2.0 * h) - 8.0 * kf(r - h) + 8.0 * kf(r + h) - kf(r + 2.0 * h))
                / (12.0 * h);
            let k2 = (-kf(r - 2.0 * h) + 16.0 * kf(r - h) - 30.0 * k + 16.0 * kf(r + h)
                - kf(r + 2.0 * h))
                / (12.0 * h * h);
            let vd = p.value(r) + pair.delta * pair.a_amp * pair.b(r)[0];
            let oracle = k * vd - k2 / 4.0 + 3.0 * k1 * k1 / (16.0 * k)
                + (n - 1.0) * (n - 3.0) * k / (4.0 * r * r)
                - 0.5 * k.ln()
                + (n - 1.0) * r.ln();
            let got = eval_g_delta(&p, &pair, r).unwrap();
            assert!((got - oracle).abs() < 1e-6, "r={r}: {got} vs {oracle}");
            let gfd = |x: f64| eval_g_delta(&p, &pair, x).unwrap();
            let dfd = (gfd(r - 2.0 * h) - 8.0 * gfd(r - h) + 8.0 * gfd(r + h) - gfd(r + 2.0 * h))
                / (12.0 * h);
            let dan = eval_g_delta_prime(&p, &pair, r).unwrap();
            assert!((dfd - dan).abs() < 1e-6, "r={r}: {dfd} vs {dan}");
        }
    }

    #[test]
    fn pair_invariants() {
        let pair = PerturbationPair::new(0.3, 1.0, 0.5, 1.5).unwrap();
        for i in 0..=200 {
            let r = i as f64 * 0.01;
            let b = pair.b(r)[0];
            assert!((0.0..=1.0).contains(&b));
            assert!(pair.b_delta(r) >= 1.0);
            let k = pair.k_delta(r)[0];
            assert!(k > 0.0 && k <= 1.0);
            if r <= 0.5 {
                assert_eq!(b, 1.0);
            }
            if r >= 1.5 {
                assert_eq!(b, 0.0);
                assert_eq!(pair.a(r)[0], 0.0);
            }
        }
    }

    #[test]
    fn v2_examples() {
        let grid = geometric_grid(1e-3, 1e3, 400);
        assert!(check_v2(&Potential::log(3, 1.0).unwrap(), &grid).unwrap().passed());
        assert!(check_v2(&zero(3), &grid).unwrap().passed());
        match check_v2(&Potential::inverted_harmonic(3, 3.0 / 16.0).unwrap(), &grid).unwrap() {
            V2Verdict::Fail { r, .. } => assert!(r > 4.0 / 3.0_f64.sqrt()),
            V2Verdict::Pass => panic!("inverted harmonic must fail"),
        }
        assert!(check_v2(&Potential::log(3, -1.5).unwrap(), &grid).unwrap().passed());
        let coarse = geometric_grid(1e-3, 1e3, 63);
        assert!(check_v2(&zero(3), &coarse).is_err());
    }

    #[test]
    fn v2_high_dimension_single_crossing() {
        let grid = geometric_grid(1e-3, 1e3, 400);
        assert!(check_v2(&zero(5), &grid).unwrap().passed());
        assert!(check_v2(&zero(4), &grid).unwrap().passed());
        let p = Potential::inverted_harmonic(5, 0.2).unwrap();
        assert!(!check_v2(&p, &grid).unwrap().passed());
    }

    #[test]
    fn g_prime_fd_agrees_with_analytic() {
        let p = Potential::log_power(4, 0.7, 1.0, 1.3, 0.0).unwrap();
        for r in [0.05, 0.4, 2.0, 30.0] {
            let a = eval_g_prime(&p, r).unwrap();
            let f = eval_g_prime_fd(&p, r).unwrap();
            assert!((a - f).abs() <= 1e-6 * a.abs().max(1.0), "r={r} {a} {f}");
        }
    }

    #[test]
    fn v1_advisory() {
        let adv = check_v1(&Potential::log(3, -1.5).unwrap());
        assert!(adv.ratio_ok && adv.integrable);
        assert!((adv.liminf_ratio_estimate + 1.5).abs() < 1e-12);
        let adv = check_v1(&Potential::inverted_harmonic(3, 0.1).unwrap());
        assert!(!adv.ratio_ok);
    }

    #[test]
    fn power_admissibility_examples() {
        assert!(check_power_admissible(-1.0, 0.5, 3).unwrap().passed());
        match check_power_admissible(-1.9, 0.3, 3).unwrap() {
            Admissibility::Fail { failed } => {
                assert_eq!(failed.len(), 1);
                assert!(failed[0].starts_with("decay"));
            }
            Admissibility::Pass => panic!(),
        }
        assert!(check_power_admissible(2.0, 1.0, 3).unwrap().passed());
        assert!(check_power_admissible(-2.0, 0.5, 3).is_err());
        assert!(check_power_admissible(0.0, 2.0, 3).is_err());
        assert!(check_power_admissible(0.0, 1.0, 1).is_err());
    }

    proptest! {
        /// Closed form for the pure log family:
        /// G′ = α₁/r − (N−1)(N−3)/(2r³) + (N−1)/r, always admissible.
        #[test]
        fn v2_matches_closed_form_on_log_family(
            n in 2usize..7,
            a in 0.01f64..5.0,
        ) {
            let alpha1 = 1.0 - n as f64 + a;
            let p = Potential::log(n, alpha1).unwrap();
            let nf = n as f64;
            for r in [0.01, 0.3, 1.0, 5.0] {
                let closed = alpha1 / r - (nf - 1.0) * (nf - 3.0) / (2.0 * r.powi(3)) + (nf - 1.0) / r;
                prop_assert!((eval_g_prime(&p, r).unwrap() - closed).abs() <= 1e-12 * closed.abs().max(1.0));
            }
            let grid = geometric_grid(1e-3, 1e3, 256);
            let fine = geometric_grid(1e-3, 1e3, 512);
            prop_assert!(check_v2(&p, &grid).unwrap().passed());
            prop_assert!(check_v2(&p, &fine).unwrap().passed());
        }

        #[test]
        fn v2_refinement_never_flips_inverted_harmonic(mu in 0.01f64..0.24) {
            let p = Potential::inverted_harmonic(3, mu).unwrap();
            let coarse = check_v2(&p, &geometric_grid(1e-3, 1e3, 128)).unwrap();
            let fine = check_v2(&p, &geometric_grid(1e-3, 1e3, 256)).unwrap();
            prop_assert_eq!(coarse.passed(), fine.passed());
            prop_assert!(!fine.passed());
        }
    }
}
