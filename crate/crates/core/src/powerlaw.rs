//! The power family `−Δu + r^{ασ}u = |u|^{2σ}u` and its limit σ → 0⁺.
//!
//! With `v_σ(x) = σ^{α/(4+2ασ)} u_σ(σ^{−1/(2+ασ)} x)` the equation becomes
//! `−Δv + σ⁻¹(r^{ασ} − 1)v = σ⁻¹(|v|^{2σ} − 1)v`, whose formal limit is
//! `−Δv + α log r · v = v log v²`.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::{check_power_admissible, Admissibility, PerturbationPair, Potential};
use crate::profile::{RadialFunction, SampledProfile};
use crate::radial_ivp::{Classification, IvpConfig, LogProblem, RadialProblem};
use crate::shooting::{find_ground, scan_beta, shoot, DecayingSolution};
use crate::variational::RadialProfile;

pub const BETA_RANGE: (f64, f64) = (1e-3, 1e3);
const SCAN_SAMPLES: usize = 32;
const BISECTION_TOL: f64 = 1e-12;
/// Radius of the comparison window for the limit study.
pub const COMPARISON_RADIUS: f64 = 8.0;
const COMPARISON_POINTS: usize = 801;
/// Lower end of the radial bound supremum.
const BOUND_START: f64 = 0.1;

/// `u'' + (N−1)/r u' − r^{ασ}u + |u|^{2σ}u = 0`.
#[derive(Debug, Clone, Copy)]
pub struct PowerProblem {
    pub dim: usize,
    pub alpha: f64,
    pub sigma: f64,
}

impl RadialProblem for PowerProblem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn potential(&self, r: f64) -> f64 {
        r.powf(self.alpha * self.sigma)
    }

    fn nonlinearity(&self, _r: f64, u: f64) -> f64 {
        u.abs().powf(2.0 * self.sigma) * u
    }

    fn reaction(&self, _r: f64, phi: f64) -> f64 {
        (2.0 * self.sigma * phi).exp()
    }

    fn reaction_derivative(&self, _r: f64, phi: f64) -> f64 {
        2.0 * self.sigma * (2.0 * self.sigma * phi).exp()
    }
}

/// A solved member of the power family.
#[derive(Debug, Clone)]
pub struct PowerRun {
    pub alpha: f64,
    pub sigma: f64,
    pub dim: usize,
    pub admissibility: Admissibility,
    pub solution: DecayingSolution,
}

impl PowerRun {
    pub fn beta(&self) -> f64 {
        self.solution.beta
    }

    /// `σ^{α/(4+2ασ)}`.
    pub fn amplitude_scale(&self) -> f64 {
        self.sigma.powf(self.alpha / (4.0 + 2.0 * self.alpha * self.sigma))
    }

    /// `σ^{−1/(2+ασ)}`.
    pub fn radius_scale(&self) -> f64 {
        self.sigma.powf(-1.0 / (2.0 + self.alpha * self.sigma))
    }

    /// `v_σ`, evaluated through the dense output of `u_σ`.
    pub fn rescaled(&self) -> Rescaled<'_, DecayingSolution> {
        Rescaled {
            inner: &self.solution,
            amplitude: self.amplitude_scale(),
            radius: self.radius_scale(),
        }
    }

    /// `σ^{α/4} u_σ(σ^{−1/2} ·)`.
    pub fn naive_rescaled(&self) -> Rescaled<'_, DecayingSolution> {
        Rescaled {
            inner: &self.solution,
            amplitude: self.sigma.powf(0.25 * self.alpha),
            radius: self.sigma.powf(-0.5),
        }
    }

    pub fn summary(&self) -> PowerSummary {
        PowerSummary {
            alpha: self.alpha,
            sigma: self.sigma,
            dim: self.dim,
            beta_star: self.beta(),
            bracket: self.solution.bracket,
            r_match: self.solution.r_match,
            match_residual: self.solution.match_residual,
            admissibility: self.admissibility.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerSummary {
    pub alpha: f64,
    pub sigma: f64,
    pub dim: usize,
    pub beta_star: f64,
    pub bracket: (f64, f64),
    pub r_match: f64,
    pub match_residual: f64,
    pub admissibility: Admissibility,
}

/// `a · u(s x)`.
pub struct Rescaled<'a, F: ?Sized> {
    pub inner: &'a F,
    pub amplitude: f64,
    pub radius: f64,
}

impl<F: RadialFunction + ?Sized> RadialFunction for Rescaled<'_, F> {
    fn value(&self, x: f64) -> f64 {
        self.amplitude * self.inner.value(self.radius * x)
    }

    fn derivative(&self, x: f64) -> f64 {
        self.amplitude * self.radius * self.inner.derivative(self.radius * x)
    }

    fn r_end(&self) -> f64 {
        self.inner.r_end() / self.radius
    }

    fn log_value(&self, x: f64) -> f64 {
        self.amplitude.ln() + self.inner.log_value(self.radius * x)
    }

    fn log_derivative(&self, x: f64) -> f64 {
        self.radius * self.inner.log_derivative(self.radius * x)
    }
}

/// Outer radius that keeps `v_σ` defined past the comparison window.
pub fn power_r_max(alpha: f64, sigma: f64) -> f64 {
    (1.25 * COMPARISON_RADIUS * sigma.powf(-1.0 / (2.0 + alpha * sigma))).max(40.0)
}

/// Ground state of the power problem by scanning `β ∈ [10⁻³, 10³]` and
/// bisecting the first Grows → CrossesZero change.
pub fn solve_power(alpha: f64, sigma: f64, dim: usize, config: &IvpConfig) -> Result<PowerRun> {
    if dim < 2 {
        return Err(Error::InvalidInput(format!("dimension must be at least 2, got {dim}")));
    }
    let admissibility = check_power_admissible(alpha, sigma, dim)?;
    if let Admissibility::Fail { failed } = &admissibility {
        return Err(Error::Precondition(format!(
            "(alpha, sigma, N) = ({alpha}, {sigma}, {dim}) not admissible: {}",
            failed.join("; ")
        )));
    }
    let problem = PowerProblem { dim, alpha, sigma };
    let scan = scan_beta(&problem, BETA_RANGE.0, BETA_RANGE.1, SCAN_SAMPLES, config)?;
    let bracket = scan
        .samples
        .windows(2)
        .find(|w| {
            matches!(w[0].classification, Classification::Grows(_))
                && matches!(w[1].classification, Classification::CrossesZero(_))
        })
        .map(|w| (w[0].beta, w[1].beta))
        .ok_or_else(|| {
            Error::NoBracket(format!(
                "no Grows/CrossesZero change for beta in [{}, {}]",
                BETA_RANGE.0, BETA_RANGE.1
            ))
        })?;
    let solution = find_ground(&problem, bracket, BISECTION_TOL, config)?;
    Ok(PowerRun {
        alpha,
        sigma,
        dim,
        admissibility,
        solution,
    })
}

/// Least-squares fit `log u ≈ a − c r^p` on `[r_lo, r_hi]`.
#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub rate: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    pub window: (f64, f64),
}

pub fn decay_fit<F: RadialFunction + ?Sized>(u: &F, exponent: f64, r_lo: f64, r_hi: f64) -> DecayFit {
    let n = 200;
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let r = r_lo + (r_hi - r_lo) * i as f64 / (n - 1) as f64;
            (r.powf(exponent), u.log_value(r))
        })
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    DecayFit {
        exponent,
        rate: -slope,
        intercept,
        residual,
        window: (r_lo, r_hi),
    }
}

/// Fit of the tail against `r^{(ασ+2)/2}` on `[0.4, 0.8]·r_max`.
pub fn decay_bound_check(run: &PowerRun) -> DecayFit {
    let r_end = run.solution.r_end();
    decay_fit(
        &run.solution,
        0.5 * (run.alpha * run.sigma + 2.0),
        0.4 * r_end,
        0.8 * r_end,
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct RadialBound {
    /// `sup_{r ≥ 0.1} |u| r^{(N−1)/2+ασ/4} / ‖u‖_σ`.
    pub constant: f64,
    pub r_at_sup: f64,
    pub norm: f64,
}

/// `‖u‖_σ² = ∫ |∇u|² + r^{ασ} u²`.
pub fn sigma_norm<F: RadialFunction + ?Sized>(u: &F, dim: usize, alpha: f64, sigma: f64) -> Result<f64> {
    let profile = RadialProfile::from_function(u, dim, u.r_end(), 400)?;
    let p = alpha * sigma;
    Ok(profile
        .integrate(|r, u, du| du * du + r.powf(p) * u * u)
        .sqrt())
}

pub fn radial_bound<F: RadialFunction + ?Sized>(u: &F, dim: usize, alpha: f64, sigma: f64) -> Result<RadialBound> {
    let norm = sigma_norm(u, dim, alpha, sigma)?;
    let power = 0.5 * (dim as f64 - 1.0) + 0.25 * alpha * sigma;
    let r_end = u.r_end();
    let n = 4000;
    let (mut constant, mut r_at_sup) = (0.0_f64, BOUND_START);
    for i in 0..n {
        let r = BOUND_START + (r_end - BOUND_START) * i as f64 / (n - 1) as f64;
        let c = (u.log_value(r) + power * r.ln()).exp() / norm;
        if c > constant {
            constant = c;
            r_at_sup = r;
        }
    }
    if !constant.is_finite() {
        return Err(Error::NonFinite {
            r: r_at_sup,
            detail: "radial bound constant".into(),
        });
    }
    Ok(RadialBound {
        constant,
        r_at_sup,
        norm,
    })
}

pub fn radial_bound_check(run: &PowerRun) -> Result<RadialBound> {
    radial_bound(&run.solution, run.dim, run.alpha, run.sigma)
}

/// `σ⁻¹(s^{tσ} − 1) − t log s`, non-negative for all `t`, `s > 0`, `σ > 0`.
pub fn log_power_gap(t: f64, s: f64, sigma: f64) -> f64 {
    let x = t * s.ln();
    (sigma * x).exp_m1() / sigma - x
}

/// Residuals of `v_σ` in the two equivalent scaled forms, on `x` with
/// `v''` by central differences of the dense `v'`.
#[derive(Debug, Clone, Serialize)]
pub struct FormResiduals {
    pub plain: f64,
    pub shifted: f64,
    pub max_difference: f64,
    /// Largest `σ⁻¹ r^{ασ} v` on the grid, the natural scale of both.
    pub scale: f64,
}

pub fn form_residuals(run: &PowerRun, grid: &[f64]) -> FormResiduals {
    let v = run.rescaled();
    let (s, p) = (run.sigma, run.alpha * run.sigma);
    let n1 = run.dim as f64 - 1.0;
    let mut out = FormResiduals {
        plain: 0.0,
        shifted: 0.0,
        max_difference: 0.0,
        scale: 0.0,
    };
    for &x in grid {
        let h = 1e-4 * x.max(1e-2);
        let lap = (v.derivative(x + h) - v.derivative(x - h)) / (2.0 * h) + n1 / x * v.derivative(x);
        let val = v.value(x);
        let plain = -lap + x.powf(p) * val / s - val.abs().powf(2.0 * s) * val / s;
        let shifted = -lap + (p * x.ln()).exp_m1() / s * val - (2.0 * s * val.abs().ln()).exp_m1() / s * val;
        out.plain = out.plain.max(plain.abs());
        out.shifted = out.shifted.max(shifted.abs());
        out.max_difference = out.max_difference.max((plain - shifted).abs());
        out.scale = out.scale.max(x.powf(p) * val.abs() / s);
    }
    out
}

/// Reference solutions of the limit equation, cached as profile CSV files.
#[derive(Debug, Clone)]
pub struct ReferenceCache {
    dir: Option<PathBuf>,
}

impl ReferenceCache {
    pub fn new(dir: Option<&Path>) -> Self {
        Self {
            dir: dir.map(Path::to_path_buf),
        }
    }

    fn key(dim: usize, alpha: f64, config: &IvpConfig) -> String {
        format!(
            "reference_N{dim}_alpha{alpha:e}_rtol{:e}_atol{:e}_eps{:e}_rmax{:e}.csv",
            config.rel_tol, config.abs_tol, config.epsilon0, config.r_max
        )
    }

    /// Loads the reference for `(N, α)` or computes and stores it.
    pub fn reference(&self, dim: usize, alpha: f64, config: &IvpConfig) -> Result<SampledProfile> {
        let path = self.dir.as_ref().map(|d| d.join(Self::key(dim, alpha, config)));
        if let Some(p) = &path {
            if p.exists() {
                return SampledProfile::read_csv(p);
            }
        }
        let profile = compute_reference(dim, alpha, config)?;
        if let Some(p) = &path {
            std::fs::create_dir_all(p.parent().expect("cache file has a parent"))?;
            profile.write_csv_atomic(p)?;
        }
        Ok(profile)
    }
}

/// Samples of the positive solution of `−Δv + α log r · v = v log v²` on
/// `[0, 1.25·R_cmp]`.
fn compute_reference(dim: usize, alpha: f64, config: &IvpConfig) -> Result<SampledProfile> {
    let potential = if alpha == 0.0 {
        Potential::constant(dim, 0.0)?
    } else {
        Potential::log(dim, alpha)?
    };
    let problem = LogProblem::new(potential, PerturbationPair::none());
    let result = shoot(&problem, 0.5, 50.0, 64, BISECTION_TOL, config)?;
    if result.solutions.len() != 1 {
        return Err(Error::NoBracket(format!(
            "expected one positive solution of the limit equation, found {}",
            result.solutions.len()
        )));
    }
    let u = &result.solutions[0];
    let end = 1.25 * COMPARISON_RADIUS;
    let n = 2001;
    let radii: Vec<f64> = (0..n).map(|i| end * i as f64 / (n - 1) as f64).collect();
    SampledProfile::from_function(u, &radii)
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitRow {
    pub sigma: f64,
    pub beta_star: f64,
    /// `sup_{[0, 8]} |v_σ − v|`.
    pub sup_error: f64,
    pub tail_rate: f64,
    /// `sup_{[0, 8]} |σ^{α/4}u_σ(σ^{−1/2}·) − v_σ|`.
    pub scaling_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitStudy {
    pub alpha: f64,
    pub dim: usize,
    pub rows: Vec<LimitRow>,
    pub decreasing: bool,
}

impl LimitStudy {
    pub fn write_csv(&self, out: &mut dyn Write) -> Result<()> {
        writeln!(out, "sigma,sup_error,tail_rate,beta_star,scaling_gap")?;
        for r in &self.rows {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.sigma, r.sup_error, r.tail_rate, r.beta_star, r.scaling_gap
            )?;
        }
        Ok(())
    }
}

fn sup_distance<F, G>(a: &F, b: &G) -> f64
where
    F: RadialFunction + ?Sized,
    G: RadialFunction + ?Sized,
{
    (0..COMPARISON_POINTS)
        .map(|i| COMPARISON_RADIUS * i as f64 / (COMPARISON_POINTS - 1) as f64)
        .fold(0.0, |m, x| m.max((a.value(x) - b.value(x)).abs()))
}

/// Distance of `v_σ` to the logarithmic reference along a decreasing list
/// of `σ`. A table that fails to decrease is flagged, not rejected.
pub fn limit_study(
    alpha: f64,
    sigmas: &[f64],
    dim: usize,
    config: &IvpConfig,
    cache: &ReferenceCache,
) -> Result<LimitStudy> {
    if sigmas.is_empty() || sigmas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidInput("sigma list must be non-empty and strictly decreasing".into()));
    }
    for &s in sigmas {
        if let Admissibility::Fail { failed } = check_power_admissible(alpha, s, dim)? {
            return Err(Error::Precondition(format!("sigma = {s}: {}", failed.join("; "))));
        }
    }
    let reference_config = IvpConfig {
        r_max: config.r_max.max(40.0),
        ..*config
    };
    let reference = cache.reference(dim, alpha, &reference_config)?;
    let rows: Vec<LimitRow> = sigmas
        .par_iter()
        .map(|&sigma| {
            let cfg = IvpConfig {
                r_max: power_r_max(alpha, sigma),
                ..*config
            };
            let run = solve_power(alpha, sigma, dim, &cfg)?;
            Ok(LimitRow {
                sigma,
                beta_star: run.beta(),
                sup_error: sup_distance(&run.rescaled(), &reference),
                tail_rate: decay_bound_check(&run).rate,
                scaling_gap: sup_distance(&run.naive_rescaled(), &run.rescaled()),
            })
        })
        .collect::<Result<_>>()?;
    let decreasing = rows.windows(2).all(|w| w[1].sup_error < w[0].sup_error);
    if !decreasing {
        log::warn!("limit table for alpha = {alpha} is not strictly decreasing");
    }
    Ok(LimitStudy {
        alpha,
        dim,
        rows,
        decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::FnProfile;

    /// Fixed-step RK4 shooting for `u'' + 2u'/r − u + u³ = 0` from a
    /// Taylor start, bisected on the sign of `u` versus growth.
    fn cubic_oracle() -> f64 {
        fn f(r: f64, y: [f64; 2]) -> [f64; 2] {
            [y[1], -2.0 / r * y[1] + y[0] - y[0].powi(3)]
        }
        let decays_through_zero = |beta: f64| -> bool {
            let h = 1e-3;
            let r0 = 1e-3;
            let c = (beta - beta.powi(3)) / 6.0;
            let mut y = [beta + c * r0 * r0, 2.0 * c * r0];
            let mut r = r0;
            while r < 30.0 {
                let k1 = f(r, y);
                let k2 = f(r + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
                let k3 = f(r + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
                let k4 = f(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
                for j in 0..2 {
                    y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
                }
                r += h;
                if y[0] < 0.0 {
                    return true;
                }
                if y[1] > 0.0 {
                    return false;
                }
            }
            false
        };
        let (mut lo, mut hi) = (2.0, 6.0);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if decays_through_zero(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn cubic_ground_state_matches_oracle() {
        let oracle = cubic_oracle();
        let run = solve_power(0.0, 1.0, 3, &IvpConfig { r_max: 40.0, ..Default::default() }).unwrap();
        assert!((run.beta() - oracle).abs() < 1e-6 * oracle, "{} vs {oracle}", run.beta());
        let fit = decay_bound_check(&run);
        assert_eq!(fit.exponent, 1.0);
        assert!((fit.rate - 1.0).abs() < 0.1, "{fit:?}");
        let bound = radial_bound_check(&run).unwrap();
        assert!(bound.constant.is_finite() && bound.constant > 0.0);
    }

    #[test]
    fn rejects_one_dimension_and_inadmissible_parameters() {
        let cfg = IvpConfig::default();
        assert!(matches!(solve_power(0.0, 1.0, 1, &cfg), Err(Error::InvalidInput(_))));
        assert!(matches!(solve_power(-1.9, 0.3, 3, &cfg), Err(Error::Precondition(_))));
    }

    #[test]
    fn harmonic_trap_solution() {
        let run = solve_power(2.0, 0.5, 3, &IvpConfig { r_max: 40.0, ..Default::default() }).unwrap();
        let u = &run.solution;
        assert!(u.core().eval(0.0).1.abs() < 1e-5);
        assert!(run.solution.seam_ok());
        // ODE residual with u'' by central differences of the dense u'
        for i in 1..80 {
            let r = 0.1 * i as f64;
            let h = 1e-4;
            let d2 = (u.derivative(r + h) - u.derivative(r - h)) / (2.0 * h);
            let res = d2 + 2.0 / r * u.derivative(r) - r * u.value(r) + u.value(r).powi(2);
            assert!(res.abs() < 1e-6, "r = {r}: {res:e}");
        }
        let fit = decay_bound_check(&run);
        assert!(fit.rate > 0.0);
    }

    #[test]
    fn fit_recovers_gaussian_rate() {
        let g = FnProfile {
            f: |r: f64| (0.7 - 0.3 * r * r).exp(),
            df: |r: f64| -0.6 * r * (0.7 - 0.3 * r * r).exp(),
            r_end: 20.0,
        };
        let fit = decay_fit(&g, 2.0, 5.0, 15.0);
        assert!((fit.rate - 0.3).abs() < 1e-3);
        assert!(fit.residual < 1e-9);
    }

    #[test]
    fn radial_bound_is_scale_invariant() {
        let g = crate::profile::gausson(3, 12.0);
        let g2 = crate::profile::Scaled { inner: &g, factor: 2.0 };
        let a = radial_bound(&g, 3, 0.0, 1.0).unwrap();
        let b = radial_bound(&g2, 3, 0.0, 1.0).unwrap();
        assert!((a.constant - b.constant).abs() < 1e-12 * a.constant);
    }

    #[test]
    fn repulsive_power_has_finite_bound() {
        let run = solve_power(-1.0, 0.5, 3, &IvpConfig { r_max: 40.0, ..Default::default() }).unwrap();
        let b = radial_bound_check(&run).unwrap();
        assert!(b.constant.is_finite() && b.constant > 0.0);
    }

    #[test]
    fn log_power_inequality_on_grid() {
        let axis = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / 9.0;
        for i in 0..10 {
            for j in 0..10 {
                for k in 0..10 {
                    let (t, s, sigma) = (axis(0.1, 4.0, i), axis(0.1, 10.0, j), axis(0.01, 1.0, k));
                    assert!(log_power_gap(t, s, sigma) >= -1e-12);
                }
            }
        }
        assert!(log_power_gap(1.0, 4.0, 0.3) > 0.0);
    }

    #[test]
    fn scaled_forms_agree() {
        let run = solve_power(1.0, 0.25, 3, &IvpConfig { r_max: power_r_max(1.0, 0.25), ..Default::default() }).unwrap();
        let grid: Vec<f64> = (1..80).map(|i| 0.1 * i as f64).collect();
        let f = form_residuals(&run, &grid);
        assert!(f.max_difference <= 1e-8 * f.scale, "{f:?}");
        assert!(f.plain <= 1e-5 * f.scale, "{f:?}");
    }
}
