//! Shooting on the initial height `β`: scans, classification bisection,
//! decaying profiles with a reconstructed tail, and the large-`β` check.
//!
//! Roots come from two sources. Adjacent scan samples with opposite
//! classifications are bisected on the classification. Interior maxima of
//! the event radius along a run of equal classifications mark roots at which
//! the classification does not change sign (degenerate solutions are of this
//! kind); those are located on the matching defect between the forward
//! solution and the decaying tail family. Every root is validated by the
//! seam residual of its assembled profile.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::{integrate as ode_integrate, Control, OdeOptions, Trajectory};
use crate::profile::RadialFunction;
use crate::radial_ivp::{
    bessel_w, integrate_positive, integrate_problem, integrate_unclassified, Classification,
    IvpConfig, IvpSolution, LogProblem, RadialProblem,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanSample {
    pub beta: f64,
    pub classification: Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scan {
    pub samples: Vec<ScanSample>,
    /// Consecutive definite samples with opposite classifications, as
    /// `(β_lo, β_hi)`. Undetermined samples in between are skipped over.
    pub brackets: Vec<(f64, f64)>,
    /// Intervals `(β_{i−1}, β_{i+1})` around samples whose event radius is a
    /// strict local maximum within a run of equal classifications.
    pub candidates: Vec<(f64, f64)>,
}

impl Scan {
    /// Number of classification alternations over the scan.
    pub fn alternations(&self) -> usize {
        self.brackets.len()
    }
}

/// Classifies `n` geometrically spaced heights in `[β_lo, β_hi]`.
///
/// Samples run in parallel; the result is ordered by `β` and does not depend
/// on scheduling.
pub fn scan_beta<P: RadialProblem + ?Sized>(
    problem: &P,
    beta_lo: f64,
    beta_hi: f64,
    n: usize,
    config: &IvpConfig,
) -> Result<Scan> {
    if !(beta_lo > 0.0 && beta_hi > beta_lo) {
        return Err(Error::InvalidInput(format!(
            "need 0 < beta_lo < beta_hi, got [{beta_lo}, {beta_hi}]"
        )));
    }
    if n < 8 {
        return Err(Error::InvalidInput(format!("need at least 8 samples, got {n}")));
    }
    let q = (beta_hi / beta_lo).ln() / (n - 1) as f64;
    let betas: Vec<f64> = (0..n)
        .map(|i| {
            if i + 1 == n {
                beta_hi
            } else {
                beta_lo * (q * i as f64).exp()
            }
        })
        .collect();
    let samples: Vec<ScanSample> = betas
        .par_iter()
        .map(|&beta| {
            integrate_problem(problem, beta, config).map(|s| ScanSample {
                beta,
                classification: s.event,
            })
        })
        .collect::<Result<_>>()?;
    if samples
        .iter()
        .all(|s| matches!(s.classification, Classification::Undetermined(_)))
    {
        return Err(Error::NoBracket(
            "every sample is Undetermined; increase r_max or tighten tolerances".into(),
        ));
    }
    let definite: Vec<&ScanSample> = samples
        .iter()
        .filter(|s| !matches!(s.classification, Classification::Undetermined(_)))
        .collect();
    let brackets = definite
        .windows(2)
        .filter(|w| !w[0].classification.same_kind(&w[1].classification))
        .map(|w| (w[0].beta, w[1].beta))
        .collect();
    let candidates = samples
        .windows(3)
        .filter(|w| {
            let c = &w[1].classification;
            !matches!(c, Classification::Undetermined(_))
                && w[0].classification.same_kind(c)
                && w[2].classification.same_kind(c)
                && c.witness() > w[0].classification.witness()
                && c.witness() > w[2].classification.witness()
        })
        .map(|w| (w[0].beta, w[2].beta))
        .collect();
    Ok(Scan {
        samples,
        brackets,
        candidates,
    })
}

/// Maximum number of bisection steps before giving up.
pub const MAX_BISECTIONS: usize = 60;

/// Relative difference at which the two final bracket trajectories are
/// considered to have separated.
const SEPARATION: f64 = 1e-6;

/// A root is accepted when the seam residual satisfies
/// `|y_tail − u'/u| ≤ SEAM_TOLERANCE · (1 + |u'/u|)`.
pub const SEAM_TOLERANCE: f64 = 1e-3;

/// A decaying solution: the integrated core up to `r_match` followed by a
/// tail reconstructed backward from `r_max` in logarithmic variables.
#[derive(Debug, Clone)]
pub struct DecayingSolution {
    pub beta: f64,
    pub bracket: (f64, f64),
    pub bisections: usize,
    /// Radius where the core hands over to the reconstructed tail.
    pub r_match: f64,
    /// `y_tail(r_match) − u'/u(r_match)`, the log-slope mismatch at the seam.
    pub match_residual: f64,
    /// `sup |u|` over the reconstructed tail.
    pub tail_sup: f64,
    pub r_max: f64,
    pub source: RootSource,
    core: IvpSolution,
    tail: Option<Trajectory<2>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RootSource {
    /// Bisection on a change of classification.
    Bisection,
    /// Sign change of the matching defect inside a candidate interval.
    Matching,
    /// Double zero of the matching defect (no sign change).
    Tangent,
}

impl DecayingSolution {
    pub fn core(&self) -> &IvpSolution {
        &self.core
    }

    pub fn has_tail(&self) -> bool {
        self.tail.is_some()
    }

    /// Whether the seam residual is within [`SEAM_TOLERANCE`].
    pub fn seam_ok(&self) -> bool {
        let y = self.core.eval(self.r_match);
        let slope = if y.0 > 0.0 { y.1 / y.0 } else { 0.0 };
        self.match_residual.abs() <= SEAM_TOLERANCE * (1.0 + slope.abs())
    }

}

impl RadialFunction for DecayingSolution {
    fn value(&self, r: f64) -> f64 {
        match &self.tail {
            Some(t) if r > self.r_match => t.eval(r)[0].exp(),
            _ => self.core.eval(r).0,
        }
    }

    fn derivative(&self, r: f64) -> f64 {
        match &self.tail {
            Some(t) if r > self.r_match => {
                let y = t.eval(r);
                y[1] * y[0].exp()
            }
            _ => self.core.eval(r).1,
        }
    }

    fn r_end(&self) -> f64 {
        self.r_max
    }

    fn log_value(&self, r: f64) -> f64 {
        match &self.tail {
            Some(t) if r > self.r_match => t.eval(r)[0],
            _ => self.core.eval(r).0.ln(),
        }
    }

    fn log_derivative(&self, r: f64) -> f64 {
        match &self.tail {
            Some(t) if r > self.r_match => t.eval(r)[1],
            _ => {
                let (u, du) = self.core.eval(r);
                du / u
            }
        }
    }
}

/// Bisects the classification boundary inside `bracket` to relative width
/// `tol` and assembles the decaying profile.
pub fn find_ground<P: RadialProblem + ?Sized>(
    problem: &P,
    bracket: (f64, f64),
    tol: f64,
    config: &IvpConfig,
) -> Result<DecayingSolution> {
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidInput(format!("invalid bracket [{lo}, {hi}]")));
    }
    let mut sol_lo = integrate_problem(problem, lo, config)?;
    let mut sol_hi = integrate_problem(problem, hi, config)?;
    if sol_lo.event.same_kind(&sol_hi.event)
        || matches!(sol_lo.event, Classification::Undetermined(_))
        || matches!(sol_hi.event, Classification::Undetermined(_))
    {
        return Err(Error::NoBracket(format!(
            "endpoints classify as {} and {}",
            sol_lo.event.tag(),
            sol_hi.event.tag()
        )));
    }
    let mut iterations = 0;
    let mut exact = None;
    while hi - lo > tol * 0.5 * (lo + hi) {
        if iterations == MAX_BISECTIONS {
            return Err(Error::FlipFlop {
                lo,
                hi,
                iterations,
            });
        }
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let sol = integrate_problem(problem, mid, config)?;
        match sol.event {
            Classification::Undetermined(_) => {
                exact = Some(sol);
                break;
            }
            e if e.same_kind(&sol_lo.event) => {
                lo = mid;
                sol_lo = sol;
            }
            _ => {
                hi = mid;
                sol_hi = sol;
            }
        }
    }
    let beta = exact.as_ref().map_or(0.5 * (lo + hi), |s| s.beta);
    let core = match exact {
        Some(s) => s,
        None => integrate_problem(problem, beta, config)?,
    };
    let mut r_match = separation_radius(&core, &sol_lo, &sol_hi);
    // Step back to the last integrator node before the separation so the
    // seam sits on trusted data.
    r_match = core
        .nodes()
        .iter()
        .map(|n| n.0)
        .take_while(|&r| r < r_match)
        .last()
        .unwrap_or(r_match);
    assemble(
        problem,
        beta,
        (lo, hi),
        iterations,
        core,
        r_match,
        RootSource::Bisection,
        config,
    )
}

/// First radius at which the two bracket trajectories separate.
fn separation_radius(core: &IvpSolution, a: &IvpSolution, b: &IvpSolution) -> f64 {
    let limit = a.r_end().min(b.r_end()).min(core.r_end());
    for (r, u, _) in core.nodes() {
        if r >= limit {
            break;
        }
        let (ua, ub) = (a.eval(r).0, b.eval(r).0);
        if (ua - ub).abs() > SEPARATION * u.abs() {
            return r;
        }
    }
    limit
}

#[allow(clippy::too_many_arguments)]
fn assemble<P: RadialProblem + ?Sized>(
    problem: &P,
    beta: f64,
    bracket: (f64, f64),
    bisections: usize,
    core: IvpSolution,
    r_match: f64,
    source: RootSource,
    config: &IvpConfig,
) -> Result<DecayingSolution> {
    let r_max = config.r_max;
    let (um, dm) = core.eval(r_match);
    if r_match >= r_max * (1.0 - 1e-12) || !(um > 0.0) {
        return Ok(DecayingSolution {
            beta,
            bracket,
            bisections,
            r_match: r_max,
            match_residual: 0.0,
            tail_sup: 0.0,
            r_max,
            source,
            core,
            tail: None,
        });
    }
    let (tail, residual) = reconstruct_tail(problem, r_match, um.ln(), dm / um, r_max, config)?;
    let tail_sup = tail
        .nodes()
        .iter()
        .map(|(_, y)| y[0].exp())
        .fold(0.0, f64::max);
    Ok(DecayingSolution {
        beta,
        bracket,
        bisections,
        r_match,
        match_residual: residual,
        tail_sup,
        r_max,
        source,
        core,
        tail: Some(tail),
    })
}

/// Slope `y = φ'` of the decaying Riccati branch at `(r, φ)`.
///
/// Solves `y² + (N−1)y/r + y' = V − h(r, φ)` with `y'` taken from the
/// leading-order branch `−√(V − h) − (N−1)/(2r)`, which leaves an
/// `O(r⁻³)` error instead of `O(r⁻¹)`.
fn tail_slope<P: RadialProblem + ?Sized>(problem: &P, r: f64, phi: f64) -> f64 {
    let n1 = problem.dim() as f64 - 1.0;
    let q = problem.potential(r) - problem.reaction(r, phi);
    if q <= 0.0 {
        return -0.5 * n1 / r;
    }
    let d = 1e-5 * r;
    let q_at = |x: f64| problem.potential(x) - problem.reaction(x, phi);
    let q_r = (q_at(r + d) - q_at(r - d)) / (2.0 * d);
    let h_phi = problem.reaction_derivative(r, phi);
    let sq = q.sqrt();
    let mut y = -sq - 0.5 * n1 / r;
    for _ in 0..4 {
        let dy = -(q_r - h_phi * y) / (2.0 * sq) + 0.5 * n1 / (r * r);
        let disc = 0.25 * n1 * n1 / (r * r) + q - dy;
        if disc <= 0.0 {
            break;
        }
        y = -0.5 * n1 / r - disc.sqrt();
    }
    y
}

/// Decaying tail with `φ(r_max) = phi_r`, integrated backward to `r_m`.
/// `None` when the backward solve breaks down.
pub fn tail_from<P: RadialProblem + ?Sized>(
    problem: &P,
    phi_r: f64,
    r_m: f64,
    r_max: f64,
    config: &IvpConfig,
) -> Option<Trajectory<2>> {
    let n1 = problem.dim() as f64 - 1.0;
    let opts = OdeOptions {
        rel_tol: config.rel_tol,
        abs_tol: config.abs_tol,
        ..Default::default()
    };
    let y_r = tail_slope(problem, r_max, phi_r);
    let t = ode_integrate(
        |r, s: &[f64; 2]| {
            [
                s[1],
                -s[1] * s[1] - n1 / r * s[1] + problem.potential(r) - problem.reaction(r, s[0]),
            ]
        },
        r_max,
        [phi_r, y_r],
        r_m,
        &opts,
        |_| Control::Continue,
    )
    .ok()?;
    let end = t.eval(r_m);
    (end[0].is_finite() && end[1].is_finite()).then_some(t)
}

/// State `[φ, y, ∂φ/∂A, ∂y/∂A]` at `r_c` of the tail with amplitude
/// `A = φ(r_max)`, from the tail and its variational equation.
fn tail_with_tangent<P: RadialProblem + ?Sized>(
    problem: &P,
    amplitude: f64,
    r_c: f64,
    config: &IvpConfig,
) -> Option<[f64; 4]> {
    let r_max = config.r_max;
    let n1 = problem.dim() as f64 - 1.0;
    let opts = OdeOptions {
        rel_tol: config.rel_tol,
        abs_tol: config.abs_tol,
        ..Default::default()
    };
    let y_r = tail_slope(problem, r_max, amplitude);
    let da = 1e-6 * (1.0 + amplitude.abs());
    let dy_r = (tail_slope(problem, r_max, amplitude + da)
        - tail_slope(problem, r_max, amplitude - da))
        / (2.0 * da);
    let t = ode_integrate(
        |r, s: &[f64; 4]| {
            [
                s[1],
                -s[1] * s[1] - n1 / r * s[1] + problem.potential(r) - problem.reaction(r, s[0]),
                s[3],
                -(2.0 * s[1] + n1 / r) * s[3] - problem.reaction_derivative(r, s[0]) * s[2],
            ]
        },
        r_max,
        [amplitude, y_r, 1.0, dy_r],
        r_c,
        &opts,
        |_| Control::Continue,
    )
    .ok()?;
    let end = t.eval(r_c);
    end.iter().all(|v| v.is_finite()).then_some(end)
}

/// Backward solve of `φ' = y`, `y' = −y² − (N−1)/r·y + V − h(r, φ)` from
/// `r_max` to `r_m`, with `y(r_max)` on the decaying Riccati branch and
/// `φ(r_max)` chosen so that `φ(r_m) = φ_m`.
///
/// Returns the tail and the signed log-slope mismatch `y(r_m) − y_m`.
pub fn reconstruct_tail<P: RadialProblem + ?Sized>(
    problem: &P,
    r_m: f64,
    phi_m: f64,
    y_m: f64,
    r_max: f64,
    config: &IvpConfig,
) -> Result<(Trajectory<2>, f64)> {
    let solve = |phi_r: f64| -> Option<(f64, Trajectory<2>)> {
        let t = tail_from(problem, phi_r, r_m, r_max, config)?;
        let miss = t.eval(r_m)[0] - phi_m;
        miss.is_finite().then_some((miss, t))
    };
    // A failed backward solve means the amplitude was so large that the
    // tail ran into a pole of the Riccati flow: treat it as "too high".
    let lambda = (-y_m / (2.0 * r_m)).max(0.0);
    let guess = phi_m - lambda * (r_max * r_max - r_m * r_m);
    let mut best: Option<(f64, Trajectory<2>)> = None;
    let mut eval = |x: f64| -> Option<f64> {
        let (f, t) = solve(x)?;
        if best.as_ref().is_none_or(|(bf, _)| f.abs() < bf.abs()) {
            best = Some((f, t));
        }
        Some(f)
    };
    // lo: finite negative miss; hi: positive miss or blow-up.
    let mut lo: Option<(f64, f64)> = None;
    let mut hi: Option<(f64, Option<f64>)> = None;
    let place = |x: f64,
                 f: Option<f64>,
                 lo: &mut Option<(f64, f64)>,
                 hi: &mut Option<(f64, Option<f64>)>| match f {
        Some(f) if f < 0.0 => *lo = Some((x, f)),
        f => *hi = Some((x, f)),
    };
    // Local secant first: the tails form a thin bundle and the closest
    // amplitude is the wanted one.
    let target = 1e-12 * phi_m.abs().max(1.0);
    if let Some((_, t)) = secant(|x| solve(x).map(|p| p.0), guess, 1.0, target).and_then(solve) {
        let residual = t.eval(r_m)[1] - y_m;
        return Ok((t, residual));
    }
    let f0 = eval(guess);
    place(guess, f0, &mut lo, &mut hi);
    let mut step = 1.0;
    for _ in 0..80 {
        let x = match (lo, hi) {
            (Some(_), Some(_)) => break,
            (None, Some(h)) => h.0 - step,
            (Some(l), None) => l.0 + step,
            (None, None) => unreachable!(),
        };
        let f = eval(x);
        place(x, f, &mut lo, &mut hi);
        step *= 2.0;
    }
    let (Some(mut l), Some(mut h)) = (lo, hi) else {
        return Err(Error::Tail(format!(
            "could not bracket the tail amplitude at r = {r_m}"
        )));
    };
    let mut last_side = 0i32;
    for _ in 0..200 {
        if l.1.abs().min(h.1.map_or(f64::INFINITY, f64::abs)) < target || (h.0 - l.0).abs() <= 1e-15 * l.0.abs().max(1.0) {
            break;
        }
        // Illinois false position when both ends are finite, else bisection.
        let x = match h.1 {
            Some(fh) => {
                let (mut fl, mut fh) = (l.1, fh);
                match last_side {
                    2 => fl *= 0.5,
                    -2 => fh *= 0.5,
                    _ => {}
                }
                let x = l.0 - fl * (h.0 - l.0) / (fh - fl);
                if x > l.0.min(h.0) && x < l.0.max(h.0) {
                    x
                } else {
                    0.5 * (l.0 + h.0)
                }
            }
            None => 0.5 * (l.0 + h.0),
        };
        match eval(x) {
            Some(f) if f < 0.0 => {
                l = (x, f);
                last_side = if last_side < 0 { -2 } else { -1 };
            }
            f => {
                h = (x, f);
                last_side = if last_side > 0 { 2 } else { 1 };
            }
        }
    }
    let (f, t) = best.ok_or_else(|| Error::Tail("no successful tail solve".into()))?;
    if f.abs() > 1e-8 * phi_m.abs().max(1.0) {
        return Err(Error::Tail(format!(
            "tail amplitude did not converge (miss {f:e} at r = {r_m})"
        )));
    }
    let residual = t.eval(r_m)[1] - y_m;
    Ok((t, residual))
}

/// Signed log-slope mismatch at `r_c` between the forward solution from `β`
/// and the decaying tail through the same value. `None` when the forward
/// solution vanishes before `r_c`.
pub fn matching_defect<P: RadialProblem + ?Sized>(
    problem: &P,
    beta: f64,
    r_c: f64,
    config: &IvpConfig,
) -> Result<Option<f64>> {
    Ok(matching_solve(problem, beta, r_c, config)?.map(|m| m.0))
}

fn matching_solve<P: RadialProblem + ?Sized>(
    problem: &P,
    beta: f64,
    r_c: f64,
    config: &IvpConfig,
) -> Result<Option<(f64, IvpSolution)>> {
    let cfg = IvpConfig {
        r_max: r_c.max(1.0 + 1e-9),
        ..*config
    };
    let core = integrate_positive(problem, beta, &cfg)?;
    if !matches!(core.event, Classification::Undetermined(_)) {
        return Ok(None);
    }
    let (u, du) = core.eval(r_c);
    if !(u > 0.0) {
        return Ok(None);
    }
    match reconstruct_tail(problem, r_c, u.ln(), du / u, config.r_max, config) {
        Ok((_, m)) => Ok(Some((m, core))),
        Err(Error::Tail(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Largest relative `|M|` accepted at a double zero of the matching defect.
const TANGENT_TOLERANCE: f64 = 1e-6;
const CANDIDATE_SAMPLES: usize = 16;

/// The decaying tails through a neighbourhood of `r_c` form a thin bundle;
/// near its centre `(φ₀, y₀)` it is the line `y = y₀ + s (φ − φ₀)`.
#[derive(Debug, Clone, Copy)]
struct Bundle {
    phi: f64,
    y: f64,
    slope: f64,
}

impl Bundle {
    fn at<P: RadialProblem + ?Sized>(
        problem: &P,
        amplitude: f64,
        r_c: f64,
        config: &IvpConfig,
    ) -> Option<Self> {
        let s = tail_with_tangent(problem, amplitude, r_c, config)?;
        (s[2] != 0.0).then(|| Self {
            phi: s[0],
            y: s[1],
            slope: s[3] / s[2],
        })
    }

    /// Linearised matching defect of a forward state `(φ, y)`.
    fn defect(&self, phi: f64, y: f64) -> f64 {
        y - self.y - self.slope * (phi - self.phi)
    }
}

fn forward_state<P: RadialProblem + ?Sized>(
    problem: &P,
    beta: f64,
    r_c: f64,
    config: &IvpConfig,
) -> Result<Option<(f64, f64)>> {
    let cfg = IvpConfig {
        r_max: r_c,
        ..*config
    };
    let sol = integrate_positive(problem, beta, &cfg)?;
    if !matches!(sol.event, Classification::Undetermined(_)) {
        return Ok(None);
    }
    let (u, du) = sol.eval(r_c);
    Ok((u > 0.0).then(|| (u.ln(), du / u)))
}

/// Zero of `g` in `[lo, hi]` by bisection; `g(lo)` and `g(hi)` must differ
/// in sign. `None` values of `g` stop the search.
fn bisect(
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    mut g: impl FnMut(f64) -> Result<Option<f64>>,
) -> Result<(f64, (f64, f64), usize)> {
    let Some(glo) = g(lo)? else {
        return Ok((0.5 * (lo + hi), (lo, hi), 0));
    };
    let neg = glo < 0.0;
    let mut steps = 0;
    while hi - lo > tol * hi && steps < MAX_BISECTIONS {
        steps += 1;
        let mid = 0.5 * (lo + hi);
        match g(mid)? {
            Some(v) if (v < 0.0) == neg => lo = mid,
            Some(_) => hi = mid,
            None => break,
        }
    }
    Ok((0.5 * (lo + hi), (lo, hi), steps))
}

/// Locates zeros of the matching defect inside a candidate interval, where
/// the classification does not change sign.
///
/// The defect is linearised about the tail bundle at `r_c`; its zeros (or,
/// failing that, its extremum) seed a fixed-point iteration that recentres
/// the bundle on each estimate. At a degenerate root this iteration
/// converges linearly with ratio ½, so iterates are Aitken-accelerated.
pub fn refine_candidate<P: RadialProblem + ?Sized>(
    problem: &P,
    interval: (f64, f64),
    r_c: f64,
    tol: f64,
    config: &IvpConfig,
) -> Result<Vec<DecayingSolution>> {
    let tight = IvpConfig {
        rel_tol: config.rel_tol.min(1e-12),
        abs_tol: config.abs_tol.min(1e-14),
        ..*config
    };
    let (a, b) = interval;
    let mid = (a * b).sqrt();
    let Some((phi_m, y_m)) = forward_state(problem, mid, r_c, &tight)? else {
        return Ok(Vec::new());
    };
    let lambda = (-y_m / (2.0 * r_c)).max(0.0);
    let amplitude = phi_m - lambda * (tight.r_max * tight.r_max - r_c * r_c);
    let Some(bundle) = Bundle::at(problem, amplitude, r_c, &tight) else {
        return Ok(Vec::new());
    };
    let m = |beta: f64| -> Result<Option<f64>> {
        Ok(forward_state(problem, beta, r_c, &tight)?.map(|(p, y)| bundle.defect(p, y)))
    };
    let betas: Vec<f64> = (0..CANDIDATE_SAMPLES)
        .map(|i| a + (b - a) * i as f64 / (CANDIDATE_SAMPLES - 1) as f64)
        .collect();
    let values: Vec<Option<f64>> = betas.par_iter().map(|&x| m(x)).collect::<Result<_>>()?;
    let mut seeds = Vec::new();
    for i in 0..CANDIDATE_SAMPLES - 1 {
        if let (Some(f0), Some(f1)) = (values[i], values[i + 1]) {
            if (f0 < 0.0) != (f1 < 0.0) {
                seeds.push(bisect(betas[i], betas[i + 1], 1e-6, m)?.0);
            }
        }
    }
    if seeds.is_empty() {
        if let Some((j, _)) = values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (i, v.abs())))
            .min_by(|x, y| x.1.total_cmp(&y.1))
        {
            seeds.push(betas[j]);
        }
    }
    let mut out: Vec<DecayingSolution> = Vec::new();
    for seed in seeds {
        let Some((beta, iterations, degenerate)) =
            polish(problem, seed, amplitude, r_c, tol, &tight)?
        else {
            continue;
        };
        if !(a..=b).contains(&beta) || out.iter().any(|s| (s.beta - beta).abs() <= tol * beta) {
            continue;
        }
        let Some((m, core)) = matching_solve(problem, beta, r_c, &tight)? else {
            continue;
        };
        let (u, du) = core.eval(r_c);
        if degenerate && m.abs() > TANGENT_TOLERANCE * (1.0 + (du / u).abs()) {
            continue;
        }
        let source = if degenerate {
            RootSource::Tangent
        } else {
            RootSource::Matching
        };
        let width = tol * beta;
        out.push(assemble(
            problem,
            beta,
            (beta - width, beta + width),
            iterations,
            core,
            r_c,
            source,
            &tight,
        )?);
    }
    Ok(out)
}

const SIMPLE_ITERATIONS: usize = 12;

/// Recentred iteration for a zero of the matching defect. Returns the root,
/// the iteration count and whether it was located as a double zero.
fn polish<P: RadialProblem + ?Sized>(
    problem: &P,
    seed: f64,
    amplitude: f64,
    r_c: f64,
    tol: f64,
    config: &IvpConfig,
) -> Result<Option<(f64, usize, bool)>> {
    let mut amplitude = amplitude;
    let mut beta = seed;
    let recentre = |beta: f64, amplitude: &mut f64| -> Result<Option<Bundle>> {
        let Some((phi, _)) = forward_state(problem, beta, r_c, config)? else {
            return Ok(None);
        };
        let Some(x) = tail_amplitude(problem, r_c, phi, *amplitude, config) else {
            return Ok(None);
        };
        *amplitude = x;
        Ok(Bundle::at(problem, x, r_c, config))
    };
    let defect = |bundle: &Bundle, b: f64| {
        forward_state(problem, b, r_c, config)
            .ok()
            .flatten()
            .map(|(p, y)| bundle.defect(p, y))
    };
    // A simple zero: the recentred iteration converges superlinearly.
    let mut last_step = f64::INFINITY;
    for k in 0..SIMPLE_ITERATIONS {
        let Some(bundle) = recentre(beta, &mut amplitude)? else {
            return Ok(None);
        };
        let Some(next) = secant_in(|b| defect(&bundle, b), beta, 1e-4 * beta, 1e-15, 0.05 * beta)
        else {
            return Ok(None);
        };
        let step = (next - beta).abs();
        beta = next;
        if step <= 0.1 * tol * beta {
            return Ok(Some((beta, k + 1, false)));
        }
        if step > 0.3 * last_step {
            break;
        }
        last_step = step;
    }
    // A double zero: the forward state touches the tail curve, so the
    // derivative of the defect along β vanishes. With the bundle recentred
    // on β itself this is `y_f' − s φ_f'`, a function with a simple zero.
    let amplitude = std::cell::Cell::new(amplitude);
    let evaluations = std::cell::Cell::new(0usize);
    let slope_at_centre = |b: f64| -> Option<f64> {
        evaluations.set(evaluations.get() + 1);
        let mut a = amplitude.get();
        let bundle = recentre(b, &mut a).ok().flatten()?;
        amplitude.set(a);
        let h = 1e-3 * b;
        let p1 = defect(&bundle, b + h)?;
        let m1 = defect(&bundle, b - h)?;
        let p2 = defect(&bundle, b + 2.0 * h)?;
        let m2 = defect(&bundle, b - 2.0 * h)?;
        Some((8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h))
    };
    let Some(root) = secant_in(slope_at_centre, beta, 1e-6 * beta, 0.0, 1e-2 * beta) else {
        return Ok(None);
    };
    if (root - beta).abs() > 1e-2 * beta {
        return Ok(None);
    }
    Ok(Some((root, SIMPLE_ITERATIONS + evaluations.get(), true)))
}

/// Secant solve for the tail amplitude through `φ(r_c) = phi`, started at
/// `guess`.
fn tail_amplitude<P: RadialProblem + ?Sized>(
    problem: &P,
    r_c: f64,
    phi: f64,
    guess: f64,
    config: &IvpConfig,
) -> Option<f64> {
    let f = |x: f64| Some(tail_from(problem, x, r_c, config.r_max, config)?.eval(r_c)[0] - phi);
    secant(f, guess, 1.0, 1e-12 * phi.abs().max(1.0))
}

/// Secant iteration with steps capped at 64; `None` if `f` fails or the
/// iteration does not converge.
fn secant(f: impl Fn(f64) -> Option<f64>, x0: f64, dx: f64, tol: f64) -> Option<f64> {
    secant_in(f, x0, dx, tol, 64.0)
}

fn secant_in(
    f: impl Fn(f64) -> Option<f64>,
    x0: f64,
    dx: f64,
    tol: f64,
    max_step: f64,
) -> Option<f64> {
    let (mut x0, mut f0) = (x0, f(x0)?);
    let (mut x1, mut f1) = (x0 + dx, f(x0 + dx)?);
    for _ in 0..60 {
        if f1.abs() < tol || (x1 - x0).abs() <= 1e-15 * x1.abs() {
            return Some(x1);
        }
        if f1 == f0 {
            return None;
        }
        let step = (-f1 * (x1 - x0) / (f1 - f0)).clamp(-max_step, max_step);
        (x0, f0) = (x1, f1);
        x1 += step;
        f1 = f(x1)?;
    }
    None
}
/// Root summary for reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootSummary {
    pub beta_star: f64,
    pub bracket: (f64, f64),
    pub bracket_width: f64,
    pub bisections: usize,
    pub source: RootSource,
    pub r_match: f64,
    pub match_residual: f64,
    pub tail_sup: f64,
}

impl From<&DecayingSolution> for RootSummary {
    fn from(s: &DecayingSolution) -> Self {
        Self {
            beta_star: s.beta,
            bracket: s.bracket,
            bracket_width: s.bracket.1 - s.bracket.0,
            bisections: s.bisections,
            source: s.source,
            r_match: s.r_match,
            match_residual: s.match_residual,
            tail_sup: s.tail_sup,
        }
    }
}

/// An interval examined and discarded, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejected {
    pub interval: (f64, f64),
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct ShootingResult {
    pub scan: Scan,
    /// Validated decaying solutions in increasing `β`.
    pub solutions: Vec<DecayingSolution>,
    pub rejected: Vec<Rejected>,
}

impl ShootingResult {
    /// Number of validated decaying solutions.
    pub fn multiplicity(&self) -> usize {
        self.solutions.len()
    }

    pub fn roots(&self) -> Vec<RootSummary> {
        self.solutions.iter().map(RootSummary::from).collect()
    }
}

/// Scans, bisects every bracket, refines every candidate, validates and
/// merges. Work runs in parallel; results are in `β` order.
pub fn shoot<P: RadialProblem + ?Sized>(
    problem: &P,
    beta_lo: f64,
    beta_hi: f64,
    n_samples: usize,
    tol: f64,
    config: &IvpConfig,
) -> Result<ShootingResult> {
    let scan = scan_beta(problem, beta_lo, beta_hi, n_samples, config)?;
    let witness = |beta: f64| {
        scan.samples
            .iter()
            .find(|s| s.beta == beta)
            .map_or(f64::INFINITY, |s| s.classification.witness())
    };
    enum Job {
        Bracket((f64, f64)),
        Candidate((f64, f64), f64),
    }
    let mut jobs: Vec<Job> = scan.brackets.iter().map(|&b| Job::Bracket(b)).collect();
    for &(a, b) in &scan.candidates {
        let r_c = 0.6 * witness(a).min(witness(b));
        jobs.push(Job::Candidate((a, b), r_c));
    }
    let outcomes: Vec<(f64, f64, Result<Vec<DecayingSolution>>)> = jobs
        .par_iter()
        .map(|job| match job {
            Job::Bracket(b) => (b.0, b.1, find_ground(problem, *b, tol, config).map(|s| vec![s])),
            Job::Candidate(i, r_c) => (i.0, i.1, refine_candidate(problem, *i, *r_c, tol, config)),
        })
        .collect();
    let mut solutions: Vec<DecayingSolution> = Vec::new();
    let mut rejected = Vec::new();
    for (a, b, outcome) in outcomes {
        match outcome {
            Ok(found) if found.is_empty() => rejected.push(Rejected {
                interval: (a, b),
                reason: "no zero of the matching defect".into(),
            }),
            Ok(found) => {
                for s in found {
                    if s.seam_ok() {
                        solutions.push(s);
                    } else {
                        rejected.push(Rejected {
                            interval: (a, b),
                            reason: format!(
                                "seam residual {:e} at r = {} (beta = {})",
                                s.match_residual, s.r_match, s.beta
                            ),
                        });
                    }
                }
            }
            Err(Error::Tail(msg)) | Err(Error::NoBracket(msg)) => rejected.push(Rejected {
                interval: (a, b),
                reason: msg,
            }),
            Err(e) => return Err(e),
        }
    }
    solutions.sort_by(|x, y| x.beta.total_cmp(&y.beta));
    solutions.dedup_by(|x, y| (x.beta - y.beta).abs() <= 1e-8 * y.beta);
    Ok(ShootingResult {
        scan,
        solutions,
        rejected,
    })
}


#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LargeBetaReport {
    pub beta: f64,
    /// `sup |v − w|` on `[0, r₁]`.
    pub deviation: f64,
    /// First zero of `u(·; β)` times `√(log β)`, or NaN without a zero.
    pub scaled_first_zero: f64,
    /// First zero of the limiting profile `w`.
    pub r1: f64,
}

/// Compares `v(r) = β^{−1} u((log β)^{−1/2} r; β)` with the solution `w` of
/// `w'' + (N−1)/r w' + 2B(0) w = 0`, `w(0) = 1`.
pub fn large_beta_check(problem: &LogProblem, beta: f64, config: &IvpConfig) -> Result<LargeBetaReport> {
    if !(beta >= 10.0) {
        return Err(Error::InvalidInput(format!("beta must be >= 10, got {beta}")));
    }
    let n = problem.potential.dim();
    let w = bessel_w(n, 2.0 * problem.b(0.0))?;
    let s = beta.ln().sqrt();
    let cfg = IvpConfig {
        r_max: (1.5 * w.r1 / s).max(1.0 + 1e-9),
        epsilon0: config.epsilon0.min(1e-3 / s),
        ..*config
    };
    let sol = integrate_unclassified(problem, beta, &cfg)?;
    let m = 800;
    let mut deviation: f64 = 0.0;
    for i in 0..=m {
        let r = w.r1 * i as f64 / m as f64;
        let v = sol.eval(r / s).0 / beta;
        deviation = deviation.max((v - w.eval(r).0).abs());
    }
    let mut zero = f64::NAN;
    for st in sol.trajectory().steps() {
        if st.end()[0] <= 0.0 {
            zero = st.find_root(st.t0, st.t1(), 1e-14, |_, y| y[0]);
            break;
        }
    }
    Ok(LargeBetaReport {
        beta,
        deviation,
        scaled_first_zero: zero * s,
        r1: w.r1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{PerturbationPair, Potential};

    fn log_problem(p: Potential) -> LogProblem {
        LogProblem::new(p, PerturbationPair::none())
    }

    #[test]
    fn scan_rejects_bad_input() {
        let p = log_problem(Potential::constant(3, 0.0).unwrap());
        let cfg = IvpConfig::default();
        assert!(scan_beta(&p, 2.0, 1.0, 16, &cfg).is_err());
        assert!(scan_beta(&p, 1.0, 2.0, 4, &cfg).is_err());
    }

    #[test]
    fn gausson_scan_has_one_bracket() {
        let p = log_problem(Potential::constant(3, 0.0).unwrap());
        let scan = scan_beta(&p, 0.5, 50.0, 32, &IvpConfig::default()).unwrap();
        assert_eq!(scan.alternations(), 1);
        let (a, b) = scan.brackets[0];
        let e = 1.5_f64.exp();
        assert!(a < e && e < b);
    }

    #[test]
    fn gausson_ground_state() {
        let p = log_problem(Potential::constant(3, 0.0).unwrap());
        let cfg = IvpConfig::default();
        let sol = find_ground(&p, (4.0, 5.0), 1e-12, &cfg).unwrap();
        let e = 1.5_f64.exp();
        assert!((sol.beta - e).abs() < 1e-10 * e, "{}", sol.beta);
        for i in 0..=120 {
            let r = i as f64 * 0.05;
            let exact = (1.5 - 0.5 * r * r).exp();
            assert!((sol.value(r) - exact).abs() < 1e-6, "r={r}");
        }
        assert!(sol.has_tail());
        let r = 15.0;
        assert!((sol.log_value(r) - (1.5 - 0.5 * r * r)).abs() < 1e-4);
    }

    #[test]
    fn shift_covariance() {
        let c = 4.0_f64.ln();
        let p = log_problem(Potential::constant(3, c).unwrap());
        let sol = find_ground(&p, (8.0, 10.0), 1e-12, &IvpConfig::default()).unwrap();
        let expect = 2.0 * 1.5_f64.exp();
        assert!((sol.beta - expect).abs() < 1e-10 * expect, "{}", sol.beta);
    }

    #[test]
    fn large_beta_first_zero() {
        let p = log_problem(Potential::constant(3, 0.0).unwrap());
        let rep = large_beta_check(&p, 1e6, &IvpConfig::default()).unwrap();
        let target = std::f64::consts::PI / 2.0_f64.sqrt();
        assert!((rep.scaled_first_zero - target).abs() < 0.05 * target);
        assert!(rep.deviation < 0.05);
        assert!(large_beta_check(&p, 5.0, &IvpConfig::default()).is_err());
    }
}

