//! The radial initial value problem
//!
//! ```text
//! u'' + (N−1)/r u' − V(r) u + NL(r, u) = 0,   u(0) = β,  u'(0) = 0
//! ```
//!
//! integrated from a small offset `ε` after a Picard startup, with event
//! classification (zero crossing, growth, or neither up to `r_max`).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::interp::CubicHermite;
use crate::ode::{integrate as ode_integrate, Control, DenseStep, OdeOptions, Trajectory};
use crate::potential::{PerturbationPair, Potential};
use crate::profile::RadialFunction;
use crate::quadrature::{dyadic_panels, GaussLegendre};

/// A radial equation of the form above.
pub trait RadialProblem: Sync {
    fn dim(&self) -> usize;
    /// Linear coefficient `V(r)`.
    fn potential(&self, r: f64) -> f64;
    /// Nonlinear term `NL(r, u)`.
    fn nonlinearity(&self, r: f64, u: f64) -> f64;
    /// `NL(r, e^φ) / e^φ`, the reaction in logarithmic variables.
    fn reaction(&self, r: f64, phi: f64) -> f64;
    /// `∂h/∂φ`; the default is a central difference.
    fn reaction_derivative(&self, r: f64, phi: f64) -> f64 {
        let e = 1e-6 * phi.abs().max(1.0);
        (self.reaction(r, phi + e) - self.reaction(r, phi - e)) / (2.0 * e)
    }
}

/// `−Δu + V_δ u = B_δ u log u²`.
#[derive(Debug, Clone)]
pub struct LogProblem {
    pub potential: Potential,
    pub pair: PerturbationPair,
    pub floor_u: f64,
}

impl LogProblem {
    pub fn new(potential: Potential, pair: PerturbationPair) -> Self {
        Self {
            potential,
            pair,
            floor_u: 1e-300,
        }
    }

    pub fn b(&self, r: f64) -> f64 {
        self.pair.b_delta(r)
    }
}

impl RadialProblem for LogProblem {
    fn dim(&self) -> usize {
        self.potential.dim()
    }

    fn potential(&self, r: f64) -> f64 {
        crate::potential::v_delta(&self.potential, &self.pair, r)
    }

    fn nonlinearity(&self, r: f64, u: f64) -> f64 {
        let a = u.abs();
        if a < self.floor_u {
            0.0
        } else {
            self.b(r) * u * (a * a).ln()
        }
    }

    fn reaction(&self, r: f64, phi: f64) -> f64 {
        2.0 * self.b(r) * phi
    }

    fn reaction_derivative(&self, r: f64, _phi: f64) -> f64 {
        2.0 * self.b(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IvpConfig {
    pub epsilon0: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub r_max: f64,
    pub grow_factor: f64,
    pub floor_u: f64,
    pub picard_iterations: usize,
}

impl Default for IvpConfig {
    fn default() -> Self {
        Self {
            epsilon0: 1e-6,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            r_max: 20.0,
            grow_factor: 10.0,
            floor_u: 1e-300,
            picard_iterations: 2,
        }
    }
}

impl IvpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon0 > 0.0 && self.epsilon0 < 1e-2) {
            return Err(Error::InvalidInput(format!(
                "epsilon0 must lie in (0, 1e-2), got {}",
                self.epsilon0
            )));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        if !(self.r_max > 1.0 && self.r_max.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "r_max must exceed 1, got {}",
                self.r_max
            )));
        }
        if !(self.grow_factor > 1.0) {
            return Err(Error::InvalidInput("grow_factor must exceed 1".into()));
        }
        if !(self.floor_u >= 0.0) {
            return Err(Error::InvalidInput("floor_u must be >= 0".into()));
        }
        if self.picard_iterations == 0 {
            return Err(Error::InvalidInput("need at least one Picard iteration".into()));
        }
        Ok(())
    }

    pub fn ode_options(&self) -> OdeOptions {
        OdeOptions {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "r")]
pub enum Classification {
    /// First root of `u`.
    CrossesZero(f64),
    /// Radius at which growth was detected: either a resolved positive local
    /// minimum of `u` or the first `r` with `u > grow_factor·β`, `u' > 0`.
    Grows(f64),
    /// Neither event up to the carried radius (`r_max`).
    Undetermined(f64),
}

impl Classification {
    pub fn witness(&self) -> f64 {
        match *self {
            Classification::CrossesZero(r)
            | Classification::Grows(r)
            | Classification::Undetermined(r) => r,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Classification::CrossesZero(_) => "CrossesZero",
            Classification::Grows(_) => "Grows",
            Classification::Undetermined(_) => "Undetermined",
        }
    }

    pub fn same_kind(&self, other: &Classification) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
    }
}

/// Startup values at `ε` together with the startup nodes on `[0, ε]`.
#[derive(Debug, Clone)]
pub struct Startup {
    pub u: f64,
    pub du: f64,
    /// `(r, u, u')` with `r` increasing from 0 to `ε`.
    pub nodes: Vec<(f64, f64, f64)>,
}

const STARTUP_LEVELS: usize = 60;
const STARTUP_NODES: usize = 12;

/// Picard iterations of
/// `u(r) = β + ∫_0^r s^{1−N} ∫_0^s t^{N−1} (V u − NL(t, u)) dt ds`
/// on dyadic Gauss–Legendre panels covering `(0, ε]`.
pub fn startup<P: RadialProblem + ?Sized>(
    problem: &P,
    beta: f64,
    epsilon: f64,
    iterations: usize,
) -> Result<Startup> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidInput(format!("beta must be positive, got {beta}")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    let n = problem.dim() as i32;
    let rule = GaussLegendre::new(STARTUP_NODES);
    let cum = rule.cumulative_matrix();
    let panels = dyadic_panels(epsilon, STARTUP_LEVELS);
    let m = rule.len();
    let t: Vec<Vec<f64>> = panels
        .iter()
        .map(|&(a, b)| rule.mapped_nodes(a, b).collect())
        .collect();
    let mut u: Vec<Vec<f64>> = vec![vec![beta; m]; panels.len()];
    let mut du: Vec<Vec<f64>> = vec![vec![0.0; m]; panels.len()];
    let mut u_end = beta;
    let mut du_end = 0.0;
    let mut ends: Vec<(f64, f64, f64)> = Vec::with_capacity(panels.len());

    for _ in 0..iterations {
        let mut inner = 0.0; // ∫_0^a t^{N−1} f
        let mut outer = 0.0; // ∫_0^a u'
        let mut new_u = vec![vec![0.0; m]; panels.len()];
        let mut new_du = vec![vec![0.0; m]; panels.len()];
        ends.clear();
        for (p, &(a, b)) in panels.iter().enumerate() {
            let half = 0.5 * (b - a);
            let g: Vec<f64> = (0..m)
                .map(|j| {
                    let tj = t[p][j];
                    let f = problem.potential(tj) * u[p][j] - problem.nonlinearity(tj, u[p][j]);
                    tj.powi(n - 1) * f
                })
                .collect();
            if let Some(j) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::Startup {
                    lo: a,
                    hi: b,
                    detail: format!("non-finite integrand at r = {:e}", t[p][j]),
                });
            }
            let mut dp = vec![0.0; m];
            for i in 0..m {
                let c: f64 = (0..m).map(|j| cum[i][j] * g[j]).sum();
                dp[i] = (inner + half * c) / t[p][i].powi(n - 1);
            }
            let inner_end = inner + half * (0..m).map(|j| rule.weights[j] * g[j]).sum::<f64>();
            let dp_end = inner_end / b.powi(n - 1);
            for i in 0..m {
                let c: f64 = (0..m).map(|j| cum[i][j] * dp[j]).sum();
                new_u[p][i] = beta + outer + half * c;
            }
            outer += half * (0..m).map(|j| rule.weights[j] * dp[j]).sum::<f64>();
            inner = inner_end;
            new_du[p] = dp;
            ends.push((b, beta + outer, dp_end));
        }
        u = new_u;
        du = new_du;
        let last = ends[ends.len() - 1];
        u_end = last.1;
        du_end = last.2;
    }

    let mut nodes = Vec::with_capacity(panels.len() * (m + 1) + 1);
    nodes.push((0.0, beta, 0.0));
    for p in 0..panels.len() {
        for j in 0..m {
            nodes.push((t[p][j], u[p][j], du[p][j]));
        }
        if iterations > 0 {
            nodes.push(ends[p]);
        }
    }
    if !(u_end.is_finite() && du_end.is_finite()) {
        return Err(Error::Startup {
            lo: 0.0,
            hi: epsilon,
            detail: "non-finite startup value".into(),
        });
    }
    Ok(Startup {
        u: u_end,
        du: du_end,
        nodes,
    })
}

/// Result of one IVP integration.
#[derive(Debug, Clone)]
pub struct IvpSolution {
    pub beta: f64,
    pub epsilon: f64,
    pub event: Classification,
    start: CubicHermite,
    traj: Trajectory<2>,
}

impl IvpSolution {
    pub fn r_end(&self) -> f64 {
        self.traj.t_end()
    }

    /// `(u, u')` at `r ∈ [0, r_end]`; clamped outside.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        if r < self.epsilon {
            self.start.eval(r.max(0.0))
        } else {
            let y = self.traj.eval(r);
            (y[0], y[1])
        }
    }

    /// Integrator nodes `(r, u, u')` from `ε` to `r_end`.
    pub fn nodes(&self) -> Vec<(f64, f64, f64)> {
        self.traj
            .nodes()
            .into_iter()
            .map(|(r, y)| (r, y[0], y[1]))
            .collect()
    }

    pub fn trajectory(&self) -> &Trajectory<2> {
        &self.traj
    }
}

impl RadialFunction for IvpSolution {
    fn value(&self, r: f64) -> f64 {
        self.eval(r).0
    }

    fn derivative(&self, r: f64) -> f64 {
        self.eval(r).1
    }

    fn r_end(&self) -> f64 {
        IvpSolution::r_end(self)
    }
}

/// Right-hand side of the first-order system `(u, u')`.
pub fn rhs<P: RadialProblem + ?Sized>(problem: &P, r: f64, y: &[f64; 2]) -> [f64; 2] {
    let n1 = problem.dim() as f64 - 1.0;
    [
        y[1],
        -n1 / r * y[1] + problem.potential(r) * y[0] - problem.nonlinearity(r, y[0]),
    ]
}

struct Classifier {
    beta: f64,
    grow_factor: f64,
    max_u: f64,
    root_tol: f64,
    event: Option<Classification>,
}

/// Relative depth a positive local minimum must have, compared with the
/// largest value seen so far, to count as growth.
const DIP_DEPTH: f64 = 1e-8;

impl Classifier {
    fn observe_zero(&mut self, s: &DenseStep<2>) -> Control {
        if s.end()[0] <= 0.0 {
            let tol = self.root_tol * s.t1().abs().max(1.0);
            let r0 = s.find_root(s.t0, s.t1(), tol, |_, y| y[0]);
            self.event = Some(Classification::CrossesZero(r0));
            return Control::Stop(r0);
        }
        Control::Continue
    }

    fn observe(&mut self, s: &DenseStep<2>) -> Control {
        let (ta, tb) = (s.t0, s.t1());
        let ya = s.start();
        let yb = s.end();
        let tol = self.root_tol * tb.abs().max(1.0);
        if yb[0] <= 0.0 {
            let r0 = s.find_root(ta, tb, tol, |_, y| y[0]);
            self.event = Some(Classification::CrossesZero(r0));
            return Control::Stop(r0);
        }
        if ya[1] < 0.0 && yb[1] >= 0.0 {
            let rm = s.find_root(ta, tb, tol, |_, y| y[1]);
            let um = s.eval(rm)[0];
            if um > 0.0 && um < (1.0 - DIP_DEPTH) * self.max_u {
                self.event = Some(Classification::Grows(rm));
                return Control::Stop(rm);
            }
        }
        let cap = self.grow_factor * self.beta;
        if yb[0] > cap && yb[1] > 0.0 {
            let rg = if ya[0] < cap {
                s.find_root(ta, tb, tol, |_, y| y[0] - cap)
            } else {
                ta
            };
            self.event = Some(Classification::Grows(rg));
            return Control::Stop(rg);
        }
        let mid = s.eval(0.5 * (ta + tb))[0];
        self.max_u = self.max_u.max(yb[0]).max(mid);
        Control::Continue
    }
}

/// Integrates from `ε` until the first classification event or `r_max`.
pub fn integrate_problem<P: RadialProblem + ?Sized>(
    problem: &P,
    beta: f64,
    config: &IvpConfig,
) -> Result<IvpSolution> {
    integrate_inner(problem, beta, config, Mode::Classify)
}

/// Integrates until `u` first vanishes or `r_max`, ignoring growth events.
pub fn integrate_positive<P: RadialProblem + ?Sized>(
    problem: &P,
    beta: f64,
    config: &IvpConfig,
) -> Result<IvpSolution> {
    integrate_inner(problem, beta, config, Mode::ZeroOnly)
}

/// Integrates from `ε` straight to `r_max`, through zeros of `u`, without
/// classification. The event is always `Undetermined`.
pub fn integrate_unclassified<P: RadialProblem + ?Sized>(
    problem: &P,
    beta: f64,
    config: &IvpConfig,
) -> Result<IvpSolution> {
    integrate_inner(problem, beta, config, Mode::Free)
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Classify,
    ZeroOnly,
    Free,
}

fn integrate_inner<P: RadialProblem + ?Sized>(
    problem: &P,
    beta: f64,
    config: &IvpConfig,
    mode: Mode,
) -> Result<IvpSolution> {
    config.validate()?;
    let st = startup(problem, beta, config.epsilon0, config.picard_iterations)?;
    let (sr, su, sd): (Vec<f64>, Vec<f64>, Vec<f64>) = {
        let mut r = Vec::with_capacity(st.nodes.len());
        let mut u = Vec::with_capacity(st.nodes.len());
        let mut d = Vec::with_capacity(st.nodes.len());
        for &(a, b, c) in &st.nodes {
            r.push(a);
            u.push(b);
            d.push(c);
        }
        (r, u, d)
    };
    let start = CubicHermite::with_slopes(sr, su, sd)?;
    let mut classifier = Classifier {
        beta,
        grow_factor: config.grow_factor,
        max_u: beta.max(st.u),
        root_tol: config.abs_tol.min(1e-12),
        event: None,
    };
    let opts = config.ode_options();
    let traj = ode_integrate(
        |r, y: &[f64; 2]| rhs(problem, r, y),
        config.epsilon0,
        [st.u, st.du],
        config.r_max,
        &opts,
        |s| match mode {
            Mode::Classify => classifier.observe(s),
            Mode::ZeroOnly => classifier.observe_zero(s),
            Mode::Free => Control::Continue,
        },
    )?;
    let event = classifier
        .event
        .unwrap_or(Classification::Undetermined(traj.t_end()));
    Ok(IvpSolution {
        beta,
        epsilon: config.epsilon0,
        event,
        start,
        traj,
    })
}

/// Integrates the logarithmic equation with potential `V + δa` and
/// coefficient `1 + δb`.
pub fn integrate(
    potential: &Potential,
    pair: &PerturbationPair,
    beta: f64,
    config: &IvpConfig,
) -> Result<IvpSolution> {
    let mut problem = LogProblem::new(potential.clone(), *pair);
    problem.floor_u = config.floor_u;
    integrate_problem(&problem, beta, config)
}

/// Solution of `w'' + (N−1)/r w' + b₀ w = 0`, `w(0) = 1`, `w'(0) = 0`,
/// continued to one unit past its first zero `r₁`.
#[derive(Debug, Clone)]
pub struct BesselProfile {
    pub dim: usize,
    pub b0: f64,
    pub r1: f64,
    series_end: f64,
    coef: Vec<f64>,
    traj: Trajectory<2>,
}

impl BesselProfile {
    fn series(&self, r: f64) -> (f64, f64) {
        let x = r * r;
        let mut v = 0.0;
        let mut d = 0.0;
        let mut p = 1.0;
        for (k, c) in self.coef.iter().enumerate() {
            v += c * p;
            if k > 0 {
                d += 2.0 * k as f64 * c * p / r;
            }
            p *= x;
        }
        (v, if r > 0.0 { d } else { 0.0 })
    }

    pub fn eval(&self, r: f64) -> (f64, f64) {
        if r <= self.series_end {
            self.series(r)
        } else {
            let y = self.traj.eval(r);
            (y[0], y[1])
        }
    }

    pub fn r_end(&self) -> f64 {
        self.traj.t_end()
    }
}

pub fn bessel_w(dim: usize, b0: f64) -> Result<BesselProfile> {
    if dim < 2 {
        return Err(Error::InvalidInput("dimension must be at least 2".into()));
    }
    if !(b0 > 0.0 && b0.is_finite()) {
        return Err(Error::InvalidInput(format!("b0 must be positive, got {b0}")));
    }
    let n = dim as f64;
    // Series on r ≤ 1/√b₀; the terms decay like (b₀ r²/4)^k / (k!)², so 30
    // terms reach round-off.
    let series_end = 1.0 / b0.sqrt();
    let mut coef = vec![1.0];
    for k in 1..30 {
        let kf = k as f64;
        let c = -b0 * coef[k - 1] / (2.0 * kf * (2.0 * kf + n - 2.0));
        coef.push(c);
    }
    let mut prof = BesselProfile {
        dim,
        b0,
        r1: f64::NAN,
        series_end,
        coef,
        traj: Trajectory::<2>::empty(series_end),
    };
    let y0 = prof.series(series_end);
    let opts = OdeOptions {
        rel_tol: 1e-13,
        abs_tol: 1e-15,
        ..Default::default()
    };
    let f = |r: f64, y: &[f64; 2]| [y[1], -(n - 1.0) / r * y[1] - b0 * y[0]];
    let mut r1 = None;
    let mut stop_at = f64::INFINITY;
    // The first zero lies below j/√b₀ with j the first zero of the N = 2
    // profile scaled by N; search generously.
    let horizon = series_end + 4.0 * (n + 4.0) / b0.sqrt();
    let traj = ode_integrate(f, series_end, [y0.0, y0.1], horizon, &opts, |s| {
        if r1.is_none() && s.end()[0] <= 0.0 {
            let z = s.find_root(s.t0, s.t1(), 1e-15, |_, y| y[0]);
            r1 = Some(z);
            stop_at = z + 1.0;
        }
        if s.t1() >= stop_at {
            Control::Stop(stop_at)
        } else {
            Control::Continue
        }
    })?;
    prof.r1 = r1.ok_or_else(|| Error::NoBracket("no zero of the Bessel profile".into()))?;
    prof.traj = traj;
    Ok(prof)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero(n: usize) -> Potential {
        Potential::constant(n, 0.0).unwrap()
    }

    fn none() -> PerturbationPair {
        PerturbationPair::none()
    }

    #[test]
    fn startup_gausson_taylor() {
        let p = LogProblem::new(zero(3), none());
        let beta = 1.5_f64.exp();
        let eps = 1e-6;
        let st = startup(&p, beta, eps, 2).unwrap();
        let exact = (1.5 - 0.5 * eps * eps).exp();
        assert!((st.u - exact).abs() < 1e-15 * beta);
        assert!((st.du + beta * eps).abs() < 1e-12 * beta * eps);
    }

    #[test]
    fn startup_constant_solution() {
        let c = 0.7;
        let p = LogProblem::new(Potential::constant(3, c).unwrap(), none());
        let beta = (0.5 * c).exp();
        let eps = 1e-3;
        let st = startup(&p, beta, eps, 2).unwrap();
        assert!((st.u - beta).abs() < 1e-10 * eps);
        assert!(st.du.abs() < 1e-10 * eps);
    }

    #[test]
    fn startup_log_potential_self_convergence() {
        let p = LogProblem::new(Potential::log(3, 1.0).unwrap(), none());
        let eps = 1e-4;
        let coarse = startup(&p, 2.0, eps, 2).unwrap();
        let oracle = startup(&p, 2.0, eps / 2.0, 8).unwrap();
        // Compare at ε/2 through the coarse startup's own nodes.
        let node = coarse
            .nodes
            .iter()
            .find(|n| (n.0 - eps / 2.0).abs() < 1e-18)
            .copied()
            .expect("panel end at eps/2");
        assert!((node.1 - oracle.u).abs() < 1e-10, "{} vs {}", node.1, oracle.u);
        assert!((node.2 - oracle.du).abs() < 1e-10);
    }

    #[test]
    fn startup_reports_bad_panel() {
        struct Singular;
        impl RadialProblem for Singular {
            fn dim(&self) -> usize {
                3
            }
            fn potential(&self, r: f64) -> f64 {
                if r < 1e-9 {
                    f64::NAN
                } else {
                    0.0
                }
            }
            fn nonlinearity(&self, _: f64, _: f64) -> f64 {
                0.0
            }
            fn reaction(&self, _: f64, _: f64) -> f64 {
                0.0
            }
        }
        match startup(&Singular, 1.0, 1e-6, 2) {
            Err(Error::Startup { lo, hi, .. }) => assert!(lo < 1e-9 && hi <= 2e-9),
            other => panic!("expected a startup error, got {other:?}"),
        }
    }

    #[test]
    fn gausson_stays_close_to_closed_form() {
        let beta = 1.5_f64.exp();
        let sol = integrate(&zero(3), &none(), beta, &IvpConfig::default()).unwrap();
        for r in [0.0_f64, 0.5, 1.0, 2.0, 3.0] {
            let exact = (1.5 - 0.5 * r * r).exp();
            assert!((sol.eval(r).0 - exact).abs() < 1e-7, "r={r}");
        }
    }

    #[test]
    fn large_beta_crosses_zero() {
        let sol = integrate(&zero(3), &none(), 10.0, &IvpConfig::default()).unwrap();
        match sol.event {
            Classification::CrossesZero(r0) => {
                assert!(r0 > 0.0 && r0 < 20.0);
                assert!(sol.eval(r0).0.abs() < 1e-9);
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn small_beta_grows() {
        let sol = integrate(&zero(3), &none(), 0.5, &IvpConfig::default()).unwrap();
        assert!(matches!(sol.event, Classification::Grows(_)), "{:?}", sol.event);
    }

    /// Coarse fixed-step RK4 from a Taylor start: u' turns positive while u
    /// is still positive, for β = 0.5.
    #[test]
    fn small_beta_grows_fixed_step_oracle() {
        let n1 = 2.0;
        let f = |r: f64, u: f64, v: f64| -> (f64, f64) {
            (v, -n1 / r * v - u * (u * u).ln())
        };
        let mut r = 1e-3;
        let beta: f64 = 0.5;
        let mut u = beta - beta * (beta * beta).ln() * r * r / 6.0;
        let mut v = -beta * (beta * beta).ln() * r / 3.0;
        let h = 1e-3;
        let mut turned = false;
        while r < 10.0 {
            let (k1u, k1v) = f(r, u, v);
            let (k2u, k2v) = f(r + h / 2.0, u + h / 2.0 * k1u, v + h / 2.0 * k1v);
            let (k3u, k3v) = f(r + h / 2.0, u + h / 2.0 * k2u, v + h / 2.0 * k2v);
            let (k4u, k4v) = f(r + h, u + h * k3u, v + h * k3v);
            u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            r += h;
            assert!(u > 0.0);
            if v > 0.0 {
                turned = true;
                break;
            }
        }
        // u starts increasing immediately for β < 1.
        assert!(turned);
    }

    #[test]
    fn constant_solution_preserved() {
        let c = -0.4;
        let p = Potential::constant(3, c).unwrap();
        let beta = (0.5 * c).exp();
        let sol = integrate(&p, &none(), beta, &IvpConfig::default()).unwrap();
        assert!(matches!(sol.event, Classification::Undetermined(_)));
        for (_, u, _) in sol.nodes() {
            assert!((u - beta).abs() < 1e-7);
        }
    }

    #[test]
    fn ode_residual_on_dense_output() {
        let p = Potential::log(3, 1.0).unwrap();
        let sol = integrate(&p, &none(), 2.0, &IvpConfig::default()).unwrap();
        let prob = LogProblem::new(p, none());
        let nodes = sol.nodes();
        for w in nodes.windows(2).step_by(7) {
            let r = 0.5 * (w[0].0 + w[1].0);
            if r < 1e-3 {
                continue;
            }
            let h = 1e-4 * r.max(0.01);
            let (u, du) = sol.eval(r);
            let d2 = (sol.eval(r + h).1 - sol.eval(r - h).1) / (2.0 * h);
            let res = d2 + 2.0 / r * du - prob.potential(r) * u + prob.nonlinearity(r, u);
            assert!(res.abs() < 1e-6 * u.abs().max(1.0), "r={r} res={res}");
        }
    }

    #[test]
    fn self_convergence_in_tolerance() {
        let p = Potential::log(3, 1.0).unwrap();
        let cfg = IvpConfig {
            r_max: 3.0,
            ..Default::default()
        };
        let tight = IvpConfig {
            rel_tol: cfg.rel_tol / 2.0,
            abs_tol: cfg.abs_tol / 2.0,
            ..cfg
        };
        let a = integrate(&p, &none(), 3.0, &cfg).unwrap();
        let b = integrate(&p, &none(), 3.0, &tight).unwrap();
        let r = a.r_end().min(b.r_end());
        assert!((a.eval(r).0 - b.eval(r).0).abs() < 10.0 * tight.rel_tol.max(1e-9));
    }

    #[test]
    fn bessel_closed_form_n3() {
        let w = bessel_w(3, 2.0).unwrap();
        let s = 2.0_f64.sqrt();
        assert!((w.r1 - std::f64::consts::PI / s).abs() < 1e-10);
        for r in [0.1, 0.7, 1.5, 2.0, 3.0] {
            let exact = (s * r).sin() / (s * r);
            assert!((w.eval(r).0 - exact).abs() < 1e-10, "r={r}");
        }
        let w8 = bessel_w(3, 8.0).unwrap();
        assert!((w8.r1 - std::f64::consts::PI / (2.0 * s)).abs() < 1e-10);
    }

    /// Independent fixed-step RK4 from a Taylor start for the order-0
    /// cylinder profile.
    #[test]
    fn bessel_n2_first_zero() {
        let w = bessel_w(2, 1.0).unwrap();
        let mut r = 1e-4;
        let mut u = 1.0 - r * r / 4.0;
        let mut v = -r / 2.0;
        let h = 1e-4;
        let f = |r: f64, u: f64, v: f64| (v, -v / r - u);
        let zero = loop {
            let (k1u, k1v) = f(r, u, v);
            let (k2u, k2v) = f(r + h / 2.0, u + h / 2.0 * k1u, v + h / 2.0 * k1v);
            let (k3u, k3v) = f(r + h / 2.0, u + h / 2.0 * k2u, v + h / 2.0 * k2v);
            let (k4u, k4v) = f(r + h, u + h * k3u, v + h * k3v);
            let un = u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            let vn = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            if un <= 0.0 {
                break r + h * u / (u - un);
            }
            u = un;
            v = vn;
            r += h;
        };
        assert!((w.r1 - zero).abs() < 1e-7);
        assert!((w.r1 - 2.404825557695773).abs() < 1e-10);
    }

    #[test]
    fn bessel_scaling_law() {
        for n in [2, 3, 5] {
            let base = bessel_w(n, 1.0).unwrap().r1;
            for b0 in [0.5, 2.0, 4.0, 8.0] {
                let r1 = bessel_w(n, b0).unwrap().r1;
                assert!((r1 * b0.sqrt() - base).abs() < 1e-8, "N={n} b0={b0}");
            }
        }
    }
}
