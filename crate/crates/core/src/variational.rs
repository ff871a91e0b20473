//! Quadrature of the energy `I_δ`, the Nehari functional `J_δ` and the
//! Nehari projection on radial profiles.
//!
//! ```text
//! I(u) = ½∫ |∇u|² + (V_δ + B_δ) u² − ½∫ B_δ u² log u²
//! J(u) = ∫ |∇u|² + V_δ u² − ∫ B_δ u² log u²
//! t_u  = J(u) / ∫ B_δ u²
//! ```

use serde::Serialize;

use crate::error::{Error, Result};
use crate::interp::CubicHermite;
use crate::potential::{v_delta, PerturbationPair, Potential};
use crate::profile::RadialFunction;
use crate::quadrature::{sphere_area, GaussLegendre};

/// Gauss points per cell.
pub const CELL_ORDER: usize = 6;
/// Dyadic refinement levels of the first cell, for potentials singular at 0.
const ORIGIN_LEVELS: usize = 12;
/// Values at or below this are treated as zero in `u² log u²`.
const ZERO_FLOOR: f64 = 1e-150;
/// Decay rate of the Gaussian envelope used for the truncation bound.
const ENVELOPE_TAU: f64 = 0.45;

/// A radial profile sampled at the nodes of a composite Gauss rule on
/// `[0, R]`, with weights that include `ω_N r^{N−1}`.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    dim: usize,
    r_max: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    values: Vec<f64>,
    derivatives: Vec<f64>,
    tail_value: f64,
}

/// Panels of the composite rule: the first cell split dyadically towards
/// the origin, then `cells − 1` uniform cells.
fn panels(r_max: f64, cells: usize) -> Vec<(f64, f64)> {
    let h = r_max / cells as f64;
    let mut out = Vec::with_capacity(cells + ORIGIN_LEVELS);
    out.push((0.0, h * 0.5_f64.powi(ORIGIN_LEVELS as i32 - 1)));
    for k in (0..ORIGIN_LEVELS - 1).rev() {
        let hi = h * 0.5_f64.powi(k as i32);
        out.push((0.5 * hi, hi));
    }
    for i in 1..cells {
        out.push((i as f64 * h, if i + 1 == cells { r_max } else { (i + 1) as f64 * h }));
    }
    out
}

impl RadialProfile {
    /// Samples `f` at the Gauss nodes of `cells` cells on `[0, r_max]`.
    /// Derivatives come from the cell-local interpolating polynomial of the
    /// sampled values.
    pub fn from_function<F: RadialFunction + ?Sized>(
        f: &F,
        dim: usize,
        r_max: f64,
        cells: usize,
    ) -> Result<Self> {
        Self::build(dim, r_max, cells, |r| f.value(r))
    }

    /// Resamples `(r_i, u_i)` by monotone cubic interpolation, which keeps
    /// positive data positive.
    pub fn from_samples(dim: usize, r: &[f64], u: &[f64], cells: usize) -> Result<Self> {
        let spline = CubicHermite::monotone(r.to_vec(), u.to_vec())?;
        let (_, r_max) = spline.x_range();
        Self::build(dim, r_max, cells, |x| spline.eval(x).0)
    }

    fn build(dim: usize, r_max: f64, cells: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidInput(format!("dimension must be >= 2, got {dim}")));
        }
        if !(r_max > 0.0 && r_max.is_finite()) || cells < 2 {
            return Err(Error::InvalidInput(format!(
                "need r_max > 0 and at least 2 cells, got {r_max}, {cells}"
            )));
        }
        let rule = GaussLegendre::new(CELL_ORDER);
        let diff = rule.differentiation_matrix();
        let omega = sphere_area(dim);
        let m = rule.len();
        let panels = panels(r_max, cells);
        let mut nodes = Vec::with_capacity(panels.len() * m);
        let mut weights = Vec::with_capacity(panels.len() * m);
        let mut values = Vec::with_capacity(panels.len() * m);
        let mut derivatives = Vec::with_capacity(panels.len() * m);
        for (a, b) in panels {
            let half = 0.5 * (b - a);
            let local: Vec<f64> = rule.mapped_nodes(a, b).collect();
            let u: Vec<f64> = local.iter().map(|&r| f(r)).collect();
            if let Some(bad) = u.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    r: local[bad],
                    detail: "profile value".into(),
                });
            }
            for k in 0..m {
                let r = local[k];
                nodes.push(r);
                weights.push(rule.weights[k] * half * omega * r.powi(dim as i32 - 1));
                values.push(u[k]);
                derivatives.push((0..m).map(|j| diff[k][j] * u[j]).sum::<f64>() / half);
            }
        }
        let tail_value = f(r_max).abs();
        Ok(Self {
            dim,
            r_max,
            nodes,
            weights,
            values,
            derivatives,
            tail_value,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivatives(&self) -> &[f64] {
        &self.derivatives
    }

    /// `|u(R)|`.
    pub fn tail_value(&self) -> f64 {
        self.tail_value
    }

    /// `s · u`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out.derivatives.iter_mut().for_each(|v| *v *= s);
        out.tail_value *= s.abs();
        out
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v.abs() <= ZERO_FLOOR)
    }

    /// `∫ f(r, u, u') dx` over the ball of radius `R`.
    pub fn integrate(&self, f: impl Fn(f64, f64, f64) -> f64) -> f64 {
        (0..self.nodes.len())
            .map(|i| self.weights[i] * f(self.nodes[i], self.values[i], self.derivatives[i]))
            .sum()
    }

    /// Upper bound on `∫_{|x|>R} u²` under the Gaussian envelope
    /// `u(r) ≤ u(R) e^{−τ(r²−R²)}`, `τ = 0.45`.
    pub fn tail_mass_bound(&self) -> f64 {
        let r = self.r_max;
        let n1 = self.dim as f64 - 1.0;
        let rate = 4.0 * ENVELOPE_TAU * r - n1 / r;
        if rate <= 0.0 {
            return f64::INFINITY;
        }
        sphere_area(self.dim) * self.tail_value * self.tail_value * r.powf(n1) / rate
    }
}

fn u2_log_u2(u: f64) -> f64 {
    if u.abs() <= ZERO_FLOOR {
        0.0
    } else {
        let s = u * u;
        s * s.ln()
    }
}

/// The pieces every functional is assembled from.
#[derive(Debug, Clone, Copy)]
struct Integrals {
    gradient: f64,
    potential: f64,
    b_mass: f64,
    b_log: f64,
}

fn integrals(profile: &RadialProfile, potential: &Potential, pair: &PerturbationPair) -> Integrals {
    let mut out = Integrals {
        gradient: 0.0,
        potential: 0.0,
        b_mass: 0.0,
        b_log: 0.0,
    };
    let mut skipped = 0usize;
    for i in 0..profile.nodes.len() {
        let (r, u, du, w) = (
            profile.nodes[i],
            profile.values[i],
            profile.derivatives[i],
            profile.weights[i],
        );
        let b = pair.b_delta(r);
        out.gradient += w * du * du;
        out.b_mass += w * b * u * u;
        out.b_log += w * b * u2_log_u2(u);
        let v = v_delta(potential, pair, r);
        if v.is_finite() {
            out.potential += w * v * u * u;
        } else {
            skipped += 1;
        }
    }
    if skipped > 0 {
        log::warn!("potential not finite at {skipped} quadrature nodes; skipped");
    }
    if profile.tail_value > 1e-12 {
        log::warn!(
            "profile is {:.3e} at R = {}; functionals are truncated",
            profile.tail_value,
            profile.r_max
        );
    }
    out
}

/// `I_δ(u)`.
pub fn energy_i(profile: &RadialProfile, potential: &Potential, pair: &PerturbationPair) -> f64 {
    let s = integrals(profile, potential, pair);
    0.5 * (s.gradient + s.potential + s.b_mass) - 0.5 * s.b_log
}

/// `J_δ(u) = I_δ'(u)u`.
pub fn nehari_j(profile: &RadialProfile, potential: &Potential, pair: &PerturbationPair) -> f64 {
    let s = integrals(profile, potential, pair);
    s.gradient + s.potential - s.b_log
}

/// `∫ B_δ u²`.
pub fn b_mass(profile: &RadialProfile, pair: &PerturbationPair) -> f64 {
    profile.integrate(|r, u, _| pair.b_delta(r) * u * u)
}

/// Returns `t_u = J(u) / ∫B u²` and the projection `e^{t_u/2} u` onto the
/// Nehari manifold.
pub fn nehari_project(
    profile: &RadialProfile,
    potential: &Potential,
    pair: &PerturbationPair,
) -> Result<(f64, RadialProfile)> {
    if profile.is_zero() {
        return Err(Error::InvalidInput("cannot project the zero profile".into()));
    }
    let s = integrals(profile, potential, pair);
    let t = (s.gradient + s.potential - s.b_log) / s.b_mass;
    Ok((t, profile.scaled((0.5 * t).exp())))
}

/// All functionals of one profile, as reported by the `energy` command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Functionals {
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub b_mass: f64,
    pub t_u: f64,
    /// `|2I − ∫B u²| / ∫B u²`; zero on the Nehari manifold.
    pub level_residual: f64,
    /// Bound on the neglected `∫_{|x|>R} u²`.
    pub truncation_bound: f64,
}

pub fn functionals(
    profile: &RadialProfile,
    potential: &Potential,
    pair: &PerturbationPair,
) -> Result<Functionals> {
    if profile.is_zero() {
        return Err(Error::InvalidInput("zero profile".into()));
    }
    let s = integrals(profile, potential, pair);
    let i = 0.5 * (s.gradient + s.potential + s.b_mass) - 0.5 * s.b_log;
    let j = s.gradient + s.potential - s.b_log;
    Ok(Functionals {
        i,
        j,
        b_mass: s.b_mass,
        t_u: j / s.b_mass,
        level_residual: (2.0 * i - s.b_mass).abs() / s.b_mass,
        truncation_bound: profile.tail_mass_bound(),
    })
}

/// `½ e^N π^{N/2}`, the level of the Gausson `e^{N/2 − r²/2}` for `V ≡ 0`.
pub fn gausson_level(dim: usize) -> f64 {
    let n = dim as f64;
    0.5 * n.exp() * std::f64::consts::PI.powf(0.5 * n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{gausson, FnProfile};

    fn zero_potential(n: usize) -> Potential {
        Potential::constant(n, 0.0).unwrap()
    }

    #[test]
    fn weights_integrate_polynomials_times_measure() {
        for n in [2usize, 3, 5] {
            let p = RadialProfile::from_function(&gausson(n, 4.0), n, 4.0, 17).unwrap();
            for k in 0..=4 {
                let q = p.integrate(|r, _, _| r.powi(k));
                let exact = sphere_area(n) * 4.0_f64.powi(k + n as i32) / (k + n as i32) as f64;
                assert!((q - exact).abs() < 1e-12 * exact, "n={n} k={k}");
            }
            assert!(p.weights().iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn gausson_level_and_nehari() {
        let n = 3;
        let p = RadialProfile::from_function(&gausson(n, 12.0), n, 12.0, 120).unwrap();
        let pot = zero_potential(n);
        let pair = PerturbationPair::none();
        let f = functionals(&p, &pot, &pair).unwrap();
        let level = gausson_level(3);
        assert!((level - 55.921_428_790_4).abs() < 1e-9);
        assert!((f.i - level).abs() < 1e-8 * level);
        assert!(f.j.abs() < 1e-8 * f.b_mass);
        assert!(f.level_residual < 1e-9);
    }

    #[test]
    fn j_under_scaling() {
        let p = RadialProfile::from_function(&gausson(3, 12.0), 3, 12.0, 120).unwrap();
        let pot = zero_potential(3);
        let pair = PerturbationPair::none();
        for s in [2.0, 0.5] {
            let q = p.scaled(s);
            let mass = b_mass(&q, &pair);
            let expect = -(s * s).ln() * mass;
            assert!((nehari_j(&q, &pot, &pair) - expect).abs() < 1e-8 * mass);
        }
    }

    #[test]
    fn projection_of_scaled_gausson() {
        let p = RadialProfile::from_function(&gausson(3, 12.0), 3, 12.0, 120).unwrap();
        let pot = zero_potential(3);
        let pair = PerturbationPair::none();
        let (t, q) = nehari_project(&p.scaled(3.0), &pot, &pair).unwrap();
        assert!((t + 9.0_f64.ln()).abs() < 1e-9);
        for (a, b) in q.values().iter().zip(p.values()) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn projection_maximises_the_fibre() {
        // A bump that is not a solution.
        let bump = FnProfile {
            f: |r: f64| (1.0 + r) * (-r * r).exp(),
            df: |r: f64| (1.0 - 2.0 * r * (1.0 + r)) * (-r * r).exp(),
            r_end: 8.0,
        };
        let p = RadialProfile::from_function(&bump, 3, 8.0, 80).unwrap();
        let pot = Potential::log(3, 1.0).unwrap();
        let pair = PerturbationPair::none();
        let (t, q) = nehari_project(&p, &pot, &pair).unwrap();
        assert!(nehari_j(&q, &pot, &pair).abs() < 1e-8 * b_mass(&q, &pair));
        let top = energy_i(&q, &pot, &pair);
        for k in -50..=50 {
            let s = 0.1 * k as f64;
            let e = energy_i(&p.scaled((0.5 * s).exp()), &pot, &pair);
            assert!(e <= top + 1e-9 * top.abs(), "t={s} beats t_u={t}");
        }
        let (t2, _) = nehari_project(&q, &pot, &pair).unwrap();
        assert!(t2.abs() < 1e-10);
    }

    #[test]
    fn zero_profile() {
        let z = FnProfile {
            f: |_: f64| 0.0,
            df: |_: f64| 0.0,
            r_end: 5.0,
        };
        let p = RadialProfile::from_function(&z, 3, 5.0, 10).unwrap();
        let pot = zero_potential(3);
        let pair = PerturbationPair::none();
        assert_eq!(energy_i(&p, &pot, &pair), 0.0);
        assert!(nehari_project(&p, &pot, &pair).is_err());
    }

    #[test]
    fn mesh_refinement_order() {
        let pot = Potential::log(3, 1.0).unwrap();
        let pair = PerturbationPair::none();
        let g = gausson(3, 8.0);
        let i: Vec<f64> = [4usize, 8, 16]
            .iter()
            .map(|&c| energy_i(&RadialProfile::from_function(&g, 3, 8.0, c).unwrap(), &pot, &pair))
            .collect();
        let d1 = (i[1] - i[0]).abs();
        let d2 = (i[2] - i[1]).abs();
        assert!(d2 * 8.0 <= d1, "d1={d1:e} d2={d2:e}");
    }

    #[test]
    fn pchip_resampling_preserves_level() {
        let r: Vec<f64> = (0..=2400).map(|i| i as f64 * 0.005).collect();
        let u: Vec<f64> = r.iter().map(|&x| (1.5 - 0.5 * x * x).exp()).collect();
        let p = RadialProfile::from_samples(3, &r, &u, 120).unwrap();
        let f = functionals(&p, &zero_potential(3), &PerturbationPair::none()).unwrap();
        assert!((f.i - gausson_level(3)).abs() < 1e-4 * gausson_level(3));
    }
}
