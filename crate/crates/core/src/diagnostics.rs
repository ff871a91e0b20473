//! Liouville transform, the energy `E(r)`, its sign pattern, and tail and
//! ratio checks on decaying profiles.
//!
//! With `K = 1/B` and `v = K^{-1/4} r^{(N-1)/2} u`,
//!
//! ```text
//! E  = ½K(v')² − ½G v² + ½(v² log v² − v²)
//! E' = −½G' v²
//! ```
//!
//! All evaluations go through `log u` and `u'/u` so deep tails never
//! underflow into `0 · log 0`.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::{check_v2, eval_g_delta, eval_g_delta_prime, geometric_grid, PerturbationPair, Potential};
use crate::profile::RadialFunction;

/// Smallest radius at which diagnostics are reported.
pub const MIN_RADIUS: f64 = 1e-2;
/// Relative slack for strict monotonicity tests on `E`.
pub const MONOTONE_SLACK: f64 = 1e-9;
/// Envelope exponent for the Gaussian tail check.
pub const TAIL_TAU: f64 = 0.45;
/// Limit on `|r^{N-1} u'|` over the final decade.
pub const FLUX_TOLERANCE: f64 = 1e-6;
/// Upper bound on the final value of `u e^{τ r²}`.
pub const ENVELOPE_TOLERANCE: f64 = 1e-6;

/// Geometric mesh on `[max(10ε, 1e-2), r_max]`.
pub fn diagnostic_mesh(epsilon: f64, r_max: f64, points: usize) -> Result<Vec<f64>> {
    let r0 = (10.0 * epsilon).max(MIN_RADIUS);
    if points < 8 || !(r_max > r0) {
        return Err(Error::InvalidInput(format!(
            "diagnostic mesh needs r_max > {r0} and at least 8 points"
        )));
    }
    let mut mesh = geometric_grid(r0, r_max, points);
    mesh[points - 1] = r_max;
    Ok(mesh)
}

/// `v`, `v'` and `log v` at the given radii.
#[derive(Debug, Clone, Serialize)]
pub struct VProfile {
    pub radii: Vec<f64>,
    pub v: Vec<f64>,
    pub dv: Vec<f64>,
    pub log_v: Vec<f64>,
}

struct VPoint {
    log_v: f64,
    v: f64,
    dv: f64,
}

fn transform_at<F: RadialFunction + ?Sized>(u: &F, pair: &PerturbationPair, dim: usize, r: f64) -> VPoint {
    let half = 0.5 * (dim as f64 - 1.0);
    let [k, k1, _, _] = pair.k_delta(r);
    let log_v = -0.25 * k.ln() + half * r.ln() + u.log_value(r);
    let v = log_v.exp();
    let dv = v * (-0.25 * k1 / k + half / r + u.log_derivative(r));
    VPoint { log_v, v, dv }
}

/// `v = K^{-1/4} r^{(N-1)/2} u` and its derivative by the product rule.
pub fn liouville_transform<F: RadialFunction + ?Sized>(
    u: &F,
    pair: &PerturbationPair,
    dim: usize,
    radii: &[f64],
) -> Result<VProfile> {
    check_radii(radii)?;
    let points: Vec<VPoint> = radii.iter().map(|&r| transform_at(u, pair, dim, r)).collect();
    Ok(VProfile {
        radii: radii.to_vec(),
        v: points.iter().map(|p| p.v).collect(),
        dv: points.iter().map(|p| p.dv).collect(),
        log_v: points.iter().map(|p| p.log_v).collect(),
    })
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() || radii[0] <= 0.0 || radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput(
            "radii must be positive and strictly increasing".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyProfile {
    pub radii: Vec<f64>,
    pub v: Vec<f64>,
    pub dv: Vec<f64>,
    pub energy: Vec<f64>,
    /// `E / v²`, which keeps its sign where `E` underflows.
    pub reduced: Vec<f64>,
    pub de_formula: Vec<f64>,
    /// Five-point differences of `energy`; `NaN` at the two nodes nearest
    /// each end.
    pub de_diff: Vec<f64>,
    pub g_prime: Vec<f64>,
}

/// `E` and both evaluations of `E'` on the mesh.
pub fn energy_profile<F: RadialFunction + ?Sized>(
    u: &F,
    potential: &Potential,
    pair: &PerturbationPair,
    radii: &[f64],
) -> Result<EnergyProfile> {
    let vp = liouville_transform(u, pair, potential.dim(), radii)?;
    let n = radii.len();
    let mut energy = Vec::with_capacity(n);
    let mut reduced = Vec::with_capacity(n);
    let mut de_formula = Vec::with_capacity(n);
    let mut g_prime = Vec::with_capacity(n);
    for i in 0..n {
        let r = radii[i];
        let k = pair.k_delta(r)[0];
        let g = eval_g_delta(potential, pair, r)?;
        let gp = eval_g_delta_prime(potential, pair, r)?;
        let half = 0.5 * (potential.dim() as f64 - 1.0);
        let [_, k1, _, _] = pair.k_delta(r);
        let dlv = -0.25 * k1 / k + half / r + u.log_derivative(r);
        let v2 = vp.v[i] * vp.v[i];
        let e = 0.5 * k * dlv * dlv - 0.5 * g + vp.log_v[i] - 0.5;
        reduced.push(e);
        energy.push(v2 * e);
        de_formula.push(-0.5 * gp * v2);
        g_prime.push(gp);
    }
    let de_diff = five_point(radii, &energy);
    Ok(EnergyProfile {
        radii: radii.to_vec(),
        v: vp.v,
        dv: vp.dv,
        energy,
        reduced,
        de_formula,
        de_diff,
        g_prime,
    })
}

/// Derivative of the five-point Lagrange interpolant at its centre node.
fn five_point(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![f64::NAN; n];
    for i in 2..n.saturating_sub(2) {
        let xs = &x[i - 2..=i + 2];
        let xc = x[i];
        let mut sum = 0.0;
        for j in 0..5 {
            let w = if j == 2 {
                (0..5).filter(|&m| m != 2).map(|m| 1.0 / (xc - xs[m])).sum::<f64>()
            } else {
                let num: f64 = (0..5).filter(|&m| m != 2 && m != j).map(|m| xc - xs[m]).product();
                let den: f64 = (0..5).filter(|&m| m != j).map(|m| xs[j] - xs[m]).product();
                num / den
            };
            sum += w * y[i - 2 + j];
        }
        d[i] = sum;
    }
    d
}

impl EnergyProfile {
    pub fn max_abs_energy(&self) -> f64 {
        self.energy.iter().fold(0.0, |m, e| m.max(e.abs()))
    }

    pub fn max_energy(&self) -> f64 {
        self.energy.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest `|E'_formula − E'_diff|` over nodes where the difference exists.
    pub fn identity_defect(&self) -> f64 {
        self.de_formula
            .iter()
            .zip(&self.de_diff)
            .filter(|(_, d)| d.is_finite())
            .fold(0.0, |m, (f, d)| m.max((f - d).abs()))
    }

    /// Whether `E > 0` at every node, judged on `E / v²`.
    pub fn positive(&self) -> bool {
        self.reduced.iter().all(|&e| e > 0.0)
    }

    /// `|E(r_max)| / max E`.
    pub fn final_ratio(&self) -> f64 {
        self.energy.last().map_or(f64::NAN, |e| e.abs()) / self.max_energy()
    }

    pub fn write_csv(&self, out: &mut dyn Write) -> Result<()> {
        writeln!(out, "r,v,E,dE_formula,dE_diff,G_prime")?;
        for i in 0..self.radii.len() {
            // the difference is undefined at the two end nodes on each side
            let diff = if self.de_diff[i].is_finite() {
                format!("{:.16e}", self.de_diff[i])
            } else {
                String::new()
            };
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{diff},{:.16e}",
                self.radii[i], self.v[i], self.energy[i], self.de_formula[i], self.g_prime[i]
            )?;
        }
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut out)?;
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict")]
pub enum Pattern {
    /// `peak` is the index of the interior maximum for `N ≥ 4`.
    Pass { peak: Option<usize> },
    Fail { index: usize, r: f64, reason: String },
}

impl Pattern {
    pub fn passed(&self) -> bool {
        matches!(self, Pattern::Pass { .. })
    }
}

/// Sign and monotonicity pattern of `E`: strictly decreasing for
/// `N ∈ {2, 3}`, one interior maximum then decreasing for `N ≥ 4`.
///
/// Refuses potentials that fail the `G'` sign check.
pub fn energy_pattern(profile: &EnergyProfile, potential: &Potential) -> Result<Pattern> {
    let r = &profile.radii;
    let grid = geometric_grid(r[0].min(1e-3), r[r.len() - 1].max(1e3), 512);
    if let crate::potential::V2Verdict::Fail { r, reason } = check_v2(potential, &grid)? {
        return Err(Error::Precondition(format!(
            "G' sign condition fails at r = {r}: {reason}"
        )));
    }
    let e = &profile.energy;
    let slack = MONOTONE_SLACK * profile.max_abs_energy();
    if let Some(i) = profile.reduced.iter().position(|&x| !(x > 0.0)) {
        return Ok(Pattern::Fail {
            index: i,
            r: r[i],
            reason: format!("E = {:e} is not positive", e[i]),
        });
    }
    let peak = if potential.dim() <= 3 {
        None
    } else {
        let p = (0..e.len())
            .max_by(|&a, &b| e[a].total_cmp(&e[b]))
            .unwrap_or(0);
        if let Some(i) = (0..p).find(|&i| !(e[i + 1] > e[i] - slack)) {
            return Ok(Pattern::Fail {
                index: i,
                r: r[i],
                reason: "E not increasing before its maximum".into(),
            });
        }
        if p == 0 || p + 1 == e.len() {
            return Ok(Pattern::Fail {
                index: p,
                r: r[p],
                reason: "maximum of E is not interior".into(),
            });
        }
        Some(p)
    };
    let start = peak.unwrap_or(0);
    if let Some(i) = (start..e.len() - 1).find(|&i| !(e[i + 1] < e[i] + slack)) {
        return Ok(Pattern::Fail {
            index: i,
            r: r[i],
            reason: "E not decreasing".into(),
        });
    }
    Ok(Pattern::Pass { peak })
}

#[derive(Debug, Clone, Serialize)]
pub struct TailReport {
    pub r_from: f64,
    pub r_to: f64,
    /// `u e^{τr²}` strictly decreasing on the final decade.
    pub envelope_decreasing: bool,
    pub envelope_final: f64,
    pub max_flux: f64,
    /// Radius after which sampled `u' < 0`; `None` if `u' ≥ 0` at the end.
    pub negative_from: Option<f64>,
}

impl TailReport {
    pub fn passed(&self) -> bool {
        self.envelope_decreasing
            && self.envelope_final < ENVELOPE_TOLERANCE
            && self.max_flux <= FLUX_TOLERANCE
            && self.negative_from.is_some()
    }
}

/// Tail checks on the last tenth of `[0, r_end]`, sampled at `points` nodes.
pub fn tail_checks<F: RadialFunction + ?Sized>(u: &F, dim: usize, points: usize) -> Result<TailReport> {
    let r_to = u.r_end();
    let r_from = 0.9 * r_to;
    if !(r_to > 10.0 * MIN_RADIUS) {
        return Err(Error::InvalidInput(format!("profile too short: r_end = {r_to}")));
    }
    let m = points.max(64) * 10;
    let h = (r_to - MIN_RADIUS) / (m - 1) as f64;
    let mesh: Vec<f64> = (0..m).map(|i| MIN_RADIUS + h * i as f64).collect();
    let n1 = dim as f64 - 1.0;
    let mut negative_from = None;
    for &r in mesh.iter().rev() {
        if u.log_derivative(r) < 0.0 {
            negative_from = Some(r);
        } else {
            break;
        }
    }
    let decade: Vec<f64> = mesh.into_iter().filter(|&r| r >= r_from).collect();
    let log_env: Vec<f64> = decade
        .iter()
        .map(|&r| u.log_value(r) + TAIL_TAU * r * r)
        .collect();
    let envelope_decreasing = log_env.windows(2).all(|w| w[1] < w[0]);
    let max_flux = decade.iter().fold(0.0_f64, |m, &r| {
        let flux = n1 * r.ln() + u.log_value(r) + u.log_derivative(r).abs().ln();
        m.max(flux.exp())
    });
    Ok(TailReport {
        r_from,
        r_to,
        envelope_decreasing,
        envelope_final: log_env.last().copied().unwrap_or(f64::NAN).exp(),
        max_flux,
        negative_from,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub crossings: usize,
    pub crossing_radii: Vec<f64>,
    /// `u₁/u₂` strictly increasing at every mesh point.
    pub monotone: bool,
    /// `u₁/u₂` constant to rounding.
    pub constant: bool,
}

/// Crossings of `u₁ − u₂` and monotonicity of `u₁/u₂`, compared in `log`
/// form. Crossing radii are refined by bisection.
pub fn ratio_monotonicity<F, G>(u1: &F, u2: &G, radii: &[f64]) -> Result<RatioReport>
where
    F: RadialFunction + ?Sized,
    G: RadialFunction + ?Sized,
{
    check_radii(radii)?;
    let d = |r: f64| u1.log_value(r) - u2.log_value(r);
    let vals: Vec<f64> = radii.iter().map(|&r| d(r)).collect();
    if vals.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("profiles must be positive on the mesh".into()));
    }
    let scale = vals.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    let constant = vals.iter().all(|x| (x - vals[0]).abs() <= 1e-12 * scale);
    let monotone = !constant && vals.windows(2).all(|w| w[1] > w[0]);
    let mut crossing_radii = Vec::new();
    for i in 0..radii.len() - 1 {
        if (vals[i] < 0.0) != (vals[i + 1] < 0.0) {
            let (mut lo, mut hi) = (radii[i], radii[i + 1]);
            let below = vals[i] < 0.0;
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if (d(mid) < 0.0) == below {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            crossing_radii.push(0.5 * (lo + hi));
        }
    }
    Ok(RatioReport {
        crossings: crossing_radii.len(),
        crossing_radii,
        monotone,
        constant,
    })
}

/// `Q = (v₂/v₁)² E₁ − E₂` on the mesh of two energy profiles.
#[derive(Debug, Clone, Serialize)]
pub struct ContradictionReport {
    pub radii: Vec<f64>,
    pub q: Vec<f64>,
    pub strictly_decreasing: bool,
    /// Sign changes of `E₁`.
    pub e1_sign_changes: usize,
    pub min_e1: f64,
}

pub fn contradiction_quantity<F, G>(
    u1: &F,
    u2: &G,
    potential: &Potential,
    pair: &PerturbationPair,
    radii: &[f64],
) -> Result<ContradictionReport>
where
    F: RadialFunction + ?Sized,
    G: RadialFunction + ?Sized,
{
    let e1 = energy_profile(u1, potential, pair, radii)?;
    let e2 = energy_profile(u2, potential, pair, radii)?;
    let q: Vec<f64> = radii
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let ratio = (2.0 * (u2.log_value(r) - u1.log_value(r))).exp();
            ratio * e1.energy[i] - e2.energy[i]
        })
        .collect();
    let scale = q.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let slack = MONOTONE_SLACK * scale;
    let strictly_decreasing = q.windows(2).all(|w| w[1] < w[0] + slack);
    let e1_sign_changes = e1
        .reduced
        .windows(2)
        .filter(|w| (w[0] > 0.0) != (w[1] > 0.0))
        .count();
    Ok(ContradictionReport {
        radii: radii.to_vec(),
        q,
        strictly_decreasing,
        e1_sign_changes,
        min_e1: e1.energy.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{gausson, FnProfile};

    fn gaussian(c: f64, lambda: f64, r_end: f64) -> impl RadialFunction {
        FnProfile {
            f: move |r: f64| (c - lambda * r * r).exp(),
            df: move |r: f64| -2.0 * lambda * r * (c - lambda * r * r).exp(),
            r_end,
        }
    }

    #[test]
    fn transform_of_gausson() {
        let g = gausson(3, 8.0);
        let radii = diagnostic_mesh(1e-6, 6.0, 101).unwrap();
        let vp = liouville_transform(&g, &PerturbationPair::none(), 3, &radii).unwrap();
        for (i, &r) in radii.iter().enumerate() {
            let v = r * (1.5 - 0.5 * r * r).exp();
            let dv = (1.0 - r * r) * (1.5 - 0.5 * r * r).exp();
            assert!((vp.v[i] - v).abs() < 1e-13 * (1.0 + v));
            assert!((vp.dv[i] - dv).abs() < 1e-12);
        }
    }

    #[test]
    fn transform_of_constant_in_two_dimensions() {
        let one = FnProfile { f: |_| 1.0, df: |_| 0.0, r_end: 4.0 };
        let radii = [0.25, 1.0, 4.0];
        let vp = liouville_transform(&one, &PerturbationPair::none(), 2, &radii).unwrap();
        for (i, &r) in radii.iter().enumerate() {
            assert!((vp.v[i] - r.sqrt()).abs() < 1e-15);
            assert!((vp.dv[i] - 0.5 / r.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn transform_on_plateau() {
        let pair = PerturbationPair::new(0.1, 1.0, 1.0, 2.0).unwrap();
        let g = gausson(3, 8.0);
        let vp = liouville_transform(&g, &pair, 3, &[0.5]).unwrap();
        let expect = 1.1_f64.powf(0.25) * 0.5 * g.value(0.5);
        assert!((vp.v[0] - expect).abs() < 1e-14);
    }

    #[test]
    fn gausson_energy_identity_and_limits() {
        let p = Potential::constant(3, 0.0).unwrap();
        let g = gausson(3, 10.0);
        let radii = diagnostic_mesh(1e-6, 10.0, 2001).unwrap();
        let e = energy_profile(&g, &p, &PerturbationPair::none(), &radii).unwrap();
        // independent closed form at r = 1: v = e, v' = 0, G = 0
        let at_one = energy_profile(&g, &p, &PerturbationPair::none(), &[1.0]).unwrap();
        let e1 = std::f64::consts::E;
        assert!((at_one.energy[0] - 0.5 * e1 * e1).abs() < 1e-12);
        assert!(e.identity_defect() < 1e-5 * (1.0 + e.max_abs_energy()));
        assert!(e.positive());
        assert!(e.final_ratio() < 1e-6);
        assert!(energy_pattern(&e, &p).unwrap().passed());
    }

    #[test]
    fn five_dimensional_gausson_peaks_at_one() {
        let p = Potential::constant(5, 0.0).unwrap();
        let g = gausson(5, 10.0);
        let radii = diagnostic_mesh(1e-6, 10.0, 1000).unwrap();
        let e = energy_profile(&g, &p, &PerturbationPair::none(), &radii).unwrap();
        match energy_pattern(&e, &p).unwrap() {
            Pattern::Pass { peak: Some(k) } => assert!((radii[k] - 1.0).abs() < 0.01),
            other => panic!("{other:?}"),
        }
        assert!(e.identity_defect() < 1e-5 * (1.0 + e.max_abs_energy()));
    }

    #[test]
    fn pattern_refuses_failing_potential() {
        let p = Potential::inverted_harmonic(3, 3.0 / 16.0).unwrap();
        let g = gaussian(3.0 / 8.0, 1.0 / 8.0, 12.0);
        let radii = diagnostic_mesh(1e-6, 12.0, 200).unwrap();
        let e = energy_profile(&g, &p, &PerturbationPair::none(), &radii).unwrap();
        assert!(matches!(energy_pattern(&e, &p), Err(Error::Precondition(_))));
    }

    #[test]
    fn pattern_detects_rise() {
        let p = Potential::constant(3, 0.0).unwrap();
        let radii: Vec<f64> = (1..50).map(|i| i as f64 * 0.1).collect();
        let mut energy: Vec<f64> = radii.iter().map(|r| (-r).exp()).collect();
        energy[20] = energy[19] * 2.0;
        let n = radii.len();
        let e = EnergyProfile {
            radii,
            v: vec![0.0; n],
            dv: vec![0.0; n],
            reduced: energy.clone(),
            energy,
            de_formula: vec![0.0; n],
            de_diff: vec![0.0; n],
            g_prime: vec![0.0; n],
        };
        assert!(matches!(energy_pattern(&e, &p).unwrap(), Pattern::Fail { index: 19, .. }));
    }

    #[test]
    fn gausson_tail() {
        let t = tail_checks(&gausson(3, 24.0), 3, 200).unwrap();
        assert!(t.passed(), "{t:?}");
        assert!(t.negative_from.unwrap() < 0.02);
    }

    #[test]
    fn truncated_profile_fails_flux() {
        let t = tail_checks(&gausson(3, 3.0), 3, 200).unwrap();
        assert!(t.max_flux > 1.0);
        assert!(!t.passed());
    }

    #[test]
    fn ratio_of_the_two_gaussians() {
        let u1 = gaussian(3.0 / 8.0, 1.0 / 8.0, 20.0);
        let u2 = gaussian(9.0 / 8.0, 3.0 / 8.0, 20.0);
        let radii = diagnostic_mesh(1e-6, 20.0, 400).unwrap();
        let rep = ratio_monotonicity(&u1, &u2, &radii).unwrap();
        assert_eq!(rep.crossings, 1);
        assert!((rep.crossing_radii[0] - 3f64.sqrt()).abs() < 1e-10);
        assert!(rep.monotone && !rep.constant);
    }

    #[test]
    fn constant_ratio() {
        let u = gausson(3, 8.0);
        let u2 = crate::profile::Scaled { inner: &u, factor: 2.0 };
        let radii = diagnostic_mesh(1e-6, 8.0, 100).unwrap();
        let rep = ratio_monotonicity(&u, &u2, &radii).unwrap();
        assert_eq!(rep.crossings, 0);
        assert!(rep.constant && !rep.monotone);
    }

    #[test]
    fn five_point_is_exact_on_quartics() {
        let x: Vec<f64> = (0..20).map(|i| 0.3 * 1.1f64.powi(i)).collect();
        let y: Vec<f64> = x.iter().map(|t| t.powi(4) - t).collect();
        let d = five_point(&x, &y);
        assert!(d[0].is_nan() && d[19].is_nan());
        for i in 2..18 {
            assert!((d[i] - (4.0 * x[i].powi(3) - 1.0)).abs() < 1e-10);
        }
    }
}
