//! Radial spectrum of the linearisation `L = −Δ + V − log w² − 2` about a
//! positive solution `w`.
//!
//! Cell-centred finite volumes on `[0, R]`: unknowns at `r_i = (i + ½)h`,
//! exact shell volumes `(r_{i+½}^N − r_{i−½}^N)/N`, face coefficients
//! `r_{i+½}^{N−1}/h`, no flux through the origin and Dirichlet at `R`.
//! Scaling by the square root of the volumes gives a symmetric tridiagonal
//! matrix whose eigenvalues are found by Sturm-sequence bisection.
//! `Lw = −2w` holds exactly for every solution, which gives a sharp check.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::profile::RadialFunction;

/// Absolute tolerance of the eigenvalue bisection.
pub const EIGEN_TOLERANCE: f64 = 1e-10;
pub const MAX_EIGENVALUES: usize = 10;
pub const DEFAULT_TOL_ZERO: f64 = 1e-2;

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumConfig {
    /// Dirichlet radius.
    pub r_box: f64,
    /// Cells on the coarsest level; each further level halves `h`.
    pub cells: usize,
    pub levels: usize,
    /// Number of eigenvalues.
    pub count: usize,
    /// Constant added to `q`.
    pub shift: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            r_box: 12.0,
            cells: 400,
            levels: 3,
            count: 4,
            shift: 0.0,
        }
    }
}

impl SpectrumConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_box > 0.0) || self.cells < 16 || self.levels < 3 {
            return Err(Error::InvalidInput(
                "spectrum needs r_box > 0, at least 16 cells and 3 levels".into(),
            ));
        }
        if self.count == 0 || self.count > MAX_EIGENVALUES {
            return Err(Error::InvalidInput(format!(
                "eigenvalue count must be in 1..={MAX_EIGENVALUES}"
            )));
        }
        Ok(())
    }
}

/// The finite-volume operator on one mesh.
#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    pub dim: usize,
    pub h: f64,
    pub centres: Vec<f64>,
    /// `V − log w² − 2` at the cell centres, plus any shift.
    pub q: Vec<f64>,
    pub volumes: Vec<f64>,
    /// `faces[i]` couples cells `i` and `i + 1`; the last entry is the
    /// Dirichlet face at `R`.
    pub faces: Vec<f64>,
}

impl LinearizedOperator {
    /// `q` plus the `(N−1)(N−3)/(4r²)` term of the Liouville form.
    pub fn liouville_potential(&self) -> Vec<f64> {
        let n = self.dim as f64;
        self.centres
            .iter()
            .zip(&self.q)
            .map(|(r, q)| q + (n - 1.0) * (n - 3.0) / (4.0 * r * r))
            .collect()
    }

    /// Diagonal and off-diagonal of the symmetric form.
    pub fn tridiagonal(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.centres.len();
        let m = &self.volumes;
        let diag = (0..n)
            .map(|i| {
                let left = if i > 0 { self.faces[i - 1] } else { 0.0 };
                (left + self.faces[i] + self.q[i] * m[i]) / m[i]
            })
            .collect();
        let off = (0..n - 1)
            .map(|i| -self.faces[i] / (m[i] * m[i + 1]).sqrt())
            .collect();
        (diag, off)
    }

    /// `xᵀAx / xᵀMx` for cell values `x`.
    pub fn rayleigh_quotient(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            num += self.q[i] * self.volumes[i] * x[i] * x[i];
            den += self.volumes[i] * x[i] * x[i];
            let next = if i + 1 < n { x[i + 1] } else { 0.0 };
            num += self.faces[i] * (x[i] - next) * (x[i] - next);
        }
        num / den
    }
}

/// Operator about `w` on `cells` uniform cells of `[0, r_box]`.
pub fn assemble<F: RadialFunction + ?Sized>(
    w: &F,
    potential: &Potential,
    r_box: f64,
    cells: usize,
    shift: f64,
) -> Result<LinearizedOperator> {
    if r_box > w.r_end() * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!(
            "box radius {r_box} exceeds the profile range {}",
            w.r_end()
        )));
    }
    let dim = potential.dim();
    let n = dim as f64;
    let h = r_box / cells as f64;
    let centres: Vec<f64> = (0..cells).map(|i| (i as f64 + 0.5) * h).collect();
    let mut q = Vec::with_capacity(cells);
    for &r in &centres {
        let lw = w.log_value(r);
        if !lw.is_finite() {
            return Err(Error::Domain(format!("w is not positive at r = {r}")));
        }
        q.push(potential.value(r) - 2.0 * lw - 2.0 + shift);
    }
    let volumes = (0..cells)
        .map(|i| (((i + 1) as f64 * h).powf(n) - (i as f64 * h).powf(n)) / n)
        .collect();
    let mut faces: Vec<f64> = (1..cells).map(|i| (i as f64 * h).powf(n - 1.0) / h).collect();
    faces.push(r_box.powf(n - 1.0) / (0.5 * h));
    Ok(LinearizedOperator {
        dim,
        h,
        centres,
        q,
        volumes,
        faces,
    })
}

/// Number of eigenvalues of the tridiagonal matrix below `x`.
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut p = 1.0;
    for i in 0..diag.len() {
        let e2 = if i > 0 { off[i - 1] * off[i - 1] } else { 0.0 };
        p = diag[i] - x - e2 / p;
        if p == 0.0 {
            p = -f64::EPSILON * (diag[i].abs() + 1.0);
        }
        if p < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `count` smallest eigenvalues by bisection.
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64], count: usize) -> Vec<f64> {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let radius = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - radius);
        hi = hi.max(diag[i] + radius);
    }
    (0..count.min(n))
        .map(|k| {
            let (mut a, mut b) = (lo, hi);
            while b - a > EIGEN_TOLERANCE * 0.5 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if sturm_count(diag, off, mid) > k {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

/// Eigenvector for `lambda` by inverse iteration, normalised to unit length.
fn inverse_iteration(diag: &[f64], off: &[f64], lambda: f64) -> Vec<f64> {
    let n = diag.len();
    let shift = lambda + 1e-9 * (1.0 + lambda.abs());
    let mut x = vec![1.0; n];
    for _ in 0..4 {
        let mut c = vec![0.0; n];
        let mut d = x.clone();
        let mut b0 = diag[0] - shift;
        c[0] = if n > 1 { off[0] / b0 } else { 0.0 };
        d[0] /= b0;
        for i in 1..n {
            b0 = diag[i] - shift - off[i - 1] * c[i - 1];
            if b0 == 0.0 {
                b0 = f64::EPSILON;
            }
            if i + 1 < n {
                c[i] = off[i] / b0;
            }
            d[i] = (d[i] - off[i - 1] * d[i - 1]) / b0;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = d.into_iter().map(|v| v / norm).collect();
    }
    x
}

#[derive(Debug, Clone, Serialize)]
pub struct Level {
    pub cells: usize,
    pub h: f64,
    pub eigenvalues: Vec<f64>,
    /// Rayleigh quotient of `w` itself.
    pub rayleigh: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumResult {
    pub dim: usize,
    pub r_box: f64,
    pub eigenvalues_by_level: Vec<Level>,
    pub extrapolated: Vec<f64>,
    pub rayleigh_extrapolated: f64,
    /// Largest gap between the two Richardson estimates from the finest
    /// three levels.
    pub extrapolation_spread: f64,
    pub converged: bool,
    /// Radii and eigenfunction samples on the finest level, each scaled to
    /// maximum modulus 1 and positive near the origin.
    pub radii: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
}

impl SpectrumResult {
    pub fn min_abs(&self) -> f64 {
        self.extrapolated.iter().fold(f64::INFINITY, |m, l| m.min(l.abs()))
    }

    /// Whether every level has the same eigenvalue signs.
    pub fn stable_signs(&self) -> bool {
        let signs = |l: &Level| l.eigenvalues.iter().map(|x| *x > 0.0).collect::<Vec<_>>();
        let first = signs(&self.eigenvalues_by_level[0]);
        self.eigenvalues_by_level.iter().all(|l| signs(l) == first)
            && self.extrapolated.iter().map(|x| *x > 0.0).collect::<Vec<_>>() == first
    }
}

fn richardson(coarse: f64, fine: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}

/// Two rounds of Richardson extrapolation (`h²`, then `h⁴`) on the last
/// three levels, and the spread between the first-round estimates.
fn extrapolate(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    let (a, b, c) = (values[k - 3], values[k - 2], values[k - 1]);
    let r1 = richardson(a, b);
    let r2 = richardson(b, c);
    ((16.0 * r2 - r1) / 15.0, (r2 - r1).abs())
}

/// Lowest eigenvalues at each level and their extrapolated limits.
pub fn lowest_eigenvalues<F: RadialFunction + ?Sized>(
    w: &F,
    potential: &Potential,
    config: &SpectrumConfig,
) -> Result<SpectrumResult> {
    config.validate()?;
    let ops: Vec<LinearizedOperator> = (0..config.levels)
        .map(|l| assemble(w, potential, config.r_box, config.cells << l, config.shift))
        .collect::<Result<_>>()?;
    let solved: Vec<(Level, Vec<f64>, Vec<f64>)> = ops
        .par_iter()
        .map(|op| {
            let (diag, off) = op.tridiagonal();
            let eigenvalues = tridiagonal_eigenvalues(&diag, &off, config.count);
            let x: Vec<f64> = op.centres.iter().map(|&r| w.log_value(r).exp()).collect();
            let level = Level {
                cells: op.centres.len(),
                h: op.h,
                rayleigh: op.rayleigh_quotient(&x),
                eigenvalues,
            };
            (level, diag, off)
        })
        .collect();
    let levels: Vec<Level> = solved.iter().map(|s| s.0.clone()).collect();
    let mut extrapolated = Vec::with_capacity(config.count);
    let mut spread: f64 = 0.0;
    for k in 0..levels[0].eigenvalues.len() {
        let series: Vec<f64> = levels.iter().map(|l| l.eigenvalues[k]).collect();
        let (limit, s) = extrapolate(&series);
        extrapolated.push(limit);
        spread = spread.max(s);
    }
    let rayleigh_series: Vec<f64> = levels.iter().map(|l| l.rayleigh).collect();
    let (rayleigh_extrapolated, s) = extrapolate(&rayleigh_series);
    spread = spread.max(s);
    let increasing = extrapolated.windows(2).all(|p| p[1] > p[0]);
    let converged = increasing && spread <= 1e-3 * (1.0 + extrapolated.iter().fold(0.0_f64, |m, x| m.max(x.abs())));
    if !converged {
        log::warn!("spectrum extrapolation did not settle (spread {spread:e})");
    }

    let finest = ops.last().expect("at least three levels");
    let (_, diag, off) = solved.last().expect("at least three levels");
    let eigenvectors = levels
        .last()
        .expect("at least three levels")
        .eigenvalues
        .iter()
        .map(|&lambda| {
            let x = inverse_iteration(diag, off, lambda);
            let mut y: Vec<f64> = x.iter().zip(&finest.volumes).map(|(x, m)| x / m.sqrt()).collect();
            let peak = y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let sign = if y[0] < 0.0 { -1.0 } else { 1.0 };
            y.iter_mut().for_each(|v| *v *= sign / peak);
            y
        })
        .collect();
    Ok(SpectrumResult {
        dim: potential.dim(),
        r_box: config.r_box,
        eigenvalues_by_level: levels,
        extrapolated,
        rayleigh_extrapolated,
        extrapolation_spread: spread,
        converged,
        radii: finest.centres.clone(),
        eigenvectors,
    })
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "verdict")]
pub enum Verdict {
    Nondegenerate { gap: f64 },
    Degenerate { lambda: f64, index: usize, vector: Vec<f64> },
}

impl Verdict {
    pub fn is_nondegenerate(&self) -> bool {
        matches!(self, Verdict::Nondegenerate { .. })
    }
}

/// Nondegenerate when every extrapolated eigenvalue is farther than
/// `tol_zero` from 0 and the signs agree across levels.
pub fn nondegeneracy_check(spectrum: &SpectrumResult, tol_zero: f64) -> Verdict {
    let (index, lambda) = spectrum
        .extrapolated
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .expect("non-empty spectrum");
    if lambda.abs() > tol_zero && spectrum.stable_signs() {
        Verdict::Nondegenerate { gap: lambda.abs() }
    } else {
        Verdict::Degenerate {
            lambda,
            index,
            vector: spectrum.eigenvectors[index].clone(),
        }
    }
}
