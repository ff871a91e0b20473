//! Gauss–Legendre rules, spectral cumulative integration and geometric
//! panel quadrature for integrands with mild singularities at the origin.

use std::f64::consts::PI;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(m: usize) -> Self {
        assert!(m >= 1);
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        for i in 0..m.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(m, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(m, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[m - 1 - i] = x;
            weights[i] = w;
            weights[m - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Nodes mapped onto `[a, b]`.
    pub fn mapped_nodes(&self, a: f64, b: f64) -> impl Iterator<Item = f64> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().map(move |x| mid + half * x)
    }

    /// Matrix `S` with `∫_{-1}^{x_i} p = Σ_j S[i][j] p(x_j)` for every
    /// polynomial `p` of degree below the rule size.
    pub fn cumulative_matrix(&self) -> Vec<Vec<f64>> {
        let m = self.len();
        let mut s = vec![vec![0.0; m]; m];
        for i in 0..m {
            let xi = self.nodes[i];
            for (j, sij) in s[i].iter_mut().enumerate() {
                *sij = self.integrate(-1.0, xi, |x| lagrange_basis(&self.nodes, j, x));
            }
        }
        s
    }

    /// Matrix `D` with `p'(x_i) = Σ_j D[i][j] p(x_j)` on `[-1, 1]`.
    pub fn differentiation_matrix(&self) -> Vec<Vec<f64>> {
        let m = self.len();
        let x = &self.nodes;
        let bary: Vec<f64> = (0..m)
            .map(|j| {
                1.0 / (0..m)
                    .filter(|&k| k != j)
                    .map(|k| x[j] - x[k])
                    .product::<f64>()
            })
            .collect();
        let mut d = vec![vec![0.0; m]; m];
        for i in 0..m {
            let mut diag = 0.0;
            for j in 0..m {
                if i != j {
                    d[i][j] = bary[j] / bary[i] / (x[i] - x[j]);
                    diag -= d[i][j];
                }
            }
            d[i][i] = diag;
        }
        d
    }
}

fn legendre(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn lagrange_basis(nodes: &[f64], j: usize, x: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != j)
        .map(|(_, &xk)| (x - xk) / (nodes[j] - xk))
        .product()
}

/// Geometric panels `[b/2^{k+1}, b/2^k]`, `k = 0..levels`, innermost first.
pub fn dyadic_panels(b: f64, levels: usize) -> Vec<(f64, f64)> {
    (0..levels)
        .rev()
        .map(|k| {
            let hi = b * 0.5_f64.powi(k as i32);
            (0.5 * hi, hi)
        })
        .collect()
}

/// `∫_0^b f` on dyadic panels; robust for integrable log/power singularities
/// at 0. Returns `Err((lo, hi))` naming the first panel that produced a
/// non-finite value.
pub fn integrate_to_origin<F: FnMut(f64) -> f64>(
    rule: &GaussLegendre,
    b: f64,
    levels: usize,
    mut f: F,
) -> Result<f64, (f64, f64)> {
    let mut total = 0.0;
    for (lo, hi) in dyadic_panels(b, levels) {
        let part = rule.integrate(lo, hi, &mut f);
        if !part.is_finite() {
            return Err((lo, hi));
        }
        total += part;
    }
    Ok(total)
}

/// Surface area of the unit sphere in `R^n`.
pub fn sphere_area(n: usize) -> f64 {
    assert!(n >= 1);
    // ω_1 = 2, ω_2 = 2π, ω_{n+2} = 2π ω_n / n
    let mut w = if n % 2 == 1 { 2.0 } else { 2.0 * PI };
    let mut k = if n % 2 == 1 { 1 } else { 2 };
    while k < n {
        w *= 2.0 * PI / k as f64;
        k += 2;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_exactness() {
        let g = GaussLegendre::new(6);
        for deg in 0..12 {
            let exact = (1.0 - (-1.0_f64).powi(deg + 1)) / (deg + 1) as f64;
            let got = g.integrate(-1.0, 1.0, |x| x.powi(deg));
            assert!((got - exact).abs() < 1e-14, "deg {deg}: {got} vs {exact}");
        }
        assert!(g.weights.iter().all(|w| *w > 0.0));
    }

    #[test]
    fn cumulative_and_derivative_matrices() {
        let g = GaussLegendre::new(8);
        let s = g.cumulative_matrix();
        let d = g.differentiation_matrix();
        let p = |x: f64| 3.0 * x.powi(5) - x * x + 2.0;
        let pi = |x: f64| 0.5 * x.powi(6) - x.powi(3) / 3.0 + 2.0 * x;
        let dp = |x: f64| 15.0 * x.powi(4) - 2.0 * x;
        for i in 0..g.len() {
            let xi = g.nodes[i];
            let cum: f64 = (0..g.len()).map(|j| s[i][j] * p(g.nodes[j])).sum();
            assert!((cum - (pi(xi) - pi(-1.0))).abs() < 1e-13);
            let der: f64 = (0..g.len()).map(|j| d[i][j] * p(g.nodes[j])).sum();
            assert!((der - dp(xi)).abs() < 1e-11);
        }
    }

    #[test]
    fn log_singularity_to_origin() {
        let g = GaussLegendre::new(12);
        // ∫_0^1 t^2 log t dt = -1/9
        let v = integrate_to_origin(&g, 1.0, 60, |t| t * t * t.ln()).unwrap();
        assert!((v + 1.0 / 9.0).abs() < 1e-14);
        let bad = integrate_to_origin(&g, 1.0, 10, |t| if t < 0.01 { f64::NAN } else { t });
        let (lo, hi) = bad.unwrap_err();
        assert!(hi <= 0.02 && lo > 0.0);
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }
}
