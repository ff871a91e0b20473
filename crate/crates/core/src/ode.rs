//! Dormand–Prince 5(4) integrator with dense output and step observers.
//!
//! The integrator is the explicit embedded pair of Dormand and Prince with
//! Hairer's PI step-size control and the free fourth-order continuous
//! extension. Observers see every accepted step (with its interpolant) and
//! may stop the integration at any point inside it, which is how the radial
//! solver implements its event detection.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Upper bound on |h|; `f64::INFINITY` disables it.
    pub max_step: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_steps: 2_000_000,
            max_step: f64::INFINITY,
        }
    }
}

/// One accepted step together with its continuous extension.
#[derive(Debug, Clone, Copy)]
pub struct DenseStep<const D: usize> {
    pub t0: f64,
    pub h: f64,
    coef: [[f64; D]; 5],
}

impl<const D: usize> DenseStep<D> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn start(&self) -> [f64; D] {
        self.coef[0]
    }

    pub fn end(&self) -> [f64; D] {
        let mut y = [0.0; D];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.coef[0][i] + self.coef[1][i];
        }
        y
    }

    /// Evaluates the interpolant at `t`, which should lie inside the step.
    pub fn eval(&self, t: f64) -> [f64; D] {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let mut y = [0.0; D];
        for (i, yi) in y.iter_mut().enumerate() {
            let c = &self.coef;
            *yi = c[0][i]
                + theta
                    * (c[1][i] + theta1 * (c[2][i] + theta * (c[3][i] + theta1 * c[4][i])));
        }
        y
    }

    /// Locates a root of `g(t, y(t))` inside `[ta, tb]` on the interpolant.
    ///
    /// `g` must change sign between the two ends. Bisection narrows the
    /// bracket first, a secant phase polishes it down to `tol`.
    pub fn find_root<G>(&self, ta: f64, tb: f64, tol: f64, g: G) -> f64
    where
        G: Fn(f64, &[f64; D]) -> f64,
    {
        let (mut a, mut b) = (ta, tb);
        let mut ga = g(a, &self.eval(a));
        let gb = g(b, &self.eval(b));
        if ga == 0.0 {
            return a;
        }
        if gb == 0.0 {
            return b;
        }
        let width = (b - a).abs();
        let mut iterations = 0;
        while (b - a).abs() > 1e-3 * width && iterations < 12 {
            let m = 0.5 * (a + b);
            let gm = g(m, &self.eval(m));
            if gm == 0.0 {
                return m;
            }
            if (gm > 0.0) == (ga > 0.0) {
                a = m;
                ga = gm;
            } else {
                b = m;
            }
            iterations += 1;
        }
        let mut gbb = g(b, &self.eval(b));
        for _ in 0..100 {
            if (b - a).abs() <= tol {
                break;
            }
            let mut m = if gbb != ga { b - gbb * (b - a) / (gbb - ga) } else { 0.5 * (a + b) };
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            if !(m > lo && m < hi) {
                m = 0.5 * (a + b);
            }
            let gm = g(m, &self.eval(m));
            if gm == 0.0 {
                return m;
            }
            if (gm > 0.0) == (ga > 0.0) {
                a = m;
                ga = gm;
            } else {
                b = m;
                gbb = gm;
            }
            // Guard against one-sided secant stagnation.
            let m2 = 0.5 * (a + b);
            let gm2 = g(m2, &self.eval(m2));
            if gm2 == 0.0 {
                return m2;
            }
            if (gm2 > 0.0) == (ga > 0.0) {
                a = m2;
                ga = gm2;
            } else {
                b = m2;
                gbb = gm2;
            }
        }
        0.5 * (a + b)
    }
}

/// Piecewise interpolant over all accepted steps.
#[derive(Debug, Clone)]
pub struct Trajectory<const D: usize> {
    steps: Vec<DenseStep<D>>,
    t_end: f64,
}

impl<const D: usize> Trajectory<D> {
    /// A trajectory with no steps, ending where it starts.
    pub fn empty(t: f64) -> Self {
        Self {
            steps: Vec::new(),
            t_end: t,
        }
    }

    pub fn t_start(&self) -> f64 {
        self.steps.first().map_or(self.t_end, |s| s.t0)
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn steps(&self) -> &[DenseStep<D>] {
        &self.steps
    }

    fn forward(&self) -> bool {
        self.steps.first().is_none_or(|s| s.h > 0.0)
    }

    /// Dense evaluation; `t` is clamped into the integrated range.
    pub fn eval(&self, t: f64) -> [f64; D] {
        let (lo, hi) = if self.forward() {
            (self.t_start(), self.t_end)
        } else {
            (self.t_end, self.t_start())
        };
        let t = t.clamp(lo, hi);
        let idx = if self.forward() {
            self.steps.partition_point(|s| s.t1() < t)
        } else {
            self.steps.partition_point(|s| s.t1() > t)
        };
        let step = &self.steps[idx.min(self.steps.len() - 1)];
        step.eval(t)
    }

    /// Grid nodes `(t, y)`: the initial point and the end of every step,
    /// with the last node moved to the (possibly truncated) end.
    pub fn nodes(&self) -> Vec<(f64, [f64; D])> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        if let Some(first) = self.steps.first() {
            out.push((first.t0, first.start()));
        }
        for (k, s) in self.steps.iter().enumerate() {
            if k + 1 == self.steps.len() {
                out.push((self.t_end, s.eval(self.t_end)));
            } else {
                out.push((s.t1(), s.end()));
            }
        }
        out
    }
}

pub enum Control {
    Continue,
    Stop(f64),
}

fn error_norm<const D: usize>(
    err: &[f64; D],
    y0: &[f64; D],
    y1: &[f64; D],
    opts: &OdeOptions,
) -> f64 {
    let mut acc = 0.0;
    for i in 0..D {
        let sk = opts.abs_tol + opts.rel_tol * y0[i].abs().max(y1[i].abs());
        acc += (err[i] / sk).powi(2);
    }
    (acc / D as f64).sqrt()
}

fn axpy<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..D {
            out[i] += h * c * k[i];
        }
    }
    out
}

fn is_finite<const D: usize>(y: &[f64; D]) -> bool {
    y.iter().all(|v| v.is_finite())
}

fn underflow<const D: usize>(t: f64, y: &[f64; D]) -> Error {
    Error::StepUnderflow {
        r: t,
        u: y[0],
        du: if D > 1 { y[1] } else { 0.0 },
    }
}

/// Initial step size following Hairer, Nørsett & Wanner (II.4).
fn initial_step<const D: usize, F>(
    rhs: &mut F,
    t0: f64,
    y0: &[f64; D],
    f0: &[f64; D],
    dir: f64,
    span: f64,
    opts: &OdeOptions,
) -> f64
where
    F: FnMut(f64, &[f64; D]) -> [f64; D],
{
    let mut dnf = 0.0;
    let mut dny = 0.0;
    for i in 0..D {
        let sk = opts.abs_tol + opts.rel_tol * y0[i].abs();
        dnf += (f0[i] / sk).powi(2);
        dny += (y0[i] / sk).powi(2);
    }
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(span).min(opts.max_step);
    let y1 = axpy(y0, dir * h, &[(1.0, f0)]);
    let f1 = rhs(t0 + dir * h, &y1);
    let mut der2 = 0.0;
    for i in 0..D {
        let sk = opts.abs_tol + opts.rel_tol * y0[i].abs();
        der2 += ((f1[i] - f0[i]) / sk).powi(2);
    }
    let der2 = der2.sqrt() / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    (100.0 * h).min(h1).min(span).min(opts.max_step)
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t_end` (either direction).
///
/// `observer` is called after every accepted step; returning
/// [`Control::Stop`] truncates the trajectory at the given time.
pub fn integrate<const D: usize, F, O>(
    mut rhs: F,
    t0: f64,
    y0: [f64; D],
    t_end: f64,
    opts: &OdeOptions,
    mut observer: O,
) -> Result<Trajectory<D>>
where
    F: FnMut(f64, &[f64; D]) -> [f64; D],
    O: FnMut(&DenseStep<D>) -> Control,
{
    if !is_finite(&y0) {
        return Err(Error::NonFinite {
            r: t0,
            detail: "initial state".into(),
        });
    }
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let span = (t_end - t0).abs();
    let mut steps = Vec::new();
    if span == 0.0 {
        return Ok(Trajectory { steps, t_end });
    }

    const SAFE: f64 = 0.9;
    const BETA: f64 = 0.04;
    let expo1 = 0.2 - BETA * 0.75;
    let mut facold: f64 = 1e-4;

    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, &y);
    if !is_finite(&k1) {
        return Err(Error::NonFinite {
            r: t,
            detail: "right-hand side at the initial point".into(),
        });
    }
    let mut h = initial_step(&mut rhs, t, &y, &k1, dir, span, opts);
    let mut reject = false;

    for _ in 0..opts.max_steps {
        let remaining = (t_end - t).abs();
        if remaining <= 1e-14 * t.abs().max(1.0) {
            return Ok(Trajectory { steps, t_end: t });
        }
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(underflow(t, &y));
        }
        let hs = dir * h;

        let k2 = rhs(t + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]));
        let k3 = rhs(t + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]));
        let k4 = rhs(
            t + C4 * hs,
            &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = rhs(
            t + C5 * hs,
            &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let y6 = axpy(
            &y,
            hs,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        );
        let t_new = if last { t_end } else { t + hs };
        let k6 = rhs(t_new, &y6);
        let y_new = axpy(
            &y,
            hs,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let k7 = rhs(t_new, &y_new);

        let mut err = [0.0; D];
        for i in 0..D {
            err[i] = hs
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let finite = is_finite(&y_new) && is_finite(&k7) && is_finite(&err);
        let en = if finite {
            error_norm(&err, &y, &y_new, opts)
        } else {
            f64::INFINITY
        };

        if en <= 1.0 {
            let mut coef = [[0.0; D]; 5];
            for i in 0..D {
                let ydiff = y_new[i] - y[i];
                let bspl = hs * k1[i] - ydiff;
                coef[0][i] = y[i];
                coef[1][i] = ydiff;
                coef[2][i] = bspl;
                coef[3][i] = ydiff - hs * k7[i] - bspl;
                coef[4][i] = hs
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                        + D7 * k7[i]);
            }
            let step = DenseStep { t0: t, h: hs, coef };
            steps.push(step);
            if let Control::Stop(ts) = observer(&step) {
                return Ok(Trajectory { steps, t_end: ts });
            }
            let fac11 = en.max(1e-300).powf(expo1);
            let fac = (fac11 / facold.powf(BETA) / SAFE).clamp(0.1, 5.0);
            facold = en.max(1e-4);
            let mut h_new = h / fac;
            if reject {
                h_new = h_new.min(h);
            }
            reject = false;
            t = t_new;
            y = y_new;
            k1 = k7;
            if last {
                return Ok(Trajectory { steps, t_end: t });
            }
            h = h_new.min(opts.max_step);
        } else {
            if !finite && h < 1e-12 * t.abs().max(1.0) {
                return Err(Error::NonFinite {
                    r: t,
                    detail: "state became non-finite during a step".into(),
                });
            }
            let shrink = if en.is_finite() {
                (en.powf(expo1) / SAFE).min(5.0)
            } else {
                10.0
            };
            h /= shrink.max(1.0);
            reject = true;
        }
    }
    Err(underflow(t, &y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let opts = OdeOptions {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            ..Default::default()
        };
        let traj = integrate(|_, y: &[f64; 1]| [-y[0]], 0.0, [1.0], 5.0, &opts, |_| {
            Control::Continue
        })
        .unwrap();
        for t in [0.0, 0.3, 1.7, 2.25, 4.999, 5.0] {
            let y = traj.eval(t)[0];
            assert!((y - (-t).exp()).abs() < 1e-10, "t={t} y={y}");
        }
    }

    #[test]
    fn harmonic_oscillator_backwards() {
        let opts = OdeOptions {
            rel_tol: 1e-11,
            abs_tol: 1e-13,
            ..Default::default()
        };
        let traj = integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            3.0,
            [3.0_f64.cos(), -3.0_f64.sin()],
            0.0,
            &opts,
            |_| Control::Continue,
        )
        .unwrap();
        let y = traj.eval(0.0);
        assert!((y[0] - 1.0).abs() < 1e-9 && y[1].abs() < 1e-9);
        let mid = traj.eval(1.234);
        assert!((mid[0] - 1.234_f64.cos()).abs() < 1e-8);
    }

    #[test]
    fn observer_root_polishing() {
        let opts = OdeOptions::default();
        let mut root = None;
        let traj = integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [1.0, 0.0],
            10.0,
            &opts,
            |s| {
                if s.end()[0] <= 0.0 {
                    let r = s.find_root(s.t0, s.t1(), 1e-13, |_, y| y[0]);
                    root = Some(r);
                    Control::Stop(r)
                } else {
                    Control::Continue
                }
            },
        )
        .unwrap();
        let r = root.unwrap();
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-9, "{r}");
        assert_eq!(traj.t_end(), r);
    }
}
