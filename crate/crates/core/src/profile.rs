//! Radial functions, sampled profiles and the `(r, u, u')` CSV format.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::interp::CubicHermite;

/// A radial function `u(r)` on `[0, r_end]` with its derivative.
pub trait RadialFunction: Sync {
    fn value(&self, r: f64) -> f64;
    fn derivative(&self, r: f64) -> f64;
    /// Largest radius at which the function is meaningful.
    fn r_end(&self) -> f64;
    /// `log u(r)`; implementations with a logarithmic tail override this to
    /// stay finite where `u` underflows.
    fn log_value(&self, r: f64) -> f64 {
        self.value(r).ln()
    }
    /// `u'(r) / u(r)`.
    fn log_derivative(&self, r: f64) -> f64 {
        self.derivative(r) / self.value(r)
    }
}

/// Closed-form radial function given by two closures.
pub struct FnProfile<F, G> {
    pub f: F,
    pub df: G,
    pub r_end: f64,
}

impl<F, G> RadialFunction for FnProfile<F, G>
where
    F: Fn(f64) -> f64 + Sync,
    G: Fn(f64) -> f64 + Sync,
{
    fn value(&self, r: f64) -> f64 {
        (self.f)(r)
    }

    fn derivative(&self, r: f64) -> f64 {
        (self.df)(r)
    }

    fn r_end(&self) -> f64 {
        self.r_end
    }
}

/// `s · u(r)`.
pub struct Scaled<'a, P: ?Sized> {
    pub inner: &'a P,
    pub factor: f64,
}

impl<P: RadialFunction + ?Sized> RadialFunction for Scaled<'_, P> {
    fn value(&self, r: f64) -> f64 {
        self.factor * self.inner.value(r)
    }

    fn derivative(&self, r: f64) -> f64 {
        self.factor * self.inner.derivative(r)
    }

    fn r_end(&self) -> f64 {
        self.inner.r_end()
    }
}

/// The Gausson `e^{N/2 − r²/2}`, shifted to `e^{(N + c)/2 − r²/2}` for `V ≡ c`.
pub fn gausson(dim: usize, r_end: f64) -> impl RadialFunction {
    let a = 0.5 * dim as f64;
    FnProfile {
        f: move |r: f64| (a - 0.5 * r * r).exp(),
        df: move |r: f64| -r * (a - 0.5 * r * r).exp(),
        r_end,
    }
}

/// Samples `(r_i, u_i, u'_i)` interpolated by cubic Hermite pieces.
#[derive(Debug, Clone)]
pub struct SampledProfile {
    r: Vec<f64>,
    u: Vec<f64>,
    du: Vec<f64>,
    spline: CubicHermite,
}

impl SampledProfile {
    pub fn new(r: Vec<f64>, u: Vec<f64>, du: Vec<f64>) -> Result<Self> {
        let spline = CubicHermite::with_slopes(r.clone(), u.clone(), du.clone())?;
        Ok(Self { r, u, du, spline })
    }

    /// Samples `f` at the given radii.
    pub fn from_function<F: RadialFunction + ?Sized>(f: &F, radii: &[f64]) -> Result<Self> {
        let u = radii.iter().map(|&r| f.value(r)).collect();
        let du = radii.iter().map(|&r| f.derivative(r)).collect();
        Self::new(radii.to_vec(), u, du)
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn derivatives(&self) -> &[f64] {
        &self.du
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "r,u,du")?;
        for i in 0..self.r.len() {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", self.r[i], self.u[i], self.du[i])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes to a sibling temporary file and renames it into place, so
    /// concurrent readers never observe a partial file.
    pub fn write_csv_atomic(&self, path: &Path) -> Result<()> {
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(format!(".tmp{}", std::process::id()));
        let tmp = std::path::PathBuf::from(tmp);
        self.write_csv(&tmp)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let (mut r, mut u, mut du) = (Vec::new(), Vec::new(), Vec::new());
        for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            if lineno == 0 && line.trim() == "r,u,du" {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
            if cols.len() != 3 {
                return Err(Error::Parse(format!(
                    "{}:{}: expected 3 columns",
                    path.display(),
                    lineno + 1
                )));
            }
            r.push(cols[0]);
            u.push(cols[1]);
            du.push(cols[2]);
        }
        Self::new(r, u, du)
    }
}

impl RadialFunction for SampledProfile {
    fn value(&self, r: f64) -> f64 {
        self.spline.eval(r).0
    }

    fn derivative(&self, r: f64) -> f64 {
        self.spline.eval(r).1
    }

    fn r_end(&self) -> f64 {
        self.spline.x_range().1
    }
}
