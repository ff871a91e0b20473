//! Positive radial solutions of the logarithmic Schrödinger equation
//!
//! ```text
//! −Δu + V(|x|) u = B(|x|) u log u²
//! ```
//!
//! by shooting on the radial ODE, with variational, energy-identity,
//! spectral and power-law-limit cross-checks.

// `!(a > b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod interp;
pub mod ode;
pub mod potential;
pub mod powerlaw;
pub mod profile;
pub mod quadrature;
pub mod radial_ivp;
pub mod shooting;
pub mod spectrum;
pub mod suite;
pub mod variational;

pub use error::{Error, Result};
pub use potential::{PerturbationPair, Potential};
pub use profile::{RadialFunction, SampledProfile};
pub use radial_ivp::{Classification, IvpConfig, IvpSolution, LogProblem, RadialProblem};
pub use shooting::{DecayingSolution, RootSource, ShootingResult};
