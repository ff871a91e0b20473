//! Fixtures shared by the benchmarks.

use logschroed_core::shooting::shoot;
use logschroed_core::suite::{suite_config, SUITE_BETA_RANGE, SUITE_SAMPLES, SUITE_TOL};
use logschroed_core::{DecayingSolution, IvpConfig, LogProblem, PerturbationPair, Potential};

/// `−Δu + α log r · u = u log u²` in three dimensions (`α = 0` is `V ≡ 0`).
pub fn log_problem(alpha: f64) -> LogProblem {
    let potential = if alpha == 0.0 {
        Potential::constant(3, 0.0)
    } else {
        Potential::log(3, alpha)
    };
    LogProblem::new(potential.expect("valid potential"), PerturbationPair::none())
}

pub fn config() -> IvpConfig {
    suite_config()
}

/// The unique decaying solution of [`log_problem`].
pub fn ground_state(alpha: f64) -> DecayingSolution {
    let (lo, hi) = SUITE_BETA_RANGE;
    shoot(&log_problem(alpha), lo, hi, SUITE_SAMPLES, SUITE_TOL, &config())
        .expect("shooting succeeds")
        .solutions
        .remove(0)
}
