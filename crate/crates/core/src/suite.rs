//! The builtin problem suite: potentials with the `G'` sign pattern under which
//! `E > 0`, each with a single positive radial solution in `β ∈ [0.5, 50]`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::potential::{PerturbationPair, Potential};
use crate::radial_ivp::{IvpConfig, LogProblem};
use crate::shooting::{shoot, DecayingSolution};

/// Outer radius for suite solutions. Tails behave like `e^{−(r−k)²/2}`
/// with a solution-dependent shift `k`, so 24 is not enough for the
/// `e^{0.45r²}` envelope to fall below `1e−6` on every case.
pub const SUITE_R_MAX: f64 = 40.0;
pub const SUITE_BETA_RANGE: (f64, f64) = (0.5, 50.0);
pub const SUITE_SAMPLES: usize = 64;
pub const SUITE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SuiteCase {
    pub name: String,
    pub potential: Potential,
}

pub fn suite_config() -> IvpConfig {
    IvpConfig {
        r_max: SUITE_R_MAX,
        ..Default::default()
    }
}

/// `V ≡ 0` for `N ∈ {2, 3, 4}` and `V = α₁ log r` for `α₁ ∈ {−1.5, 1, 3}`, `N = 3`.
pub fn builtin_suite() -> Vec<SuiteCase> {
    let mut cases: Vec<SuiteCase> = [2, 3, 4]
        .iter()
        .map(|&n| SuiteCase {
            name: format!("free_n{n}"),
            potential: Potential::constant(n, 0.0).expect("valid dimension"),
        })
        .collect();
    for a in [-1.5, 1.0, 3.0] {
        cases.push(SuiteCase {
            name: format!("log_alpha{a}"),
            potential: Potential::log(3, a).expect("alpha above 1 - N"),
        });
    }
    cases
}

#[derive(Debug, Clone)]
pub struct SuiteSolution {
    pub case: SuiteCase,
    pub solution: DecayingSolution,
}

/// Solves every case, in parallel; each must have exactly one root.
pub fn solve_suite(config: &IvpConfig) -> Result<Vec<SuiteSolution>> {
    builtin_suite()
        .into_par_iter()
        .map(|case| {
            let problem = LogProblem::new(case.potential.clone(), PerturbationPair::none());
            let (lo, hi) = SUITE_BETA_RANGE;
            let mut result = shoot(&problem, lo, hi, SUITE_SAMPLES, SUITE_TOL, config)?;
            if result.solutions.len() != 1 {
                return Err(Error::NoBracket(format!(
                    "{}: expected one solution, found {}",
                    case.name,
                    result.solutions.len()
                )));
            }
            let solution = result.solutions.remove(0);
            Ok(SuiteSolution { case, solution })
        })
        .collect()
}
