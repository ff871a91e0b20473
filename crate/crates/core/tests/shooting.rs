use logschroed_core::potential::{PerturbationPair, Potential};
use logschroed_core::profile::RadialFunction;
use logschroed_core::radial_ivp::{IvpConfig, LogProblem};
use logschroed_core::shooting::{find_ground, matching_defect, shoot, RootSource};

fn problem(p: Potential) -> LogProblem {
    LogProblem::new(p, PerturbationPair::none())
}

#[test]
fn gausson_in_several_dimensions() {
    let cfg = IvpConfig::default();
    for n in [2usize, 3, 4] {
        let p = problem(Potential::constant(n, 0.0).unwrap());
        let res = shoot(&p, 0.5, 50.0, 32, 1e-12, &cfg).unwrap();
        assert_eq!(res.multiplicity(), 1);
        let sol = &res.solutions[0];
        let e = (0.5 * n as f64).exp();
        let rel = (sol.beta - e).abs() / e;
        let mut sup: f64 = 0.0;
        for i in 0..=600 {
            let r = i as f64 * 0.01;
            sup = sup.max((sol.value(r) - (0.5 * n as f64 - 0.5 * r * r).exp()).abs());
        }
        assert!(rel < 1e-8);
        assert!(sup < 1e-6);
    }
}

fn gaussian_heights(mu: f64) -> [f64; 2] {
    let d = (1.0 - 4.0 * mu).sqrt();
    [(0.75 * (1.0 - d)).exp(), (0.75 * (1.0 + d)).exp()]
}

#[test]
fn inverted_harmonic_two_gaussians() {
    let cfg = IvpConfig::default();
    let p = problem(Potential::inverted_harmonic(3, 3.0 / 16.0).unwrap());
    let res = shoot(&p, 1.0, 5.0, 64, 1e-12, &cfg).unwrap();
    assert_eq!(res.multiplicity(), 2);
    for (sol, e) in res.solutions.iter().zip(gaussian_heights(3.0 / 16.0)) {
        let rel = (sol.beta - e).abs() / e;
        assert!(rel < 1e-9, "beta={} rel={rel:e}", sol.beta);
    }
    // The slow Gaussian is radially degenerate: no change of classification.
    assert_eq!(res.solutions[0].source, RootSource::Tangent);
    assert_eq!(res.scan.alternations(), 2);
    assert_eq!(res.rejected.len(), 1);
}

#[test]
fn inverted_harmonic_family() {
    let cfg = IvpConfig::default();
    for (mu, count) in [(0.1, 3), (0.24, 2), (0.0, 1)] {
        let p = problem(Potential::inverted_harmonic(3, mu).unwrap());
        let res = shoot(&p, 0.5, 50.0, 64, 1e-12, &cfg).unwrap();
        let roots: Vec<f64> = res.solutions.iter().map(|s| s.beta).collect();
        assert_eq!(res.multiplicity(), count, "mu={mu} roots={roots:?}");
        let expect = gaussian_heights(mu);
        let wanted: &[f64] = if mu == 0.0 { &expect[1..] } else { &expect };
        for e in wanted {
            assert!(
                roots.iter().any(|b| (b - e).abs() < 1e-9 * e),
                "mu={mu}: {e} missing from {roots:?}"
            );
        }
        assert!(res.solutions.iter().all(|s| s.seam_ok()));
    }
}

#[test]
fn extra_decaying_solution_at_mu_one_tenth() {
    // Besides the two Gaussians there is a non-Gaussian decaying solution.
    // The matching defect vanishes at every seam radius and for every outer
    // radius, which rules out an artefact of the tail construction.
    let p = problem(Potential::inverted_harmonic(3, 0.1).unwrap());
    let cfg = IvpConfig::default();
    let sol = find_ground(&p, (1.39, 1.41), 1e-13, &cfg).unwrap();
    assert!((sol.beta - 1.4016054198).abs() < 1e-8);
    for r_max in [20.0, 24.0, 32.0] {
        let cfg = IvpConfig {
            r_max,
            rel_tol: 1e-12,
            abs_tol: 1e-15,
            ..Default::default()
        };
        for r_c in [7.0, 8.0, 9.0, 10.0] {
            let m = matching_defect(&p, sol.beta, r_c, &cfg).unwrap().unwrap();
            assert!(m.abs() < 1e-5, "r_max={r_max} r_c={r_c} M={m:e}");
        }
    }
}

#[test]
fn log_potentials_have_one_root() {
    let cfg = IvpConfig {
        r_max: 24.0,
        ..Default::default()
    };
    for a in [-1.5, 1.0, 3.0] {
        let p = problem(Potential::log(3, a).unwrap());
        let res = shoot(&p, 0.5, 50.0, 32, 1e-12, &cfg).unwrap();
        assert_eq!(res.multiplicity(), 1, "alpha={a}");
    }
}

#[test]
fn shift_covariance_on_log_potential() {
    let cfg = IvpConfig::default();
    let p = problem(Potential::log(3, 1.0).unwrap());
    let base = shoot(&p, 0.5, 50.0, 32, 1e-12, &cfg).unwrap().solutions[0].beta;
    let c = 0.8;
    let q = problem(Potential::log_power(3, 1.0, 0.0, 0.0, c).unwrap());
    let shifted = find_ground(&q, (base * 0.9 * (0.5 * c).exp(), base * 1.1 * (0.5 * c).exp()), 1e-12, &cfg)
        .unwrap()
        .beta;
    assert!((shifted - base * (0.5 * c).exp()).abs() < 1e-9 * shifted);
}
