use logschroed_core::diagnostics::{diagnostic_mesh, energy_pattern, energy_profile, tail_checks, Pattern};
use logschroed_core::spectrum::{lowest_eigenvalues, nondegeneracy_check, SpectrumConfig, Verdict, DEFAULT_TOL_ZERO};
use logschroed_core::suite::{solve_suite, suite_config};
use logschroed_core::variational::{functionals, gausson_level, nehari_project, RadialProfile};
use logschroed_core::{PerturbationPair, RadialFunction};

#[test]
fn suite_energy_and_tails() {
    let cfg = suite_config();
    let pair = PerturbationPair::none();
    for s in solve_suite(&cfg).unwrap() {
        let pot = &s.case.potential;
        let mesh = diagnostic_mesh(cfg.epsilon0, s.solution.r_end(), 4000).unwrap();
        let e = energy_profile(&s.solution, pot, &pair, &mesh).unwrap();
        assert!(e.positive(), "{}", s.case.name);
        assert!(e.final_ratio() <= 1e-6, "{}", s.case.name);
        assert!(e.identity_defect() <= 1e-5 * (1.0 + e.max_abs_energy()), "{}", s.case.name);
        let pattern = energy_pattern(&e, pot).unwrap();
        match (pot.dim(), &pattern) {
            (2 | 3, Pattern::Pass { peak: None }) => {}
            // G' vanishes at r = 1/√2 for N = 4
            (4, Pattern::Pass { peak: Some(k) }) => assert!((mesh[*k] - 0.5f64.sqrt()).abs() < 0.01),
            _ => panic!("{}: {pattern:?}", s.case.name),
        }
        let tail = tail_checks(&s.solution, pot.dim(), 200).unwrap();
        assert!(tail.passed(), "{}: {tail:?}", s.case.name);
    }
}

#[test]
fn suite_spectra() {
    for s in solve_suite(&suite_config()).unwrap() {
        let sp = lowest_eigenvalues(&s.solution, &s.case.potential, &SpectrumConfig::default()).unwrap();
        assert!(sp.converged, "{}", s.case.name);
        assert!((sp.rayleigh_extrapolated + 2.0).abs() < 1e-4, "{}", s.case.name);
        assert!((sp.extrapolated[0] + 2.0).abs() < 1e-4, "{}", s.case.name);
        assert!(nondegeneracy_check(&sp, DEFAULT_TOL_ZERO).is_nondegenerate(), "{}", s.case.name);
        if s.case.name == "log_alpha1" {
            // regression values from the first converged run
            let expect = [-2.0, 2.873627, 7.485011, 11.979117];
            for (l, e) in sp.extrapolated.iter().zip(expect) {
                assert!((l - e).abs() < 1e-5, "{l} vs {e}");
            }
            assert!(matches!(nondegeneracy_check(&sp, DEFAULT_TOL_ZERO), Verdict::Nondegenerate { gap } if gap > 1e-2));
        }
    }
}

#[test]
fn suite_nehari_identities() {
    let pair = PerturbationPair::none();
    for s in solve_suite(&suite_config()).unwrap() {
        let pot = &s.case.potential;
        let p = RadialProfile::from_function(&s.solution, pot.dim(), s.solution.r_end(), 320).unwrap();
        let f = functionals(&p, pot, &pair).unwrap();
        assert!(f.level_residual <= 1e-5, "{}: {f:?}", s.case.name);
        let (t, projected) = nehari_project(&p, pot, &pair).unwrap();
        let (t2, _) = nehari_project(&projected, pot, &pair).unwrap();
        assert!(t2.abs() < 1e-10);
        let shift: f64 = -0.8;
        let (ts, _) = nehari_project(&p.scaled((0.5 * shift).exp()), pot, &pair).unwrap();
        assert!((ts - (t - shift)).abs() < 1e-9);
        if s.case.name == "free_n3" {
            assert!((f.i - gausson_level(3)).abs() < 1e-4 * gausson_level(3));
        }
    }
}
