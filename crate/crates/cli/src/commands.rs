//! One function per subcommand. Each returns the record body, its verdict
//! and the CSV files to write; `main` handles the file system.

use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;

use logschroed_core::diagnostics::{
    contradiction_quantity, diagnostic_mesh, energy_pattern, energy_profile, ratio_monotonicity, tail_checks,
    Pattern, RatioReport, TailReport,
};
use logschroed_core::potential::{
    check_v1, check_v2, eval_g, eval_g_prime, geometric_grid, V1Advisory, V2Verdict,
};
use logschroed_core::powerlaw::{limit_study, LimitRow, ReferenceCache};
use logschroed_core::shooting::{large_beta_check, shoot, LargeBetaReport, Rejected, RootSummary, ScanSample};
use logschroed_core::spectrum::{lowest_eigenvalues, nondegeneracy_check, Level, SpectrumConfig, Verdict};
use logschroed_core::variational::{functionals, gausson_level, nehari_project, Functionals, RadialProfile};
use logschroed_core::{
    DecayingSolution, Error, IvpConfig, LogProblem, PerturbationPair, Potential, RadialFunction, ShootingResult,
};

use crate::config::RunConfig;
use crate::finite;

pub type CliResult<T> = std::result::Result<T, Box<dyn std::error::Error>>;

pub struct Outcome {
    pub result: serde_json::Value,
    pub passed: bool,
    /// `(file name, contents)`.
    pub files: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    fn new<T: Serialize>(result: &T, passed: bool, files: Vec<(String, Vec<u8>)>) -> CliResult<Self> {
        finite::check(result)?;
        Ok(Self {
            result: serde_json::to_value(result)?,
            passed,
            files,
        })
    }
}

/// Context shared by all subcommands.
pub struct Context {
    pub config: RunConfig,
    pub out_dir: PathBuf,
}

pub fn run(command: &str, ctx: &Context) -> CliResult<Outcome> {
    match command {
        "solve" => solve(ctx),
        "scan" => scan(ctx),
        "energy" => energy(ctx),
        "diagnose" => diagnose(ctx),
        "spectrum" => spectrum(ctx),
        "powerlimit" => powerlimit(ctx),
        "checkv2" => checkv2(ctx),
        other => Err(format!("unknown subcommand '{other}'").into()),
    }
}

pub fn potential(c: &RunConfig) -> CliResult<Potential> {
    let dim = c.int("potential.dim");
    let p = match c.text("potential.kind") {
        "constant" => Potential::constant(dim, c.float("potential.c"))?,
        "log_power" => Potential::log_power(
            dim,
            c.float("potential.alpha1"),
            c.float("potential.alpha2"),
            c.float("potential.alpha3"),
            c.float("potential.alpha4"),
        )?,
        "inverted_harmonic" => Potential::inverted_harmonic(dim, c.float("potential.mu"))?,
        "table" => {
            if c.text("potential.table").is_empty() {
                return Err("potential.kind = table needs potential.table".into());
            }
            Potential::table_from_csv(dim, &c.path("potential.table"))?
        }
        other => {
            return Err(format!(
                "unknown potential.kind '{other}' (expected constant, log_power, inverted_harmonic or table)"
            )
            .into())
        }
    };
    Ok(p)
}

pub fn pair(c: &RunConfig) -> CliResult<PerturbationPair> {
    Ok(PerturbationPair::new(
        c.float("pair.delta"),
        c.float("pair.a_amp"),
        c.float("pair.plateau"),
        c.float("pair.support"),
    )?)
}

pub fn ivp_config(c: &RunConfig) -> CliResult<IvpConfig> {
    let cfg = IvpConfig {
        epsilon0: c.float("solver.epsilon0"),
        rel_tol: c.float("solver.rel_tol"),
        abs_tol: c.float("solver.abs_tol"),
        r_max: c.float("solver.r_max"),
        grow_factor: c.float("solver.grow_factor"),
        floor_u: c.float("solver.floor_u"),
        picard_iterations: c.int("solver.picard_iterations"),
    };
    cfg.validate()?;
    Ok(cfg)
}

struct Solved {
    potential: Potential,
    pair: PerturbationPair,
    config: IvpConfig,
    result: ShootingResult,
}

fn shoot_configured(c: &RunConfig) -> CliResult<Solved> {
    let potential = potential(c)?;
    let pair = pair(c)?;
    let config = ivp_config(c)?;
    let problem = LogProblem::new(potential.clone(), pair);
    let result = shoot(
        &problem,
        c.float("task.beta_lo"),
        c.float("task.beta_hi"),
        c.int("task.samples"),
        c.float("task.tol"),
        &config,
    )?;
    for r in &result.rejected {
        log::info!("rejected [{}, {}]: {}", r.interval.0, r.interval.1, r.reason);
    }
    Ok(Solved {
        potential,
        pair,
        config,
        result,
    })
}

fn ground(solved: &Solved) -> CliResult<&DecayingSolution> {
    solved
        .result
        .solutions
        .first()
        .ok_or_else(|| Error::NoBracket("no decaying solution in the scanned range".into()).into())
}

fn csv_rows(header: &str, rows: impl Iterator<Item = Vec<f64>>) -> Vec<u8> {
    let mut out = Vec::new();
    writeln!(out, "{header}").expect("write to memory");
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
        writeln!(out, "{}", cells.join(",")).expect("write to memory");
    }
    out
}

fn profile_csv<F: RadialFunction + ?Sized>(u: &F, points: usize) -> CliResult<Vec<u8>> {
    if points < 2 {
        return Err("task.profile_points must be at least 2".into());
    }
    let end = u.r_end();
    Ok(csv_rows(
        "r,u,du",
        (0..points).map(|i| {
            let r = end * i as f64 / (points - 1) as f64;
            vec![r, u.value(r), u.derivative(r)]
        }),
    ))
}

fn classification_csv(samples: &[ScanSample]) -> Vec<u8> {
    let mut out = Vec::new();
    writeln!(out, "beta,classification,witness").expect("write to memory");
    for s in samples {
        writeln!(
            out,
            "{:.16e},{},{:.16e}",
            s.beta,
            s.classification.tag(),
            s.classification.witness()
        )
        .expect("write to memory");
    }
    out
}

/// Comparison with the closed-form Gausson `e^{(N+c)/2 − r²/2}` of `V ≡ c`.
#[derive(Serialize)]
struct GaussonCheck {
    beta: f64,
    relative_error: f64,
    /// Sup distance on `[0, min(6, r_max)]`.
    sup_distance: f64,
}

fn gausson_check(solved: &Solved, u: &DecayingSolution) -> Option<GaussonCheck> {
    let c = match solved.potential.kind() {
        logschroed_core::potential::PotentialKind::Constant { c } if solved.pair.is_trivial() => *c,
        _ => return None,
    };
    let a = 0.5 * (solved.potential.dim() as f64 + c);
    let end = u.r_end().min(6.0);
    let sup = (0..=600)
        .map(|i| end * i as f64 / 600.0)
        .fold(0.0_f64, |m, r| m.max((u.value(r) - (a - 0.5 * r * r).exp()).abs()));
    Some(GaussonCheck {
        beta: a.exp(),
        relative_error: (u.beta - a.exp()).abs() / a.exp(),
        sup_distance: sup,
    })
}

#[derive(Serialize)]
struct SolveRecord {
    beta_star: f64,
    bracket: (f64, f64),
    residual: f64,
    multiplicity: usize,
    roots: Vec<RootSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gausson: Option<GaussonCheck>,
    rejected: Vec<Rejected>,
    classification_table: Vec<ScanSample>,
}

fn solve(ctx: &Context) -> CliResult<Outcome> {
    let c = &ctx.config;
    let solved = shoot_configured(c)?;
    let u = ground(&solved)?;
    if solved.result.multiplicity() > 1 {
        log::warn!(
            "{} decaying solutions found; reporting the one with the smallest beta",
            solved.result.multiplicity()
        );
    }
    let record = SolveRecord {
        beta_star: u.beta,
        bracket: u.bracket,
        residual: u.match_residual,
        multiplicity: solved.result.multiplicity(),
        roots: solved.result.roots(),
        gausson: gausson_check(&solved, u),
        rejected: solved.result.rejected.clone(),
        classification_table: solved.result.scan.samples.clone(),
    };
    let files = vec![
        ("profile.csv".to_string(), profile_csv(u, c.int("task.profile_points"))?),
        ("classification.csv".to_string(), classification_csv(&solved.result.scan.samples)),
    ];
    Outcome::new(&record, true, files)
}

#[derive(Serialize)]
struct ScanRecord {
    multiplicity: usize,
    /// Ratio between consecutive scan heights; roots closer than this can
    /// be missed.
    cell_ratio: f64,
    roots: Vec<RootSummary>,
    brackets: Vec<(f64, f64)>,
    candidates: Vec<(f64, f64)>,
    rejected: Vec<Rejected>,
    classification_table: Vec<ScanSample>,
}

fn scan(ctx: &Context) -> CliResult<Outcome> {
    let c = &ctx.config;
    let solved = shoot_configured(c)?;
    let n = c.int("task.samples");
    let cell_ratio = (c.float("task.beta_hi") / c.float("task.beta_lo")).powf(1.0 / (n.max(2) - 1) as f64);
    log::warn!("roots closer than one scan cell (factor {cell_ratio:.4} in beta) can be missed");
    let scan = &solved.result.scan;
    let record = ScanRecord {
        multiplicity: solved.result.multiplicity(),
        cell_ratio,
        roots: solved.result.roots(),
        brackets: scan.brackets.clone(),
        candidates: scan.candidates.clone(),
        rejected: solved.result.rejected.clone(),
        classification_table: scan.samples.clone(),
    };
    let mut files = vec![("classification.csv".to_string(), classification_csv(&scan.samples))];
    for (k, u) in solved.result.solutions.iter().enumerate() {
        files.push((format!("profile_{k}.csv"), profile_csv(u, c.int("task.profile_points"))?));
    }
    Outcome::new(&record, true, files)
}

#[derive(Serialize)]
struct LevelCheck {
    reference: f64,
    relative_error: f64,
}

#[derive(Serialize)]
struct EnergyRecord {
    beta_star: f64,
    cells: usize,
    #[serde(flatten)]
    functionals: Functionals,
    second_pass_t: f64,
    scaling_shift: f64,
    scaling_t: f64,
    /// `|t_{e^{s/2}u} − (t_u − s)|`.
    scaling_defect: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    gausson_level: Option<LevelCheck>,
}

const LEVEL_TOLERANCE: f64 = 1e-5;
const IDEMPOTENCE_TOLERANCE: f64 = 1e-10;
const SCALING_TOLERANCE: f64 = 1e-9;
const GAUSSON_LEVEL_TOLERANCE: f64 = 1e-4;

fn energy(ctx: &Context) -> CliResult<Outcome> {
    let c = &ctx.config;
    let solved = shoot_configured(c)?;
    let u = ground(&solved)?;
    let (pot, pair) = (&solved.potential, &solved.pair);
    let cells = c.int("task.cells");
    let profile = RadialProfile::from_function(u, pot.dim(), u.r_end(), cells)?;
    let f = functionals(&profile, pot, pair)?;
    let (_, projected) = nehari_project(&profile, pot, pair)?;
    let (second, _) = nehari_project(&projected, pot, pair)?;
    let s = c.float("task.scaling_shift");
    let (scaling_t, _) = nehari_project(&profile.scaled((0.5 * s).exp()), pot, pair)?;
    let gausson = match pot.kind() {
        logschroed_core::potential::PotentialKind::Constant { c } if *c == 0.0 && pair.is_trivial() => {
            let reference = gausson_level(pot.dim());
            Some(LevelCheck {
                reference,
                relative_error: (f.i - reference).abs() / reference,
            })
        }
        _ => None,
    };
    let record = EnergyRecord {
        beta_star: u.beta,
        cells,
        functionals: f,
        second_pass_t: second,
        scaling_shift: s,
        scaling_t,
        scaling_defect: (scaling_t - (f.t_u - s)).abs(),
        gausson_level: gausson,
    };
    let passed = record.functionals.level_residual <= LEVEL_TOLERANCE
        && second.abs() < IDEMPOTENCE_TOLERANCE
        && record.scaling_defect <= SCALING_TOLERANCE
        && record
            .gausson_level
            .as_ref()
            .is_none_or(|g| g.relative_error <= GAUSSON_LEVEL_TOLERANCE);

    // the fibering map s ↦ I(e^{s/2}u), maximal at s = t_u
    let fibre: Vec<Vec<f64>> = (0..=40)
        .map(|k| {
            let s = -2.0 + 0.1 * k as f64;
            let g = functionals(&profile.scaled((0.5 * s).exp()), pot, pair)?;
            Ok(vec![s, g.i, g.j])
        })
        .collect::<CliResult<_>>()?;
    let files = vec![("fibre.csv".to_string(), csv_rows("s,I,J", fibre.into_iter()))];
    Outcome::new(&record, passed, files)
}

#[derive(Serialize)]
struct RootDiagnostics {
    beta: f64,
    identity_defect: f64,
    identity_tolerance: f64,
    max_energy: f64,
    positive: bool,
    final_ratio: f64,
    /// Absent when the potential fails the sign condition on `G′`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pattern: Option<Pattern>,
    tail: TailReport,
    passed: bool,
}

#[derive(Serialize)]
struct ContradictionSummary {
    strictly_decreasing: bool,
    e1_sign_changes: usize,
    min_e1: f64,
    min_q: f64,
}

#[derive(Serialize)]
struct DiagnoseRecord {
    v2: V2Verdict,
    /// Whether the tail checks count towards the verdict.
    growth_ok: bool,
    roots: Vec<RootDiagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ratio: Option<RatioReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    contradiction: Option<ContradictionSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    large_beta: Vec<LargeBetaReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    large_beta_decreasing: Option<bool>,
}

const FINAL_RATIO_TOLERANCE: f64 = 1e-6;
const IDENTITY_TOLERANCE: f64 = 1e-5;

fn v2_grid(c: &RunConfig) -> CliResult<Vec<f64>> {
    let (lo, hi, n) = (c.float("task.v2_r_min"), c.float("task.v2_r_max"), c.int("task.v2_points"));
    if !(lo > 0.0 && hi > lo && hi.is_finite() && n >= 2) {
        return Err("task.v2_r_min/v2_r_max/v2_points must give 0 < r_min < r_max and at least 2 points".into());
    }
    Ok(geometric_grid(lo, hi, n))
}

fn diagnose(ctx: &Context) -> CliResult<Outcome> {
    let c = &ctx.config;
    let solved = shoot_configured(c)?;
    ground(&solved)?;
    let (pot, pair) = (&solved.potential, &solved.pair);
    let points = c.int("task.mesh_points");
    let v2 = check_v2(pot, &v2_grid(c)?)?;
    // Gaussian decay is only claimed when V grows at least like (1 − N) log r
    let growth_ok = check_v1(pot).ratio_ok;
    let mut files = Vec::new();
    let mut roots = Vec::new();
    for (k, u) in solved.result.solutions.iter().enumerate() {
        let mesh = diagnostic_mesh(solved.config.epsilon0, u.r_end(), points)?;
        let e = energy_profile(u, pot, pair, &mesh)?;
        let mut buf = Vec::new();
        e.write_csv(&mut buf)?;
        files.push((format!("energy_{k}.csv"), buf));
        let pattern = if v2.passed() {
            Some(energy_pattern(&e, pot)?)
        } else {
            None
        };
        let tail = tail_checks(u, pot.dim(), points)?;
        let identity_tolerance = IDENTITY_TOLERANCE * (1.0 + e.max_abs_energy());
        let mut passed = e.identity_defect() <= identity_tolerance;
        if growth_ok {
            passed &= tail.passed();
        }
        if let Some(p) = &pattern {
            passed &= p.passed() && e.positive() && e.final_ratio() <= FINAL_RATIO_TOLERANCE;
        }
        roots.push(RootDiagnostics {
            beta: u.beta,
            identity_defect: e.identity_defect(),
            identity_tolerance,
            max_energy: e.max_energy(),
            positive: e.positive(),
            final_ratio: e.final_ratio(),
            pattern,
            tail,
            passed,
        });
    }
    let (mut ratio, mut contradiction) = (None, None);
    if let [u1, u2, ..] = solved.result.solutions.as_slice() {
        let end = u1.r_end().min(u2.r_end());
        let mesh = diagnostic_mesh(solved.config.epsilon0, end, points)?;
        ratio = Some(ratio_monotonicity(u1, u2, &mesh)?);
        let q = contradiction_quantity(u1, u2, pot, pair, &mesh)?;
        files.push((
            "contradiction.csv".to_string(),
            csv_rows("r,Q", q.radii.iter().zip(&q.q).map(|(r, q)| vec![*r, *q])),
        ));
        contradiction = Some(ContradictionSummary {
            strictly_decreasing: q.strictly_decreasing,
            e1_sign_changes: q.e1_sign_changes,
            min_e1: q.min_e1,
            min_q: q.q.iter().copied().fold(f64::INFINITY, f64::min),
        });
    }
    let problem = LogProblem::new(pot.clone(), *pair);
    let large_beta: Vec<LargeBetaReport> = c
        .floats("task.large_beta")
        .iter()
        .map(|&b| large_beta_check(&problem, b, &solved.config))
        .collect::<Result<_, _>>()?;
    let large_beta_decreasing =
        (!large_beta.is_empty()).then(|| large_beta.windows(2).all(|w| w[1].deviation < w[0].deviation));
    if !large_beta.is_empty() {
        files.push((
            "large_beta.csv".to_string(),
            csv_rows(
                "beta,deviation,scaled_first_zero",
                large_beta.iter().map(|l| vec![l.beta, l.deviation, l.scaled_first_zero]),
            ),
        ));
    }
    let passed = roots.iter().all(|r| r.passed)
        && ratio.as_ref().is_none_or(|r| r.monotone)
        && large_beta_decreasing.unwrap_or(true);
    let record = DiagnoseRecord {
        v2,
        growth_ok,
        roots,
        ratio,
        contradiction,
        large_beta,
        large_beta_decreasing,
    };
    Outcome::new(&record, passed, files)
}

#[derive(Serialize)]
struct SpectrumRecord {
    beta_star: f64,
    r_box: f64,
    eigenvalues_by_level: Vec<Level>,
    extrapolated: Vec<f64>,
    rayleigh_extrapolated: f64,
    extrapolation_spread: f64,
    converged: bool,
    verdict: Verdict,
}

fn spectrum(ctx: &Context) -> CliResult<Outcome> {
    let c = &ctx.config;
    let solved = shoot_configured(c)?;
    if !solved.pair.is_trivial() {
        return Err("spectrum needs pair.delta = 0".into());
    }
    let u = ground(&solved)?;
    let config = SpectrumConfig {
        r_box: c.float("task.r_box"),
        cells: c.int("task.spectrum_cells"),
        levels: c.int("task.levels"),
        count: c.int("task.count"),
        shift: c.float("task.shift"),
    };
    let s = lowest_eigenvalues(u, &solved.potential, &config)?;
    let verdict = nondegeneracy_check(&s, c.float("task.tol_zero"));
    let header: Vec<String> = std::iter::once("r".to_string())
        .chain((0..s.eigenvectors.len()).map(|k| format!("phi{k}")))
        .collect();
    let vectors = csv_rows(
        &header.join(","),
        s.radii.iter().enumerate().map(|(i, &r)| {
            std::iter::once(r).chain(s.eigenvectors.iter().map(|v| v[i])).collect()
        }),
    );
    let level_header: Vec<String> = ["cells".to_string(), "h".to_string()]
        .into_iter()
        .chain((0..s.extrapolated.len()).map(|k| format!("lambda{k}")))
        .chain(std::iter::once("rayleigh".to_string()))
        .collect();
    let levels = csv_rows(
        &level_header.join(","),
        s.eigenvalues_by_level.iter().map(|l| {
            [l.cells as f64, l.h]
                .into_iter()
                .chain(l.eigenvalues.iter().copied())
                .chain(std::iter::once(l.rayleigh))
                .collect()
        }),
    );
    let passed = verdict.is_nondegenerate();
    let record = SpectrumRecord {
        beta_star: u.beta,
        r_box: s.r_box,
        eigenvalues_by_level: s.eigenvalues_by_level,
        extrapolated: s.extrapolated,
        rayleigh_extrapolated: s.rayleigh_extrapolated,
        extrapolation_spread: s.extrapolation_spread,
        converged: s.converged,
        verdict,
    };
    let files = vec![
        ("eigenvectors.csv".to_string(), vectors),
        ("levels.csv".to_string(), levels),
    ];
    Outcome::new(&record, passed, files)
}

#[derive(Serialize)]
struct PowerRecord {
    alpha: f64,
    dim: usize,
    rows: Vec<LimitRow>,
    decreasing: bool,
    final_sup_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_final: Option<f64>,
    cache: String,
}

/// Cache directory for reference solutions: `LOGSCHROED_CACHE` if set,
/// else `cache/` under the output directory.
pub fn cache_dir(out_dir: &std::path::Path) -> PathBuf {
    match std::env::var_os("LOGSCHROED_CACHE") {
        Some(p) if !p.is_empty() => PathBuf::from(p),
        _ => out_dir.join("cache"),
    }
}

fn powerlimit(ctx: &Context) -> CliResult<Outcome> {
    let c = &ctx.config;
    let config = ivp_config(c)?;
    let alpha = c.float("task.alpha");
    let dim = c.int("potential.dim");
    let dir = cache_dir(&ctx.out_dir);
    let cache = ReferenceCache::new(Some(&dir));
    let study = limit_study(alpha, c.floats("task.sigmas"), dim, &config, &cache)?;
    let final_sup_error = study.rows.last().expect("non-empty sigma list").sup_error;
    let max_final = Some(c.float("task.max_final")).filter(|m| m.is_finite());
    if !study.decreasing {
        log::warn!("sup errors do not decrease along the sigma list");
    }
    let passed = study.decreasing && max_final.is_none_or(|m| final_sup_error <= m);
    let mut table = Vec::new();
    study.write_csv(&mut table)?;
    let record = PowerRecord {
        alpha,
        dim,
        decreasing: study.decreasing,
        rows: study.rows,
        final_sup_error,
        max_final,
        cache: dir.display().to_string(),
    };
    Outcome::new(&record, passed, vec![("limit.csv".to_string(), table)])
}

#[derive(Serialize)]
struct CheckV2Record {
    verdict: V2Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    v1_advisory: Option<V1Advisory>,
    r_min: f64,
    r_max: f64,
    points: usize,
}

fn checkv2(ctx: &Context) -> CliResult<Outcome> {
    let c = &ctx.config;
    let pot = potential(c)?;
    let grid = v2_grid(c)?;
    let verdict = check_v2(&pot, &grid)?;
    let v1 = check_v1(&pot);
    let v1 = if finite::check(&v1).is_ok() {
        Some(v1)
    } else {
        log::warn!("growth advisory produced non-finite values and is omitted");
        None
    };
    let rows: Vec<Vec<f64>> = grid
        .iter()
        .map(|&r| Ok(vec![r, eval_g(&pot, r)?, eval_g_prime(&pot, r)?]))
        .collect::<Result<_, Error>>()?;
    let passed = verdict.passed();
    let record = CheckV2Record {
        verdict,
        v1_advisory: v1,
        r_min: grid[0],
        r_max: *grid.last().expect("grid has points"),
        points: grid.len(),
    };
    Outcome::new(&record, passed, vec![("g.csv".to_string(), csv_rows("r,G,G_prime", rows.into_iter()))])
}
