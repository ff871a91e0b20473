//! `logschroed`: solve, classify and cross-check positive radial solutions
//! of `−Δu + V(|x|)u = B(|x|) u log u²`.
//!
//! Each run writes `<command>.json` (the run record), `<command>.cfg` (the
//! resolved configuration) and CSV data files into the output directory.
//! Exit status: 0 pass, 1 fail verdict, 2 error.

mod commands;
mod config;
mod finite;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use commands::{CliResult, Context};
use config::RunConfig;

#[derive(Parser)]
#[command(name = "logschroed", version, about = "Positive radial solutions of the logarithmic Schrödinger equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (key = value lines); defaults apply without it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides output.dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Only errors on stderr, nothing on stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Ground state: smallest decaying beta and its profile.
    Solve,
    /// Classify a range of heights and count decaying solutions.
    Scan,
    /// Action, Nehari functional and projection identities.
    Energy,
    /// Energy identity, decay, ratio and large-beta diagnostics.
    Diagnose,
    /// Lowest radial eigenvalues of the linearised operator.
    Spectrum,
    /// Convergence of the power-law family to the logarithmic equation.
    Powerlimit,
    /// Sign condition on G′ for the configured potential.
    Checkv2,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Scan => "scan",
            Command::Energy => "energy",
            Command::Diagnose => "diagnose",
            Command::Spectrum => "spectrum",
            Command::Powerlimit => "powerlimit",
            Command::Checkv2 => "checkv2",
        }
    }
}

#[derive(Serialize)]
struct RunRecord<'a> {
    command: &'a str,
    version: &'a str,
    verdict: &'a str,
    threads: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_seconds: Option<f64>,
    config: &'a RunConfig,
    files: Vec<&'a str>,
    result: &'a serde_json::Value,
}

/// Writes through a temporary sibling so readers never see partial files.
fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

fn execute(cli: &Cli) -> CliResult<bool> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| format!("{}: {e}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        config.set_text("output.dir", &out.to_string_lossy());
    }
    let out_dir = PathBuf::from(config.text("output.dir"));
    std::fs::create_dir_all(&out_dir)?;
    rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global()?;
    let threads = rayon::current_num_threads();

    let name = cli.command.name();
    let started = Instant::now();
    let ctx = Context { config, out_dir };
    let outcome = commands::run(name, &ctx)?;
    for (file, bytes) in &outcome.files {
        write_atomic(&ctx.out_dir.join(file), bytes)?;
    }
    let verdict = if outcome.passed { "Pass" } else { "Fail" };
    let record = RunRecord {
        command: name,
        version: env!("CARGO_PKG_VERSION"),
        verdict,
        threads,
        elapsed_seconds: (!ctx.config.flag("output.deterministic")).then(|| started.elapsed().as_secs_f64()),
        config: &ctx.config,
        files: outcome.files.iter().map(|(f, _)| f.as_str()).collect(),
        result: &outcome.result,
    };
    finite::check(&record)?;
    // replayable with --config
    write_atomic(&ctx.out_dir.join(format!("{name}.cfg")), ctx.config.to_text().as_bytes())?;
    let record_path = ctx.out_dir.join(format!("{name}.json"));
    let mut json = serde_json::to_vec_pretty(&record)?;
    json.push(b'\n');
    write_atomic(&record_path, &json)?;
    if !cli.quiet {
        println!("{name}: {verdict} ({})", record_path.display());
    }
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(2)
        }
    }
}
