use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use pathheat::{effective_seed, run, CliError, Params, Suite, SEED_ENV};

/// Run a pathheat check suite and write report.json plus CSV tables.
#[derive(Debug, Parser)]
#[command(name = "pathheat", version)]
struct Args {
    suite: Suite,
    /// JSON scenario; the shipped defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overridden by PATHHEAT_SEED.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Print the shipped default scenario for the suite and exit.
    #[arg(long)]
    print_config: bool,
}

fn execute(args: Args) -> Result<bool, CliError> {
    if args.print_config {
        print!("{}", args.suite.default_config());
        return Ok(true);
    }
    let seed = effective_seed(args.seed, std::env::var(SEED_ENV).ok().as_deref())?;
    let (text, origin, base) = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            let base = p.parent().map(PathBuf::from).unwrap_or_default();
            (text, p.display().to_string(), base)
        }
        None => (args.suite.default_config().to_string(), format!("default {}", args.suite.name()), PathBuf::new()),
    };
    let params = Params::parse(args.suite, &text, &origin)?;
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let report = run(args.suite, &params, seed, &base, &args.out)?;
    for c in &report.checks {
        let status = if c.pass { "PASS" } else { "FAIL" };
        match &c.error {
            Some(e) => eprintln!("{status} {}: {e}", c.name),
            None => eprintln!("{status} {}: {:.3e} (tolerance {:.3e})", c.name, c.value, c.tolerance),
        }
    }
    eprintln!(
        "{} {}: {} checks in {:.1} s",
        if report.pass { "PASS" } else { "FAIL" },
        report.suite,
        report.checks.len(),
        report.environment.wall_time_s
    );
    Ok(report.pass)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
