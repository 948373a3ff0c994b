mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CliError, Context, EXIT_USAGE};
use config::{DomainConfig, RunConfig};
use output::OutDir;

/// Solvers and inequality checks for variable-exponent p-Laplacian problems.
#[derive(Parser, Debug)]
#[command(name = "pxlap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration; defaults apply to omitted blocks.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for randomized commands (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: `output.dir` from the config, else `pxlap-out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cells of an interval domain.
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    nx: Option<usize>,
    #[arg(long, global = true)]
    ny: Option<usize>,
    /// Random samples for the check commands.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Refinement levels for `eig`.
    #[arg(long, global = true)]
    levels: Option<usize>,
    /// Exponent `r` for `eig`.
    #[arg(long, global = true)]
    r: Option<f64>,
    /// Suppress the summary line on standard error.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Solve the configured problem; writes solution.csv and solve_report.json.
    Solve,
    /// Ray convexity on random pairs plus the structural checks on the integrand.
    CheckConvexity,
    /// Sign of the Díaz–Saa gap on random pairs.
    CheckDiazSaa,
    /// Weak comparison for ordered data.
    CheckComparison,
    /// First eigenvalue of the r-Laplacian over a refinement ladder.
    Eig,
    /// Hypothesis validators for the configured problem.
    Validate,
    /// One solve per value of the configured sweep parameter.
    Sweep,
}

fn build_context(cli: &Cli) -> Result<Context, CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(CliError::usage)?,
        None => RunConfig::default(),
    };
    match &mut config.domain {
        DomainConfig::Interval { n, .. } => {
            if cli.nx.is_some() || cli.ny.is_some() {
                return Err(CliError::usage(anyhow::anyhow!("--nx/--ny apply to rectangle domains; use --n")));
            }
            *n = cli.n.unwrap_or(*n);
        }
        DomainConfig::Rectangle { nx, ny, .. } => {
            if cli.n.is_some() {
                return Err(CliError::usage(anyhow::anyhow!("--n applies to interval domains; use --nx/--ny")));
            }
            *nx = cli.nx.unwrap_or(*nx);
            *ny = cli.ny.unwrap_or(*ny);
        }
    }
    if let Some(s) = cli.samples {
        config.check.samples = s;
    }
    let dir = cli.out.clone().or_else(|| config.output.dir.clone().map(PathBuf::from)).unwrap_or("pxlap-out".into());
    Ok(Context {
        seed: cli.seed.or(config.seed),
        out: OutDir::create(dir).map_err(CliError::usage)?,
        quiet: cli.quiet,
        config,
    })
}

fn run(cli: &Cli) -> Result<u8, CliError> {
    let ctx = build_context(cli)?;
    match cli.command {
        Command::Solve => commands::solve_cmd(&ctx),
        Command::CheckConvexity => commands::check_convexity_cmd(&ctx),
        Command::CheckDiazSaa => commands::check_diaz_saa_cmd(&ctx),
        Command::CheckComparison => commands::check_comparison_cmd(&ctx),
        Command::Eig => {
            let r = cli.r.unwrap_or(ctx.config.eig.r);
            let levels = cli.levels.unwrap_or(ctx.config.eig.levels);
            commands::eig_cmd(&ctx, r, levels)
        }
        Command::Validate => commands::validate_cmd(&ctx),
        Command::Sweep => commands::sweep_cmd(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(CliError { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
