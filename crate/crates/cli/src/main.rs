use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use psinehari::{Axis, Side};
use psinehari_cli::commands::{self, FracApplyArgs};
use psinehari_cli::{CliError, CliResult, RunConfig};

#[derive(Parser)]
#[command(
    name = "psinehari",
    version,
    about = "Fractional double-phase energies, Nehari fibering and two-solution solves"
)]
struct Cli {
    /// JSON run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the output directory of the config.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads for restarts and sweeps (1 = reproducible reference).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Left,
    Right,
}

#[derive(Subcommand)]
enum Command {
    /// Check the structural hypotheses on the configured problem.
    Validate,
    /// Apply a fractional integral (no --beta) or Hilfer derivative along one axis.
    FracApply {
        #[arg(long, value_enum, default_value = "left")]
        side: SideArg,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long, default_value_t = 1)]
        axis: usize,
        /// Input field CSV.
        #[arg(long)]
        input: PathBuf,
        /// Output field CSV.
        #[arg(long = "out")]
        out: PathBuf,
    },
    /// Fibering report and curve for one direction.
    FiberReport {
        /// `sine`, `bump:SEED` or a field CSV.
        #[arg(long, default_value = "sine")]
        direction: String,
    },
    /// Compute the two solutions u* (E < 0) and v* (E > 0).
    Solve,
    /// Two-solution solves over a list of λ.
    Sweep {
        /// Comma-separated, increasing.
        #[arg(long, default_value = "1e-4,3e-4,1e-3")]
        lambdas: String,
    },
    /// Compare library values with the independent reference computations.
    Oracle {
        /// Registered quantity; all of them when omitted.
        #[arg(long)]
        check: Option<String>,
    },
}

fn run(cli: Cli) -> CliResult<i32> {
    let mut config = RunConfig::load_or_default(cli.config.as_deref())?;
    config.apply_env()?;
    if let Some(o) = cli.output {
        config.output = o;
    }
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        config.solver.jobs = j;
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let code = match cli.command {
        Command::Validate => commands::cmd_validate(&config, &mut out)?,
        Command::FracApply { side, alpha, beta, axis, input, out: path } => {
            let side = match side {
                SideArg::Left => Side::Left,
                SideArg::Right => Side::Right,
            };
            let axis = Axis::from_index(axis)?;
            commands::cmd_frac_apply(&config, &FracApplyArgs { side, alpha, beta, axis, input, output: path })?
        }
        Command::FiberReport { direction } => commands::cmd_fiber_report(&config, &direction, &mut out)?,
        Command::Solve => commands::cmd_solve(&config, &mut out)?,
        Command::Sweep { lambdas } => {
            let lambdas = commands::parse_lambdas(&lambdas)?;
            commands::cmd_sweep(&config, &lambdas, &mut out)?
        }
        Command::Oracle { check } => commands::cmd_oracle(&config, check.as_deref(), &mut out)?,
    };
    out.flush()?;
    Ok(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("psinehari: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
