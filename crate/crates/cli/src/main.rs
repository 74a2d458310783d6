use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use relaxvi_cli::{cmd_bench, cmd_check, cmd_run, CliError, Overrides};

#[derive(Parser)]
#[command(
    name = "relaxvi",
    version,
    about = "Relaxed-projection splitting for monotone variational inequalities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory (overrides RELAXVI_OUTPUT_DIR and the config).
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Keep every n-th trace record.
    #[arg(long, global = true)]
    cadence: Option<usize>,

    /// Store z^k snapshots for the Fejer audit.
    #[arg(long, global = true)]
    snapshots: bool,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for check and bench.
    #[arg(long, global = true)]
    parallel: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solver on a TOML config.
    Run { config: PathBuf },
    /// Run an invariant suite, or `all`.
    Check { suite: String },
    /// Measure inner-loop iterations over a grid of theta*alpha.
    Bench { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ov = Overrides {
        output: cli.output,
        cadence: cli.cadence,
        snapshots: cli.snapshots,
        seed: cli.seed,
        parallel: cli.parallel,
    };
    let mut stdout = std::io::stdout();
    let result: Result<(), CliError> = match cli.command {
        Command::Run { config } => cmd_run(&config, &ov).map(|(dir, s)| {
            let _ = writeln!(
                stdout,
                "{}: {} iterations, stop {}, dist_x {:e}{} -> {}",
                s.problem,
                s.iterations,
                s.stop_reason,
                s.final_dist_x,
                s.final_err_x
                    .map(|e| format!(", err_x {e:e}"))
                    .unwrap_or_default(),
                dir.display()
            );
        }),
        Command::Check { suite } => cmd_check(
            &suite,
            ov.seed.unwrap_or(0),
            ov.parallel.unwrap_or(1),
            &mut stdout,
        )
        .map(|_| ()),
        Command::Bench { config } => cmd_bench(&config, &ov, &mut stdout).map(|_| ()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("relaxvi: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
