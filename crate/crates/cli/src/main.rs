use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hymas_cli::{cmd_report, cmd_run, cmd_sweep, CliError, CostAxis, ReportOptions, RunOptions};

#[derive(Parser)]
#[command(
    name = "hymas",
    version,
    about = "Run and analyze edge/cloud multi-agent experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every dataset task under the configured architecture.
    Run(RunArgs),
    /// Run once per verification interval in the config's sweep list and
    /// write sweep.csv.
    Sweep(RunArgs),
    /// Write CSV analyses over trajectory logs.
    #[command(long_about = REPORT_HELP)]
    Report(ReportArgs),
}

const REPORT_HELP: &str = "Write CSV analyses over trajectory logs.

Each input is a trajectories.jsonl file or a run directory holding one; its
label is the run directory name. Output files and columns:

  frontier.csv           label,cost,performance,on_frontier
  histogram.csv          label,interventions,count,frequency
  histogram_summary.csv  label,n,mean,q1,median,q3
  confusion.csv          label,tp,fp,tn,fn,total,fn_rate,fp_rate,fn_rate_of_failures,fp_rate_of_successes
  overlap.csv            region,count
  kv_growth.csv          label,task_id,turn,context_tokens,kv_bytes

Frontier cost is the run total (dollars or joules), performance the mean
score. Confusion needs audit-mode logs. Overlap needs 2 or 3 logs and counts
solved task ids per Venn region.";

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output root; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Verification interval; overrides `run.verify_interval` (run only).
    #[arg(long)]
    verify_interval: Option<u32>,
}

#[derive(Args)]
struct ReportArgs {
    /// Trajectory logs or run directories.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value = "report")]
    out: PathBuf,
    #[arg(long)]
    frontier: bool,
    #[arg(long)]
    histogram: bool,
    #[arg(long)]
    confusion: bool,
    #[arg(long)]
    overlap: bool,
    #[arg(long)]
    kv_growth: bool,
    #[arg(long, value_enum, default_value_t = CostAxis::Dollars)]
    cost_axis: CostAxis,
}

impl From<RunArgs> for RunOptions {
    fn from(a: RunArgs) -> Self {
        RunOptions {
            config: a.config,
            out: a.out,
            parallelism: a.parallelism,
            seed: a.seed,
            verify_interval: a.verify_interval,
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run(args) => {
            let summary = cmd_run(&args.into())?;
            println!("{summary}");
        }
        Command::Sweep(args) => {
            if args.verify_interval.is_some() {
                return Err(CliError::Config(
                    "--verify-interval conflicts with the sweep list".into(),
                ));
            }
            for summary in cmd_sweep(&args.into())? {
                println!("{summary}");
            }
        }
        Command::Report(a) => {
            let written = cmd_report(&ReportOptions {
                inputs: a.inputs,
                out: a.out,
                frontier: a.frontier,
                histogram: a.histogram,
                confusion: a.confusion,
                overlap: a.overlap,
                kv_growth: a.kv_growth,
                cost_axis: a.cost_axis,
            })?;
            for path in written {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            let err = anyhow::Error::new(e).context("hymas failed");
            eprintln!("{err:#}");
            ExitCode::from(code)
        }
    }
}
