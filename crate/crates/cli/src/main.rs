mod bench;
mod config;
mod error;
mod external;
mod list;
mod run;
mod tune;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::ConfigFile;
use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "optkit", version, about = "Metaheuristic optimization runs, tuning and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one optimizer on one problem.
    Run(RunArgs),
    /// Tune an algorithm's hyperparameters.
    Tune(TuneArgs),
    /// Run an algorithm x seed matrix on a built-in problem.
    Bench(BenchArgs),
    /// Show the registered algorithms, problems and tuners.
    List {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, required_unless_present = "verify")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, alias = "ncores")]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a checkpoint when the run stops; defaults to `<out>/checkpoint.bin`.
    #[arg(long, num_args = 0..=1)]
    checkpoint: Option<Option<PathBuf>>,
    /// Continue from a checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Stop once this many generations are done.
    #[arg(long)]
    stop_after: Option<usize>,
    /// Re-run the run recorded in a summary.json and compare.
    #[arg(long, conflicts_with_all = ["config", "resume", "stop_after"])]
    verify: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    suite: String,
    #[arg(long, value_delimiter = ',', default_value = "gwo,de,pso,hho")]
    algos: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    seeds: Vec<u64>,
    #[arg(long)]
    ngen: Option<usize>,
    #[arg(long)]
    pop: Option<usize>,
    #[arg(long, default_value = "bench_out")]
    out: PathBuf,
    #[arg(long, alias = "ncores", default_value_t = 1)]
    workers: usize,
}

/// `println!` that stays quiet when stdout is a closed pipe.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json prints")
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run(a) => {
            if let Some(summary) = a.verify {
                let report = run::cmd_verify(&summary)?;
                say!("{}", pretty(&report));
                if report["identical"] != true {
                    return Err(CliError::Runtime("re-run does not reproduce the recorded run".into()));
                }
                return Ok(());
            }
            let config = ConfigFile::load(a.config.as_deref().expect("clap enforces --config"))?;
            let seed_given = a.seed.is_some() || config.run.seed.is_some();
            let summary = run::cmd_run(
                config,
                run::RunOptions {
                    seed: a.seed,
                    workers: a.workers,
                    out: a.out,
                    checkpoint: a.checkpoint,
                    resume: a.resume,
                    stop_after: a.stop_after,
                },
            )?;
            if !seed_given {
                eprintln!("seed: {}", summary["seed"]);
            }
            say!(
                "y_best = {}  nevals = {}  generations = {}/{}",
                summary["y_best"], summary["nevals"], summary["generations"], summary["ngen"]
            );
            say!("x_best = {}", summary["x_best"]);
            Ok(())
        }
        Command::Tune(a) => {
            let config = ConfigFile::load(&a.config)?;
            let summary = tune::cmd_tune(config, a.seed, a.out)?;
            say!("{} search, seed {}, {} evaluations", summary["method"].as_str().unwrap_or("?"), summary["seed"], summary["evaluations"]);
            for (rank, row) in summary["top"].as_array().into_iter().flatten().enumerate() {
                say!("{:>3}. {:>14}  {}", rank + 1, row["objective"].to_string(), row["config"]);
            }
            Ok(())
        }
        Command::Bench(a) => {
            let opts = bench::BenchOptions {
                suite: a.suite,
                algos: a.algos,
                seeds: a.seeds,
                ngen: a.ngen,
                pop: a.pop,
                out: a.out,
                workers: a.workers,
            };
            let cells = bench::cmd_bench(&opts)?;
            let mode = optkit::problems::builtin(&opts.suite).expect("suite validated").fitness.mode;
            bench::print_table(&cells, mode);
            let failed = cells.iter().filter(|c| c.outcome.is_err()).count();
            if failed > 0 {
                return Err(CliError::Runtime(format!("{failed} of {} cells failed", cells.len())));
            }
            Ok(())
        }
        Command::List { json } => {
            if json {
                say!("{}", pretty(&list::listing()));
            } else {
                list::print_listing();
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
