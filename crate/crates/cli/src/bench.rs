use std::io::Write;
use std::path::{Path, PathBuf};

use optkit::algorithms::ALGORITHM_NAMES;
use optkit::problems::{builtin, PROBLEM_NAMES};
use optkit::{run_optimizer, AlgorithmConfig, OptimizerConfig};
use serde_json::json;

use crate::error::{io_context, CliError, CliResult};
use crate::run::write_log;

pub const BENCH_CSV_VERSION: u32 = 1;

#[derive(Debug)]
pub struct BenchOptions {
    pub suite: String,
    pub algos: Vec<String>,
    pub seeds: Vec<u64>,
    pub ngen: Option<usize>,
    pub pop: Option<usize>,
    pub out: PathBuf,
    pub workers: usize,
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub algorithm: String,
    pub seed: u64,
    pub outcome: Result<(f64, usize), String>,
    pub elapsed_s: f64,
}

/// Default hyperparameters with the population set to roughly `pop`.
pub fn with_population(name: &str, pop: usize) -> CliResult<AlgorithmConfig> {
    let base = AlgorithmConfig::default_for(name).ok_or_else(|| {
        CliError::Config(format!("unknown algorithm `{name}`; registry: {}", ALGORITHM_NAMES.join(", ")))
    })?;
    let mut doc = base.to_json();
    let overlay = match name {
        "gwo" => json!({"nwolves": pop}),
        "de" => json!({"npop": pop}),
        "pso" => json!({"npar": pop}),
        "sa" => json!({"chains": pop, "chain_size": 1}),
        "es" => json!({"lambda_": pop, "mu": (pop / 2).max(1)}),
        "bat" => json!({"nbats": pop}),
        "mfo" => json!({"nmoths": pop}),
        "woa" => json!({"nwhales": pop}),
        "hho" => json!({"nhawks": pop}),
        // Three sub-algorithms share the budget.
        "pesa" | "pesa2" => json!({"npop": pop.div_ceil(3)}),
        _ => unreachable!("registry checked above"),
    };
    for (k, v) in overlay.as_object().expect("object") {
        doc[k] = v.clone();
    }
    Ok(AlgorithmConfig::from_json(&doc)?)
}

fn run_cell(suite: &str, alg: &AlgorithmConfig, seed: u64, ngen: usize, workers: usize, dir: &Path) -> Cell {
    let prob = builtin(suite).expect("suite checked");
    let cfg = OptimizerConfig::new(alg.clone(), prob.space, prob.fitness)
        .with_seed(seed)
        .with_workers(workers);
    let start = std::time::Instant::now();
    let outcome = match run_optimizer(&cfg, ngen, None) {
        Ok(res) => {
            let path = dir.join(format!("{}_seed{seed}.csv", alg.name()));
            match write_log(&res.log, &path) {
                Ok(()) => Ok((res.y_best, res.nevals)),
                Err(e) => Err(e.to_string()),
            }
        }
        Err(e) => Err(e.to_string()),
    };
    Cell {
        algorithm: alg.name().to_string(),
        seed,
        outcome,
        elapsed_s: start.elapsed().as_secs_f64(),
    }
}

pub fn cmd_bench(opts: &BenchOptions) -> CliResult<Vec<Cell>> {
    if !PROBLEM_NAMES.contains(&opts.suite.as_str()) {
        return Err(CliError::Config(format!(
            "unknown suite `{}`; registry: {}",
            opts.suite,
            PROBLEM_NAMES.join(", ")
        )));
    }
    if opts.workers == 0 {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    let sofc = opts.suite == "sofc";
    let ngen = opts.ngen.unwrap_or(if sofc { 300 } else { 100 });
    let pop = opts.pop.unwrap_or(if sofc { 50 } else { 30 });
    let algos = opts
        .algos
        .iter()
        .map(|a| with_population(a, pop))
        .collect::<CliResult<Vec<_>>>()?;

    let conv = opts.out.join("convergence");
    io_context(std::fs::create_dir_all(&conv), "cannot create", &conv)?;
    let mut cells = Vec::new();
    for alg in &algos {
        for &seed in &opts.seeds {
            let cell = run_cell(&opts.suite, alg, seed, ngen, opts.workers, &conv);
            if let Err(e) = &cell.outcome {
                log::warn!("{} seed {seed} failed: {e}", cell.algorithm);
            }
            cells.push(cell);
        }
    }

    let path = opts.out.join("bench.csv");
    let mut file = io_context(std::fs::File::create(&path), "cannot write", &path)?;
    io_context(
        writeln!(file, "# bench.csv v{BENCH_CSV_VERSION} ngen={ngen} pop={pop}"),
        "cannot write",
        &path,
    )?;
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| CliError::Runtime(format!("{}: {e}", path.display()));
    w.write_record(["suite", "algorithm", "seed", "status", "y_best", "nevals", "elapsed_s"])
        .map_err(csv_err)?;
    for c in &cells {
        let (status, y, n) = match &c.outcome {
            Ok((y, n)) => ("ok".to_string(), format!("{y:e}"), n.to_string()),
            Err(e) => (format!("failed: {e}"), String::new(), String::new()),
        };
        w.write_record([
            opts.suite.clone(),
            c.algorithm.clone(),
            c.seed.to_string(),
            status,
            y,
            n,
            format!("{:.3}", c.elapsed_s),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(cells)
}

/// Per-cell rows, then the best final fitness of each algorithm over seeds.
pub fn print_table(cells: &[Cell], mode: optkit::Mode) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{:<8} {:>6} {:>16} {:>8} {:>9}", "algo", "seed", "y_best", "nevals", "time_s");
    for c in cells {
        let _ = match &c.outcome {
            Ok((y, n)) => writeln!(out, "{:<8} {:>6} {:>16.8e} {:>8} {:>9.2}", c.algorithm, c.seed, y, n, c.elapsed_s),
            Err(e) => writeln!(out, "{:<8} {:>6} {:>16} {:>8} {:>9.2}  {e}", c.algorithm, c.seed, "FAILED", "-", c.elapsed_s),
        };
    }
    let mut algos: Vec<&str> = Vec::new();
    for c in cells {
        if !algos.contains(&c.algorithm.as_str()) {
            algos.push(&c.algorithm);
        }
    }
    let _ = writeln!(out, "\nbest over seeds:");
    for a in algos {
        let best = cells
            .iter()
            .filter(|c| c.algorithm == a)
            .filter_map(|c| c.outcome.as_ref().ok().map(|o| o.0))
            .reduce(|x, y| if mode.canonical(x) <= mode.canonical(y) { x } else { y });
        match best {
            Some(y) => { let _ = writeln!(out, "{a:<8} {y:>16.8e}"); }
            None => { let _ = writeln!(out, "{a:<8} {:>16}", "FAILED"); }
        }
    }
}
