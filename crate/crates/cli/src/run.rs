use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use optkit::sofc::SofcConstants;
use optkit::{Checkpoint, Run, RunLog, Value};
use serde_json::json;

use crate::config::ConfigFile;
use crate::error::{io_context, CliError, CliResult};

pub const SUMMARY_FORMAT: u32 = 1;
/// Bumped whenever the `log.csv` columns change.
pub const LOG_CSV_VERSION: u32 = 1;
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

#[derive(Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    /// `Some(None)` checkpoints to `<out>/checkpoint.bin`.
    pub checkpoint: Option<Option<PathBuf>>,
    pub resume: Option<PathBuf>,
    pub stop_after: Option<usize>,
}

fn read_x0(path: &Path) -> CliResult<Vec<Vec<Value>>> {
    let text = io_context(std::fs::read_to_string(path), "cannot read x0", path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("x0 {}: {e}", path.display())))
}

pub fn write_log(log: &RunLog, path: &Path) -> CliResult<()> {
    let f = io_context(File::create(path), "cannot write", path)?;
    io_context(log.write_csv(BufWriter::new(f)), "cannot write", path)
}

fn named(names: &[String], values: &[Value]) -> serde_json::Value {
    names
        .iter()
        .zip(values)
        .map(|(n, v)| (n.clone(), serde_json::to_value(v).expect("values serialize")))
        .collect::<serde_json::Map<_, _>>()
        .into()
}

pub fn cmd_run(mut config: ConfigFile, opts: RunOptions) -> CliResult<serde_json::Value> {
    if let Some(s) = opts.seed {
        config.run.seed = Some(s);
    }
    if let Some(w) = opts.workers {
        config.run.workers = w;
    }
    if let Some(o) = opts.out {
        config.run.out = Some(o);
    }
    match opts.checkpoint {
        Some(Some(c)) => config.run.checkpoint = Some(c),
        Some(None) => {
            let out = config.run.out.clone().unwrap_or_else(|| PathBuf::from("."));
            config.run.checkpoint = Some(out.join(CHECKPOINT_FILE));
        }
        None => {}
    }
    if opts.resume.is_some() && config.run.seed.is_none() {
        return Err(CliError::Config(
            "resuming needs the original seed (run.seed or --seed; it is echoed in summary.json)".into(),
        ));
    }
    let seed = *config.run.seed.get_or_insert_with(crate::config::random_seed);
    let cfg = config.optimizer(seed)?;
    let out = config.run.out.clone().unwrap_or_else(|| PathBuf::from("."));
    io_context(std::fs::create_dir_all(&out), "cannot create", &out)?;

    let mut run = match &opts.resume {
        Some(path) => {
            let cp = Checkpoint::load(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            Run::resume(&cfg, &cp)?
        }
        None => {
            let x0 = config.run.x0.as_deref().map(read_x0).transpose()?;
            Run::new(&cfg, config.run.ngen, x0.as_deref())?
        }
    };
    match opts.stop_after {
        Some(n) => run.advance(n.saturating_sub(run.generation()).min(run.total_generations() - run.generation()))?,
        None => run.run_to_end()?,
    }

    if let Some(path) = &config.run.checkpoint {
        run.checkpoint()
            .save(path)
            .map_err(|e| CliError::Runtime(format!("cannot write checkpoint {}: {e}", path.display())))?;
    }
    let res = run.result();
    write_log(&res.log, &out.join("log.csv"))?;

    let names: Vec<String> = cfg.space.names().map(String::from).collect();
    let mut summary = json!({
        "format": SUMMARY_FORMAT,
        "optkit_version": env!("CARGO_PKG_VERSION"),
        "algorithm": cfg.algorithm.name(),
        "algorithm_version": run.optimizer().version(),
        "checkpoint_format": optkit::engine::CHECKPOINT_FORMAT,
        "log_csv_version": LOG_CSV_VERSION,
        "config": config.to_json(),
        "seed": seed,
        "workers": cfg.workers,
        "mode": cfg.mode(),
        "generations": run.generation(),
        "ngen": run.total_generations(),
        "completed": run.is_done(),
        "x_best": named(&names, &res.x_best),
        "y_best": res.y_best,
        "nevals": res.nevals,
        "elapsed_s": res.log.elapsed.last().copied().unwrap_or(0.0),
    });
    if config.problem.name.as_deref() == Some("sofc") {
        summary["sofc_constants"] = serde_json::to_value(SofcConstants::default())?;
    }
    let path = out.join("summary.json");
    io_context(std::fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n"), "cannot write", &path)?;
    Ok(summary)
}

fn read_log_rows(path: &Path) -> CliResult<Vec<Vec<String>>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    rdr.records()
        .map(|r| {
            let r = r.map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
            // Everything but the wall-clock column.
            Ok(r.iter().take(5).map(String::from).collect())
        })
        .collect()
}

/// Re-runs the configuration echoed in `summary.json` from scratch and
/// compares the result with the recorded one and its `log.csv`.
pub fn cmd_verify(summary_path: &Path) -> CliResult<serde_json::Value> {
    let text = io_context(std::fs::read_to_string(summary_path), "cannot read", summary_path)?;
    let summary: serde_json::Value = serde_json::from_str(&text)?;
    let config: ConfigFile = serde_json::from_value(summary["config"].clone())
        .map_err(|e| CliError::Config(format!("summary config echo: {e}")))?;
    let seed = summary["seed"]
        .as_u64()
        .ok_or_else(|| CliError::Config("summary has no seed".into()))?;
    let generations = summary["generations"].as_u64().unwrap_or(config.run.ngen as u64) as usize;
    let cfg = config.optimizer(seed)?;
    let x0 = config.run.x0.as_deref().map(read_x0).transpose()?;
    let mut run = Run::new(&cfg, config.run.ngen, x0.as_deref())?;
    run.advance(generations)?;
    let res = run.result();

    let dir = summary_path.parent().unwrap_or(Path::new("."));
    let tmp = std::env::temp_dir().join(format!("optkit-verify-{}.csv", std::process::id()));
    write_log(&res.log, &tmp)?;
    let fresh = read_log_rows(&tmp);
    let _ = std::fs::remove_file(&tmp);
    let recorded_log = dir.join("log.csv");
    let log_match = if recorded_log.exists() { Some(read_log_rows(&recorded_log)? == fresh?) } else { None };

    let names: Vec<String> = cfg.space.names().map(String::from).collect();
    let y_match = summary["y_best"].as_f64() == Some(res.y_best);
    let x_match = summary["x_best"] == named(&names, &res.x_best);
    let n_match = summary["nevals"].as_u64() == Some(res.nevals as u64);
    let identical = y_match && x_match && n_match && log_match != Some(false);
    Ok(json!({
        "identical": identical,
        "y_best": {"recorded": summary["y_best"], "rerun": res.y_best},
        "x_best_match": x_match,
        "nevals_match": n_match,
        "log_match": log_match,
    }))
}
