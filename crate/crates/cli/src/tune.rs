use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use optkit::tune::{
    bayesian_search, evolutionary_search, grid_search, random_search, BayesConfig, EvolutionConfig, HyperSpace,
    InnerRun, TuneObjective, TuneResult,
};
use optkit::{SearchSpace, Value};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::{ConfigFile, TuneMethod};
use crate::error::{io_context, CliError, CliResult};

fn toml_value(v: &Value) -> toml::Value {
    match v {
        Value::Float(f) => toml::Value::Float(*f),
        Value::Int(i) => toml::Value::Integer(*i),
        Value::Str(s) => toml::Value::String(s.clone()),
    }
}

/// The run configuration with the winning hyperparameters written into
/// `[algorithm]` and the `[tune]` block dropped.
pub fn best_config(config: &ConfigFile, names: &[String], values: &[Value]) -> CliResult<String> {
    let mut config = config.clone();
    config.tune = None;
    let mut doc: toml::Table = toml::Table::try_from(&config).map_err(|e| CliError::Runtime(e.to_string()))?;
    let algo = doc
        .get_mut("algorithm")
        .and_then(|a| a.as_table_mut())
        .expect("algorithm block is a table");
    for (n, v) in names.iter().zip(values) {
        algo.insert(n.clone(), toml_value(v));
    }
    toml::to_string(&doc).map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn cmd_tune(mut config: ConfigFile, seed: Option<u64>, out: Option<PathBuf>) -> CliResult<serde_json::Value> {
    let tune = config
        .tune
        .clone()
        .ok_or_else(|| CliError::Config("tuning needs a [tune] block".into()))?;
    let hs = HyperSpace::from_space(SearchSpace::from_json(&tune.space).map_err(|e| CliError::Config(e.to_string()))?);
    let names = hs.names();
    let base = config.algorithm()?;
    let (space, fitness) = config.problem()?;
    let mut inner = InnerRun::new(base.clone(), space, fitness, tune.ngen.unwrap_or(config.run.ngen));
    if tune.inner_seeds.is_empty() {
        return Err(CliError::Config("tune.inner_seeds must not be empty".into()));
    }
    inner.seeds = tune.inner_seeds.clone();
    // Reject hyperparameters the algorithm does not have before any run.
    let probe = hs.space().sample(&mut ChaCha8Rng::seed_from_u64(0));
    inner.configure(&names, &probe.decoded)?;

    let seed = seed.or(tune.seed).unwrap_or_else(crate::config::random_seed);
    if let Some(t) = config.tune.as_mut() {
        t.seed = Some(seed);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let objective = TuneObjective::inner_run(inner, &hs);
    let budget = |default: usize| tune.budget.unwrap_or(default);
    let result: TuneResult = match tune.method {
        TuneMethod::Grid => {
            let levels = tune
                .levels
                .clone()
                .ok_or_else(|| CliError::Config("grid search needs tune.levels".into()))?;
            grid_search(&hs, &levels, &objective, tune.cap, tune.workers)?
        }
        TuneMethod::Random => random_search(&hs, budget(50), &objective, tune.workers, &mut rng)?,
        TuneMethod::Bayes => {
            let mut bc = BayesConfig::default();
            if let Some(n) = tune.n_init {
                bc.n_init = n;
            }
            bayesian_search(&hs, budget(50), &objective, &bc, tune.workers, &mut rng)?
        }
        TuneMethod::Evolution => {
            let mut ec = EvolutionConfig::default();
            if let Some(p) = tune.population {
                ec.population = p;
            }
            evolutionary_search(&hs, budget(50), &objective, &ec, tune.workers, &mut rng)?
        }
    };

    let out = out.or_else(|| config.run.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    io_context(std::fs::create_dir_all(&out), "cannot create", &out)?;
    let csv_path = out.join("tune.csv");
    let f = io_context(File::create(&csv_path), "cannot write", &csv_path)?;
    io_context(result.write_csv(BufWriter::new(f)), "cannot write", &csv_path)?;

    let best = result.best().expect("at least one evaluation");
    let best_path = out.join("best_config.toml");
    write_text(&best_path, &best_config(&config, &names, &best.config)?)?;

    let top: Vec<serde_json::Value> = result
        .ranked()
        .iter()
        .take(5)
        .map(|r| json!({"iteration": r.iteration, "config": named(&names, &r.config), "objective": r.objective}))
        .collect();
    let summary = json!({
        "optkit_version": env!("CARGO_PKG_VERSION"),
        "method": result.method,
        "seed": seed,
        "evaluations": result.records.len(),
        "config": config.to_json(),
        "best": {"config": named(&names, &best.config), "objective": best.objective},
        "top": top,
    });
    write_text(&out.join("tune_summary.json"), &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    Ok(summary)
}

fn named(names: &[String], values: &[Value]) -> serde_json::Value {
    names
        .iter()
        .zip(values)
        .map(|(n, v)| (n.clone(), serde_json::to_value(v).expect("values serialize")))
        .collect::<serde_json::Map<_, _>>()
        .into()
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    io_context(std::fs::write(path, text), "cannot write", path)
}
