//! The TOML run/tune configuration document.
//!
//! ```toml
//! [problem]
//! name = "sphere"            # or: command = ["python3", "eval.py"]
//!
//! [space]                    # optional for built-in problems
//! x1 = ["float", -100, 100]
//!
//! [algorithm]
//! name = "gwo"
//! nwolves = 5
//!
//! [run]
//! ngen = 100
//! seed = 1
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use optkit::problems::{builtin, PROBLEM_NAMES};
use optkit::{AlgorithmConfig, FitnessSpec, Mode, OptimizerConfig, SearchSpace};
use serde::{Deserialize, Serialize};

use crate::error::{io_context, CliError, CliResult};
use crate::external::ExternalEvaluator;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OnFailure {
    #[default]
    Abort,
    Sentinel,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// Built-in problem name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// External evaluator: program and arguments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_s: Option<f64>,
    #[serde(default)]
    pub retries: u32,
    #[serde(default)]
    pub on_failure: OnFailure,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentinel: Option<f64>,
}

/// Fresh seed that still fits a TOML integer.
pub fn random_seed() -> u64 {
    rand::random::<u64>() >> 1
}

fn default_ngen() -> usize {
    100
}

fn default_workers() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_ngen")]
    pub ngen: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// JSON file holding the initial population.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            ngen: default_ngen(),
            seed: None,
            workers: default_workers(),
            x0: None,
            out: None,
            checkpoint: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TuneMethod {
    Grid,
    Random,
    Bayes,
    Evolution,
}

fn default_inner_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

fn default_cap() -> usize {
    10_000
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneSection {
    pub method: TuneMethod,
    /// Hyperparameter space, in the same form as `[space]`.
    pub space: serde_json::Value,
    /// Number of configurations tried; unused by grid search.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Generations per inner run; defaults to `run.ngen`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ngen: Option<usize>,
    #[serde(default = "default_inner_seeds")]
    pub inner_seeds: Vec<u64>,
    /// Grid points per hyperparameter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<usize>>,
    #[serde(default = "default_cap")]
    pub cap: usize,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_init: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub problem: ProblemConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<serde_json::Value>,
    pub algorithm: serde_json::Value,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune: Option<TuneSection>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("bad config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = io_context(std::fs::read_to_string(path), "cannot read config", path)?;
        Self::parse(&text)
    }

    pub fn algorithm(&self) -> CliResult<AlgorithmConfig> {
        Ok(AlgorithmConfig::from_json(&self.algorithm)?)
    }

    /// Search space and fitness for the `[problem]` and `[space]` blocks.
    pub fn problem(&self) -> CliResult<(SearchSpace, FitnessSpec)> {
        let p = &self.problem;
        let space = match &self.space {
            Some(doc) => Some(SearchSpace::from_json(doc).map_err(|e| CliError::Config(e.to_string()))?),
            None => None,
        };
        match (&p.name, &p.command) {
            (Some(name), None) => {
                let prob = builtin(name).ok_or_else(|| {
                    CliError::Config(format!("unknown problem `{name}`; registry: {}", PROBLEM_NAMES.join(", ")))
                })?;
                if p.timeout_s.is_some() || p.retries != 0 || p.on_failure != OnFailure::Abort {
                    return Err(CliError::Config(
                        "timeout_s, retries and on_failure apply to external commands only".into(),
                    ));
                }
                let space = space.unwrap_or(prob.space);
                let fitness = match p.mode {
                    Some(m) => prob.fitness.with_mode(m),
                    None => prob.fitness,
                };
                Ok((space, fitness))
            }
            (None, Some(command)) => {
                if command.is_empty() {
                    return Err(CliError::Config("problem.command must name a program".into()));
                }
                let space = space.ok_or_else(|| CliError::Config("an external problem needs a [space] block".into()))?;
                let sentinel = match (p.on_failure, p.sentinel) {
                    (OnFailure::Sentinel, Some(s)) if s.is_finite() => Some(s),
                    (OnFailure::Sentinel, _) => {
                        return Err(CliError::Config("on_failure = \"sentinel\" needs a finite `sentinel`".into()))
                    }
                    (OnFailure::Abort, _) => None,
                };
                let timeout = match p.timeout_s {
                    Some(t) if t > 0.0 && t.is_finite() => Some(Duration::from_secs_f64(t)),
                    Some(t) => return Err(CliError::Config(format!("timeout_s must be positive, got {t}"))),
                    None => None,
                };
                let eval = ExternalEvaluator {
                    command: command.clone(),
                    names: space.names().map(String::from).collect(),
                    timeout,
                    retries: p.retries,
                    sentinel,
                };
                let fitness = FitnessSpec::new(format!("external:{}", command.join(" ")), p.mode.unwrap_or_default(), Arc::new(eval));
                Ok((space, fitness))
            }
            _ => Err(CliError::Config("[problem] needs exactly one of `name` or `command`".into())),
        }
    }

    /// Fully resolved optimizer configuration.
    pub fn optimizer(&self, seed: u64) -> CliResult<OptimizerConfig> {
        if self.run.workers == 0 {
            return Err(CliError::Config("run.workers must be at least 1".into()));
        }
        let algorithm = self.algorithm()?;
        let (space, fitness) = self.problem()?;
        Ok(OptimizerConfig::new(algorithm, space, fitness)
            .with_seed(seed)
            .with_workers(self.run.workers))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
