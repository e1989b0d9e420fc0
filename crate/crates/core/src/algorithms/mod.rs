//! Population-based optimizers behind one generation-synchronous contract.
//!
//! A run samples (or receives) an initial population, evaluates it, and then
//! repeats for every generation: propose new positions, repair them into
//! the space, evaluate the batch, update the incumbent. Fitness is always
//! minimized internally; maximization problems are negated on the way in
//! and un-negated in reports.

use std::time::Instant;

use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::engine::{
    json_hash, seconds_since, Checkpoint, CheckpointHeader, CoordRng, Ctx, Evaluator, GenerationRecord, RunLog,
};
use crate::error::{OptError, Result};
use crate::pesa::{Pesa, PesaParams, PesaVariant};
use crate::problems::{FitnessSpec, Mode};
use crate::space::{SearchSpace, Value};

pub mod bat;
pub mod de;
pub mod es;
pub mod gwo;
pub mod hho;
pub mod mfo;
pub mod pso;
pub mod sa;
pub mod woa;

pub use bat::{Bat, BatParams};
pub use de::{De, DeParams};
pub use es::{Es, EsParams};
pub use gwo::{Gwo, GwoParams};
pub use hho::{Hho, HhoParams};
pub use mfo::{Mfo, MfoParams};
pub use pso::{Pso, PsoParams};
pub use sa::{Sa, SaParams};
pub use woa::{Woa, WoaParams};

/// Position of the current generation within the run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Generation {
    /// Zero-based index of the generation being computed.
    pub index: usize,
    pub total: usize,
}

impl Generation {
    /// `index / total`, in `[0, 1)`.
    pub fn progress(&self) -> f64 {
        self.index as f64 / self.total.max(1) as f64
    }
}

pub trait Optimizer: Send {
    fn name(&self) -> &'static str;

    /// Bumped when the state layout or update rules change.
    fn version(&self) -> u32 {
        1
    }

    /// Number of points in the initial population.
    fn population_size(&self) -> usize;

    fn initial_population(&mut self, ctx: &mut Ctx) -> Vec<Vec<f64>> {
        let n = self.population_size();
        let (space, rng) = ctx.space_and_rng();
        (0..n).map(|_| space.sample_internal(rng)).collect()
    }

    /// Evaluates the initial population and sets up the state.
    fn initialize(&mut self, ctx: &mut Ctx, population: Vec<Vec<f64>>) -> Result<()>;

    fn step(&mut self, ctx: &mut Ctx, gen: Generation) -> Result<()>;

    /// Current members with their canonical fitness.
    fn members(&self) -> Vec<(Vec<f64>, f64)>;

    /// Overwrites the worst members with already evaluated points.
    fn inject(&mut self, replacements: Vec<(Vec<f64>, f64)>);

    fn save_state(&self) -> serde_json::Value;

    fn load_state(&mut self, state: serde_json::Value) -> Result<()>;
}

pub(crate) fn to_state<T: Serialize>(state: &T) -> serde_json::Value {
    serde_json::to_value(state).expect("optimizer state serializes")
}

pub(crate) fn from_state<T: DeserializeOwned>(state: serde_json::Value) -> Result<T> {
    serde_json::from_value(state).map_err(|e| OptError::Checkpoint(format!("bad optimizer state: {e}")))
}

/// Indices sorted by ascending fitness; ties keep their original order.
pub(crate) fn argsort(ys: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..ys.len()).collect();
    idx.sort_by(|&a, &b| ys[a].total_cmp(&ys[b]));
    idx
}

pub(crate) fn mean_position(xs: &[Vec<f64>]) -> Vec<f64> {
    let d = xs.first().map_or(0, Vec::len);
    let mut m = vec![0.0; d];
    for x in xs {
        for (mj, xj) in m.iter_mut().zip(x) {
            *mj += xj;
        }
    }
    let n = xs.len().max(1) as f64;
    m.iter_mut().for_each(|v| *v /= n);
    m
}

/// Replaces the worst entries of `(xs, ys)` with `replacements`, in order.
pub(crate) fn replace_worst(xs: &mut [Vec<f64>], ys: &mut [f64], replacements: Vec<(Vec<f64>, f64)>) -> Vec<usize> {
    let order = argsort(ys);
    let mut slots = Vec::new();
    for ((x, y), &slot) in replacements.into_iter().zip(order.iter().rev()) {
        xs[slot] = x;
        ys[slot] = y;
        slots.push(slot);
    }
    slots
}

pub(crate) fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(OptError::Config(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

pub(crate) fn check_min_population(alg: &str, n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(OptError::Config(format!("{alg} needs a population of at least {min}, got {n}")));
    }
    Ok(())
}

/// Algorithm selection plus hyperparameters, as written in run configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum AlgorithmConfig {
    Gwo(GwoParams),
    De(DeParams),
    Pso(PsoParams),
    Sa(SaParams),
    Es(EsParams),
    Bat(BatParams),
    Mfo(MfoParams),
    Woa(WoaParams),
    Hho(HhoParams),
    Pesa(PesaParams),
    Pesa2(PesaParams),
}

pub const ALGORITHM_NAMES: [&str; 11] = [
    "gwo", "de", "pso", "sa", "es", "bat", "mfo", "woa", "hho", "pesa", "pesa2",
];

impl AlgorithmConfig {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmConfig::Gwo(_) => "gwo",
            AlgorithmConfig::De(_) => "de",
            AlgorithmConfig::Pso(_) => "pso",
            AlgorithmConfig::Sa(_) => "sa",
            AlgorithmConfig::Es(_) => "es",
            AlgorithmConfig::Bat(_) => "bat",
            AlgorithmConfig::Mfo(_) => "mfo",
            AlgorithmConfig::Woa(_) => "woa",
            AlgorithmConfig::Hho(_) => "hho",
            AlgorithmConfig::Pesa(_) => "pesa",
            AlgorithmConfig::Pesa2(_) => "pesa2",
        }
    }

    /// Default hyperparameters for a named algorithm.
    pub fn default_for(name: &str) -> Option<Self> {
        Some(match name {
            "gwo" => AlgorithmConfig::Gwo(GwoParams::default()),
            "de" => AlgorithmConfig::De(DeParams::default()),
            "pso" => AlgorithmConfig::Pso(PsoParams::default()),
            "sa" => AlgorithmConfig::Sa(SaParams::default()),
            "es" => AlgorithmConfig::Es(EsParams::default()),
            "bat" => AlgorithmConfig::Bat(BatParams::default()),
            "mfo" => AlgorithmConfig::Mfo(MfoParams::default()),
            "woa" => AlgorithmConfig::Woa(WoaParams::default()),
            "hho" => AlgorithmConfig::Hho(HhoParams::default()),
            "pesa" => AlgorithmConfig::Pesa(PesaParams::default()),
            "pesa2" => AlgorithmConfig::Pesa2(PesaParams::default()),
            _ => return None,
        })
    }

    /// Parses `{"name": ..., <hyperparameters>}`; unknown keys are rejected.
    pub fn from_json(doc: &serde_json::Value) -> Result<Self> {
        let name = doc
            .get("name")
            .and_then(|v| v.as_str())
            .ok_or_else(|| OptError::Config("algorithm block needs a `name`".into()))?;
        if !ALGORITHM_NAMES.contains(&name) {
            return Err(OptError::Config(format!(
                "unknown algorithm `{name}`; registry: {}",
                ALGORITHM_NAMES.join(", ")
            )));
        }
        let cfg: AlgorithmConfig =
            serde_json::from_value(doc.clone()).map_err(|e| OptError::Config(format!("algorithm `{name}`: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("configs serialize")
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AlgorithmConfig::Gwo(p) => p.validate(),
            AlgorithmConfig::De(p) => p.validate(),
            AlgorithmConfig::Pso(p) => p.validate(),
            AlgorithmConfig::Sa(p) => p.validate(),
            AlgorithmConfig::Es(p) => p.validate(),
            AlgorithmConfig::Bat(p) => p.validate(),
            AlgorithmConfig::Mfo(p) => p.validate(),
            AlgorithmConfig::Woa(p) => p.validate(),
            AlgorithmConfig::Hho(p) => p.validate(),
            AlgorithmConfig::Pesa(p) | AlgorithmConfig::Pesa2(p) => p.validate(),
        }
    }

    pub fn population_size(&self) -> usize {
        self.build().population_size()
    }

    pub fn build(&self) -> Box<dyn Optimizer> {
        match self.clone() {
            AlgorithmConfig::Gwo(p) => Box::new(Gwo::new(p)),
            AlgorithmConfig::De(p) => Box::new(De::new(p)),
            AlgorithmConfig::Pso(p) => Box::new(Pso::new(p)),
            AlgorithmConfig::Sa(p) => Box::new(Sa::new(p)),
            AlgorithmConfig::Es(p) => Box::new(Es::new(p)),
            AlgorithmConfig::Bat(p) => Box::new(Bat::new(p)),
            AlgorithmConfig::Mfo(p) => Box::new(Mfo::new(p)),
            AlgorithmConfig::Woa(p) => Box::new(Woa::new(p)),
            AlgorithmConfig::Hho(p) => Box::new(Hho::new(p)),
            AlgorithmConfig::Pesa(p) => Box::new(Pesa::new(PesaVariant::Classic, p)),
            AlgorithmConfig::Pesa2(p) => Box::new(Pesa::new(PesaVariant::Modern, p)),
        }
    }
}

/// Everything that defines a run except its length and initial population.
#[derive(Clone, Debug)]
pub struct OptimizerConfig {
    pub algorithm: AlgorithmConfig,
    pub space: SearchSpace,
    pub fitness: FitnessSpec,
    pub seed: Option<u64>,
    pub workers: usize,
}

impl OptimizerConfig {
    pub fn new(algorithm: AlgorithmConfig, space: SearchSpace, fitness: FitnessSpec) -> Self {
        OptimizerConfig {
            algorithm,
            space,
            fitness,
            seed: None,
            workers: 1,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn mode(&self) -> Mode {
        self.fitness.mode
    }

    /// Hash over everything that affects the iterate sequence. The worker
    /// count is excluded since results do not depend on it.
    pub fn config_hash(&self, seed: u64, total_generations: usize) -> String {
        json_hash(&serde_json::json!({
            "algorithm": self.algorithm.to_json(),
            "space": self.space.to_json(),
            "problem": self.fitness.name,
            "mode": self.mode().to_string(),
            "seed": seed,
            "ngen": total_generations,
        }))
    }
}

/// Final answer of a run, in user units.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub x_best: Vec<Value>,
    pub x_best_internal: Vec<f64>,
    pub y_best: f64,
    pub log: RunLog,
    pub nevals: usize,
    pub seed: u64,
}

/// A run in progress. Generations can be advanced piecemeal and the state
/// checkpointed at any generation boundary.
pub struct Run {
    optimizer: Box<dyn Optimizer>,
    ctx: Ctx,
    mode: Mode,
    seed: u64,
    generation: usize,
    total: usize,
    log: RunLog,
    config_hash: String,
    started: Instant,
    elapsed_offset: f64,
}

impl Run {
    /// Sets up the optimizer and evaluates the initial population.
    pub fn new(cfg: &OptimizerConfig, ngen: usize, x0: Option<&[Vec<Value>]>) -> Result<Self> {
        cfg.algorithm.validate()?;
        if cfg.workers == 0 {
            return Err(OptError::Config("workers must be at least 1".into()));
        }
        let seed = cfg.seed.unwrap_or_else(|| rand::rng().random());
        let evaluator = Arc::new(Evaluator::new(cfg.space.clone(), cfg.fitness.clone(), cfg.workers));
        let mut ctx = Ctx::new(evaluator, CoordRng::seed_from_u64(seed));
        let mut optimizer = cfg.algorithm.build();
        let started = Instant::now();

        let population = match x0 {
            Some(points) => {
                let n = optimizer.population_size();
                if points.len() != n {
                    return Err(OptError::Config(format!(
                        "x0 has {} members, {} expects {n}",
                        points.len(),
                        optimizer.name()
                    )));
                }
                points
                    .iter()
                    .map(|p| cfg.space.encode(p))
                    .collect::<std::result::Result<Vec<_>, _>>()?
            }
            None => optimizer.initial_population(&mut ctx),
        };
        optimizer.initialize(&mut ctx, population)?;
        ctx.take_generation_values();

        Ok(Run {
            optimizer,
            ctx,
            mode: cfg.mode(),
            seed,
            generation: 0,
            total: ngen,
            log: RunLog::default(),
            config_hash: cfg.config_hash(seed, ngen),
            started,
            elapsed_offset: 0.0,
        })
    }

    /// Continues a run from a checkpoint taken with the same configuration.
    pub fn resume(cfg: &OptimizerConfig, checkpoint: &Checkpoint) -> Result<Self> {
        let header = &checkpoint.header;
        let seed = cfg
            .seed
            .ok_or_else(|| OptError::Checkpoint("resuming requires the original seed in the config".into()))?;
        let expected = cfg.config_hash(seed, header.total_generations);
        if expected != header.config_hash {
            return Err(OptError::Checkpoint(format!(
                "configuration hash mismatch: checkpoint {}, config {expected}; \
                 the algorithm, space, problem, mode, seed and ngen must match the original run",
                header.config_hash
            )));
        }
        let mut optimizer = cfg.algorithm.build();
        if header.algorithm != optimizer.name() || header.algorithm_version != optimizer.version() {
            return Err(OptError::Checkpoint(format!(
                "checkpoint is for {} v{}, this build runs {} v{}",
                header.algorithm,
                header.algorithm_version,
                optimizer.name(),
                optimizer.version()
            )));
        }
        optimizer.load_state(checkpoint.algorithm_state.clone())?;
        let evaluator = Arc::new(Evaluator::new(cfg.space.clone(), cfg.fitness.clone(), cfg.workers.max(1)));
        let ctx = Ctx::restore(evaluator, &checkpoint.ctx)?;
        Ok(Run {
            optimizer,
            ctx,
            mode: cfg.mode(),
            seed,
            generation: header.generation,
            total: header.total_generations,
            log: checkpoint.log.clone(),
            config_hash: expected,
            started: Instant::now(),
            elapsed_offset: checkpoint.log.elapsed.last().copied().unwrap_or(0.0),
        })
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn total_generations(&self) -> usize {
        self.total
    }

    pub fn is_done(&self) -> bool {
        self.generation >= self.total
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn log(&self) -> &RunLog {
        &self.log
    }

    pub fn optimizer(&self) -> &dyn Optimizer {
        self.optimizer.as_ref()
    }

    /// Best fitness so far, in user units.
    pub fn best(&self) -> Option<f64> {
        self.ctx.incumbent().map(|inc| self.mode.canonical(inc.y))
    }

    /// Runs up to `n` more generations (stopping at the configured total).
    pub fn advance(&mut self, n: usize) -> Result<()> {
        for _ in 0..n {
            if self.is_done() {
                break;
            }
            let gen = Generation {
                index: self.generation,
                total: self.total,
            };
            self.optimizer.step(&mut self.ctx, gen)?;
            let values = self.ctx.take_generation_values();
            self.generation += 1;
            let gen_best = values.iter().copied().fold(f64::INFINITY, f64::min);
            let gen_mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
            let best = self.ctx.incumbent().map_or(f64::INFINITY, |inc| inc.y);
            let record = GenerationRecord {
                generation: self.generation,
                nevals: self.ctx.nevals(),
                best: self.mode.canonical(best),
                gen_best: self.mode.canonical(gen_best),
                gen_mean: self.mode.canonical(gen_mean),
            };
            let elapsed = self.elapsed_offset + seconds_since(self.started);
            self.log.push(record, elapsed);
            log::debug!(
                "{} gen {}/{}: best {:e}",
                self.optimizer.name(),
                self.generation,
                self.total,
                record.best
            );
        }
        Ok(())
    }

    pub fn run_to_end(&mut self) -> Result<()> {
        self.advance(self.total.saturating_sub(self.generation))
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let space = self.ctx.space();
        let population = self
            .optimizer
            .members()
            .iter()
            .map(|(x, _)| space.decode_unchecked(x))
            .collect();
        Checkpoint {
            header: CheckpointHeader {
                algorithm: self.optimizer.name().to_string(),
                algorithm_version: self.optimizer.version(),
                generation: self.generation,
                total_generations: self.total,
                config_hash: self.config_hash.clone(),
            },
            ctx: self.ctx.snapshot(),
            population,
            algorithm_state: self.optimizer.save_state(),
            log: self.log.clone(),
        }
    }

    pub fn result(&self) -> RunResult {
        let inc = self.ctx.incumbent().expect("initial population was evaluated");
        RunResult {
            x_best: self.ctx.space().decode_unchecked(&inc.x),
            x_best_internal: inc.x.clone(),
            y_best: self.mode.canonical(inc.y),
            log: self.log.clone(),
            nevals: self.ctx.nevals(),
            seed: self.seed,
        }
    }
}

/// Runs `ngen` generations from a random (or given) initial population.
pub fn run_optimizer(cfg: &OptimizerConfig, ngen: usize, x0: Option<&[Vec<Value>]>) -> Result<RunResult> {
    let mut run = Run::new(cfg, ngen, x0)?;
    run.run_to_end()?;
    Ok(run.result())
}
