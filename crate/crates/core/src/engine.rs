//! Fitness evaluation fan-out, the coordinator RNG, run logs and
//! checkpoints.
//!
//! Algorithms never touch threads. They hand a batch of internal vectors to
//! [`Ctx::evaluate`], which decodes, evaluates the batch on up to `workers`
//! threads and returns the canonical (minimization) fitness values in
//! submission order. All random draws happen on the coordinator through
//! [`CoordRng`]; evaluation workers are flagged so that a draw from a worker
//! trips a debug assertion.

use std::cell::Cell;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{FitnessError, OptError, Result};
use crate::problems::{FailurePolicy, FitnessSpec, Mode};
use crate::space::{format_values, SearchSpace, Value};

thread_local! {
    static IN_WORKER: Cell<bool> = const { Cell::new(false) };
}

/// True on evaluation worker threads.
pub fn on_worker_thread() -> bool {
    IN_WORKER.with(Cell::get)
}

/// Seeded ChaCha8 stream owned by a coordinator.
#[derive(Clone, Debug)]
pub struct CoordRng {
    inner: ChaCha8Rng,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: String,
    pub stream: u64,
    /// Word position as a decimal string (u128 does not fit JSON numbers).
    pub word_pos: String,
}

impl CoordRng {
    pub fn seed_from_u64(seed: u64) -> Self {
        CoordRng {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn state(&self) -> RngState {
        let seed: String = self.inner.get_seed().iter().map(|b| format!("{b:02x}")).collect();
        RngState {
            seed,
            stream: self.inner.get_stream(),
            word_pos: self.inner.get_word_pos().to_string(),
        }
    }

    pub fn from_state(state: &RngState) -> Result<Self> {
        let bad = || OptError::Checkpoint("malformed RNG state".into());
        if state.seed.len() != 64 {
            return Err(bad());
        }
        let mut seed = [0u8; 32];
        for (i, byte) in seed.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&state.seed[2 * i..2 * i + 2], 16).map_err(|_| bad())?;
        }
        let mut inner = ChaCha8Rng::from_seed(seed);
        inner.set_stream(state.stream);
        inner.set_word_pos(state.word_pos.parse().map_err(|_| bad())?);
        Ok(CoordRng { inner })
    }

    #[inline]
    fn check_thread() {
        debug_assert!(!on_worker_thread(), "random draw on an evaluation worker");
    }
}

impl RngCore for CoordRng {
    fn next_u32(&mut self) -> u32 {
        Self::check_thread();
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        Self::check_thread();
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        Self::check_thread();
        self.inner.fill_bytes(dest)
    }
}

/// Applies `fitness` to every decoded vector on up to `workers` threads.
///
/// Output order matches input order and the values do not depend on the
/// worker count. A panicking evaluation is reported with its index.
pub fn evaluate_population(
    fitness: &FitnessSpec,
    batch: &[Vec<Value>],
    workers: usize,
) -> Result<Vec<std::result::Result<f64, FitnessError>>> {
    let eval_one = |x: &Vec<Value>| catch_unwind(AssertUnwindSafe(|| fitness.evaluate(x)));
    let panic_error = |index: usize, payload: Box<dyn std::any::Any + Send>| {
        let message = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        OptError::WorkerPanic {
            index,
            candidate: format_values(&batch[index]),
            message,
        }
    };

    let workers = workers.max(1).min(batch.len().max(1));
    if workers == 1 {
        return batch
            .iter()
            .enumerate()
            .map(|(i, x)| eval_one(x).map_err(|p| panic_error(i, p)))
            .collect();
    }

    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<std::thread::Result<std::result::Result<f64, FitnessError>>>> =
        (0..batch.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    IN_WORKER.with(|w| w.set(true));
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= batch.len() {
                            break;
                        }
                        done.push((i, eval_one(&batch[i])));
                    }
                    done
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("worker loop does not panic") {
                slots[i] = Some(r);
            }
        }
    });
    slots
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.expect("every index evaluated").map_err(|p| panic_error(i, p)))
        .collect()
}

/// Decodes, evaluates and canonicalizes batches for one run.
#[derive(Debug)]
pub struct Evaluator {
    pub space: SearchSpace,
    pub fitness: FitnessSpec,
    pub workers: usize,
}

impl Evaluator {
    pub fn new(space: SearchSpace, fitness: FitnessSpec, workers: usize) -> Self {
        Evaluator {
            space,
            fitness,
            workers: workers.max(1),
        }
    }

    pub fn mode(&self) -> Mode {
        self.fitness.mode
    }

    /// Returns user-unit fitness values for a batch of internal vectors.
    pub fn evaluate_raw(&self, batch: &[Vec<f64>]) -> Result<Vec<f64>> {
        let decoded: Vec<Vec<Value>> = batch
            .iter()
            .map(|x| self.space.decode(x))
            .collect::<std::result::Result<_, _>>()?;
        let results = evaluate_population(&self.fitness, &decoded, self.workers)?;
        results
            .into_iter()
            .enumerate()
            .map(|(index, r)| match (r, self.fitness.on_failure) {
                (Ok(y), _) if y.is_finite() => Ok(y),
                (_, FailurePolicy::Sentinel(s)) => Ok(s),
                (Ok(y), FailurePolicy::Abort) => Err(OptError::NonFinite {
                    index,
                    candidate: format_values(&decoded[index]),
                    value: y,
                }),
                (Err(source), FailurePolicy::Abort) => Err(OptError::Evaluation {
                    index,
                    candidate: format_values(&decoded[index]),
                    source,
                }),
            })
            .collect()
    }

    /// Canonical (minimization) fitness values.
    pub fn evaluate(&self, batch: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mode = self.mode();
        Ok(self.evaluate_raw(batch)?.into_iter().map(|y| mode.canonical(y)).collect())
    }
}

/// Best point seen so far, on the canonical axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Incumbent {
    pub x: Vec<f64>,
    pub y: f64,
}

/// Per-run coordinator state handed to algorithms.
pub struct Ctx {
    evaluator: Arc<Evaluator>,
    pub rng: CoordRng,
    nevals: usize,
    incumbent: Option<Incumbent>,
    generation_values: Vec<f64>,
    record_points: bool,
    recorded: Vec<(Vec<f64>, f64)>,
}

impl Ctx {
    pub fn new(evaluator: Arc<Evaluator>, rng: CoordRng) -> Self {
        Ctx {
            evaluator,
            rng,
            nevals: 0,
            incumbent: None,
            generation_values: Vec::new(),
            record_points: false,
            recorded: Vec::new(),
        }
    }

    pub fn space(&self) -> &SearchSpace {
        &self.evaluator.space
    }

    pub fn evaluator(&self) -> &Arc<Evaluator> {
        &self.evaluator
    }

    /// The space and the RNG at once, for proposal code that needs both.
    pub fn space_and_rng(&mut self) -> (&SearchSpace, &mut CoordRng) {
        (&self.evaluator.space, &mut self.rng)
    }

    pub fn nevals(&self) -> usize {
        self.nevals
    }

    pub fn incumbent(&self) -> Option<&Incumbent> {
        self.incumbent.as_ref()
    }

    /// Keep every evaluated `(x, y)` until [`take_recorded`](Self::take_recorded).
    pub fn set_recording(&mut self, on: bool) {
        self.record_points = on;
    }

    pub fn take_recorded(&mut self) -> Vec<(Vec<f64>, f64)> {
        std::mem::take(&mut self.recorded)
    }

    /// Evaluates a batch of (already repaired) internal vectors.
    pub fn evaluate(&mut self, batch: &[Vec<f64>]) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        let ys = self.evaluator.evaluate(batch)?;
        for (x, &y) in batch.iter().zip(&ys) {
            self.observe(x, y);
        }
        Ok(ys)
    }

    /// Accounts for an evaluation performed elsewhere (sub-contexts).
    pub(crate) fn observe(&mut self, x: &[f64], y: f64) {
        self.nevals += 1;
        self.generation_values.push(y);
        if self.incumbent.as_ref().is_none_or(|inc| y < inc.y) {
            self.incumbent = Some(Incumbent { x: x.to_vec(), y });
        }
        if self.record_points {
            self.recorded.push((x.to_vec(), y));
        }
    }

    pub(crate) fn take_generation_values(&mut self) -> Vec<f64> {
        std::mem::take(&mut self.generation_values)
    }

    pub(crate) fn snapshot(&self) -> CtxState {
        CtxState {
            rng: self.rng.state(),
            nevals: self.nevals,
            incumbent: self.incumbent.clone(),
        }
    }

    pub(crate) fn restore(evaluator: Arc<Evaluator>, state: &CtxState) -> Result<Self> {
        let mut ctx = Ctx::new(evaluator, CoordRng::from_state(&state.rng)?);
        ctx.nevals = state.nevals;
        ctx.incumbent = state.incumbent.clone();
        Ok(ctx)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CtxState {
    pub rng: RngState,
    pub nevals: usize,
    pub incumbent: Option<Incumbent>,
}

/// One generation's statistics, in user units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub nevals: usize,
    pub best: f64,
    pub gen_best: f64,
    pub gen_mean: f64,
}

/// Per-generation trace of a run. Equality ignores wall-clock timings.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RunLog {
    pub records: Vec<GenerationRecord>,
    /// Seconds since the start of the run at the end of each generation.
    pub elapsed: Vec<f64>,
}

impl PartialEq for RunLog {
    fn eq(&self, other: &Self) -> bool {
        self.records.len() == other.records.len()
            && self
                .records
                .iter()
                .zip(&other.records)
                .all(|(a, b)| {
                    a.generation == b.generation
                        && a.nevals == b.nevals
                        && a.best.to_bits() == b.best.to_bits()
                        && a.gen_best.to_bits() == b.gen_best.to_bits()
                        && a.gen_mean.to_bits() == b.gen_mean.to_bits()
                })
    }
}

pub const RUNLOG_CSV_HEADER: &str = "generation,nevals,best,gen_best,gen_mean,elapsed_s";

impl RunLog {
    pub fn push(&mut self, record: GenerationRecord, elapsed: f64) {
        self.records.push(record);
        self.elapsed.push(elapsed);
    }

    pub fn best_trace(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.best).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{RUNLOG_CSV_HEADER}")?;
        for (r, t) in self.records.iter().zip(&self.elapsed) {
            writeln!(
                w,
                "{},{},{:e},{:e},{:e},{:.6}",
                r.generation, r.nevals, r.best, r.gen_best, r.gen_mean, t
            )?;
        }
        Ok(())
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"OPTKCKPT";
pub const CHECKPOINT_FORMAT: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub algorithm: String,
    pub algorithm_version: u32,
    pub generation: usize,
    pub total_generations: usize,
    pub config_hash: String,
}

/// Everything needed to continue a run at a generation boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub ctx: CtxState,
    /// Decoded population, for inspection and restarts with `x0`.
    pub population: Vec<Vec<Value>>,
    pub algorithm_state: serde_json::Value,
    pub log: RunLog,
}

impl Checkpoint {
    /// Layout: magic, format (u32 LE), header length (u64 LE), JSON header,
    /// body length (u64 LE), JSON body, SHA-256 of all preceding bytes.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let body = serde_json::to_vec(&CheckpointBody {
            ctx: &self.ctx,
            population: &self.population,
            algorithm_state: &self.algorithm_state,
            log: &self.log,
        })?;
        let mut out = Vec::with_capacity(header.len() + body.len() + 64);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_FORMAT.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(body.len() as u64).to_le_bytes());
        out.extend_from_slice(&body);
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |what: &str| OptError::Checkpoint(format!("corrupt checkpoint: {what}"));
        if bytes.len() < 8 + 4 + 8 + 8 + 32 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let (payload, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(payload).as_slice() != digest {
            return Err(corrupt("checksum mismatch"));
        }
        let format = u32::from_le_bytes(payload[8..12].try_into().unwrap());
        if format != CHECKPOINT_FORMAT {
            return Err(OptError::Checkpoint(format!(
                "unsupported checkpoint format {format} (expected {CHECKPOINT_FORMAT})"
            )));
        }
        let mut at = 12;
        let mut chunk = || -> Result<&[u8]> {
            let len_bytes = payload.get(at..at + 8).ok_or_else(|| corrupt("truncated"))?;
            let len = u64::from_le_bytes(len_bytes.try_into().unwrap()) as usize;
            let data = payload.get(at + 8..at + 8 + len).ok_or_else(|| corrupt("truncated"))?;
            at += 8 + len;
            Ok(data)
        };
        let header: CheckpointHeader = serde_json::from_slice(chunk()?)?;
        let body: CheckpointBodyOwned = serde_json::from_slice(chunk()?)?;
        Ok(Checkpoint {
            header,
            ctx: body.ctx,
            population: body.population,
            algorithm_state: body.algorithm_state,
            log: body.log,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[derive(Serialize)]
struct CheckpointBody<'a> {
    ctx: &'a CtxState,
    population: &'a Vec<Vec<Value>>,
    algorithm_state: &'a serde_json::Value,
    log: &'a RunLog,
}

#[derive(Deserialize)]
struct CheckpointBodyOwned {
    ctx: CtxState,
    population: Vec<Vec<Value>>,
    algorithm_state: serde_json::Value,
    log: RunLog,
}

/// Hex SHA-256 of a JSON document's canonical serialization.
pub fn json_hash(doc: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(doc).expect("JSON values serialize");
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Seconds elapsed since `start`.
pub(crate) fn seconds_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}
