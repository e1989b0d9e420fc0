//! Feedforward-network surrogates and the offline surrogate-assisted HHO.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgorithmConfig, HhoParams, OptimizerConfig, Run};
use crate::engine::{seconds_since, CoordRng, Evaluator, GenerationRecord, RunLog};
use crate::error::{OptError, Result};
use crate::problems::{FitnessSpec, Mode};
use crate::space::{SearchSpace, Value};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Fraction of the data held out for validation and early stopping.
    pub validation_split: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![64, 64],
            epochs: 300,
            learning_rate: 3e-3,
            batch_size: 32,
            validation_split: 0.2,
            patience: 60,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Layer {
    n_in: usize,
    n_out: usize,
    /// Row-major `n_out x n_in`.
    w: Vec<f64>,
    b: Vec<f64>,
}

impl Layer {
    fn glorot<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Layer {
        let limit = (6.0 / (n_in + n_out) as f64).sqrt();
        Layer {
            n_in,
            n_out,
            w: (0..n_in * n_out).map(|_| rng.random_range(-limit..limit)).collect(),
            b: vec![0.0; n_out],
        }
    }

    fn apply(&self, a: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.n_out {
            let row = &self.w[o * self.n_in..(o + 1) * self.n_in];
            out.push(self.b[o] + row.iter().zip(a).map(|(w, x)| w * x).sum::<f64>());
        }
    }
}

/// Multilayer perceptron with tanh hidden units and a linear output,
/// operating on inputs scaled to `[0, 1]` and standardized targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateNet {
    layers: Vec<Layer>,
    lower: Vec<f64>,
    range: Vec<f64>,
    y_mean: f64,
    y_std: f64,
    /// RMSE on the held-out split divided by the target standard deviation.
    pub validation_error: f64,
}

const BLOB_MAGIC: &[u8; 8] = b"OPTKSURR";
const BLOB_VERSION: u32 = 1;

impl SurrogateNet {
    pub fn input_dim(&self) -> usize {
        self.lower.len()
    }

    /// A net that predicts `value` everywhere.
    pub fn constant(lower: Vec<f64>, upper: Vec<f64>, value: f64) -> SurrogateNet {
        let range = lower.iter().zip(&upper).map(|(l, u)| u - l).collect();
        SurrogateNet {
            layers: Vec::new(),
            lower,
            range,
            y_mean: value,
            y_std: 0.0,
            validation_error: 0.0,
        }
    }

    fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.lower)
            .zip(&self.range)
            .map(|((x, l), r)| (x - l) / r)
            .collect()
    }

    /// Forward pass on a normalized input; fills `acts` with every layer's
    /// activation (input first) and returns the standardized output.
    fn forward_cached(&self, input: Vec<f64>, acts: &mut Vec<Vec<f64>>) -> f64 {
        acts.clear();
        acts.push(input);
        let last = self.layers.len().saturating_sub(1);
        for (l, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.n_out);
            layer.apply(&acts[l], &mut out);
            if l < last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(out);
        }
        acts.last().map_or(0.0, |a| a[0])
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(OptError::Config(format!(
                "surrogate expects {} inputs, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        if self.layers.is_empty() {
            return Ok(self.y_mean);
        }
        let mut acts = Vec::new();
        let z = self.forward_cached(self.normalize(x), &mut acts);
        Ok(self.y_mean + self.y_std * z)
    }

    /// Gradient of the prediction with respect to the (unscaled) input.
    pub fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.predict(x)?;
        if self.layers.is_empty() {
            return Ok(vec![0.0; x.len()]);
        }
        let mut acts = Vec::new();
        self.forward_cached(self.normalize(x), &mut acts);
        let mut delta = vec![1.0];
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let mut prev = vec![0.0; layer.n_in];
            for (o, d) in delta.iter().enumerate() {
                let row = &layer.w[o * layer.n_in..(o + 1) * layer.n_in];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += w * d;
                }
            }
            if l > 0 {
                for (p, a) in prev.iter_mut().zip(&acts[l]) {
                    *p *= 1.0 - a * a;
                }
            }
            delta = prev;
        }
        Ok(delta
            .iter()
            .zip(&self.range)
            .map(|(g, r)| self.y_std * g / r)
            .collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = BLOB_MAGIC.to_vec();
        out.extend_from_slice(&BLOB_VERSION.to_le_bytes());
        out.extend(serde_json::to_vec(self).expect("surrogate serializes"));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<SurrogateNet> {
        if bytes.len() < 12 || &bytes[..8] != BLOB_MAGIC {
            return Err(OptError::Checkpoint("not a surrogate blob".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != BLOB_VERSION {
            return Err(OptError::Checkpoint(format!("unsupported surrogate blob version {version}")));
        }
        Ok(serde_json::from_slice(&bytes[12..])?)
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grads: &[f64], offset: usize, lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.m[offset + k];
            let v = &mut self.v[offset + k];
            *m = B1 * *m + (1.0 - B1) * g;
            *v = B2 * *v + (1.0 - B2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + 1e-8);
        }
    }
}

/// Trains a network on `(internal vector, fitness)` pairs. Inputs are
/// scaled by the given bounds. Constant targets give a constant predictor.
pub fn train_surrogate(
    xs: &[Vec<f64>],
    ys: &[f64],
    lower: &[f64],
    upper: &[f64],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<SurrogateNet> {
    let d = lower.len();
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(OptError::Config("surrogate training needs matching, non-empty data".into()));
    }
    if xs.iter().any(|x| x.len() != d) {
        return Err(OptError::Config(format!("surrogate training inputs must have {d} entries")));
    }
    let n = ys.len() as f64;
    let y_mean = ys.iter().sum::<f64>() / n;
    let y_std = (ys.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(y_std > 1e-12 * y_mean.abs().max(1.0)) {
        log::warn!("surrogate targets are constant; using a constant predictor");
        return Ok(SurrogateNet::constant(lower.to_vec(), upper.to_vec(), y_mean));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut widths = vec![d];
    widths.extend(&cfg.hidden);
    widths.push(1);
    let layers: Vec<Layer> = widths.windows(2).map(|w| Layer::glorot(w[0], w[1], &mut rng)).collect();
    let mut net = SurrogateNet {
        layers,
        lower: lower.to_vec(),
        range: lower.iter().zip(upper).map(|(l, u)| u - l).collect(),
        y_mean,
        y_std,
        validation_error: f64::NAN,
    };

    let data: Vec<(Vec<f64>, f64)> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (net.normalize(x), (y - y_mean) / y_std))
        .collect();
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((cfg.validation_split * data.len() as f64).round() as usize).min(data.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();
    let score_idx: Vec<usize> = if val_idx.is_empty() { train_idx.clone() } else { val_idx.to_vec() };

    let sizes: Vec<usize> = net.layers.iter().map(|l| l.w.len() + l.b.len()).collect();
    let mut adam = Adam::new(sizes.iter().sum());
    let mut grads: Vec<(Vec<f64>, Vec<f64>)> = net
        .layers
        .iter()
        .map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()]))
        .collect();
    let mut acts = Vec::new();

    let val_rmse = |net: &SurrogateNet, acts: &mut Vec<Vec<f64>>| -> f64 {
        let sse: f64 = score_idx
            .iter()
            .map(|&i| (net.forward_cached(data[i].0.clone(), acts) - data[i].1).powi(2))
            .sum();
        (sse / score_idx.len() as f64).sqrt()
    };
    let mut best = (val_rmse(&net, &mut acts), net.layers.clone());
    let mut stale = 0;
    let batch = cfg.batch_size.max(1);

    for _epoch in 0..cfg.epochs {
        train_idx.shuffle(&mut rng);
        for chunk in train_idx.chunks(batch) {
            for (gw, gb) in &mut grads {
                gw.iter_mut().for_each(|g| *g = 0.0);
                gb.iter_mut().for_each(|g| *g = 0.0);
            }
            for &i in chunk {
                let (input, target) = &data[i];
                let out = net.forward_cached(input.clone(), &mut acts);
                let mut delta = vec![(out - target) / chunk.len() as f64];
                for l in (0..net.layers.len()).rev() {
                    let layer = &net.layers[l];
                    let (gw, gb) = &mut grads[l];
                    let a_prev = &acts[l];
                    for (o, dlt) in delta.iter().enumerate() {
                        gb[o] += dlt;
                        let row = &mut gw[o * layer.n_in..(o + 1) * layer.n_in];
                        for (g, a) in row.iter_mut().zip(a_prev) {
                            *g += dlt * a;
                        }
                    }
                    if l > 0 {
                        let mut prev = vec![0.0; layer.n_in];
                        for (o, dlt) in delta.iter().enumerate() {
                            let row = &layer.w[o * layer.n_in..(o + 1) * layer.n_in];
                            for (p, w) in prev.iter_mut().zip(row) {
                                *p += w * dlt;
                            }
                        }
                        for (p, a) in prev.iter_mut().zip(a_prev) {
                            *p *= 1.0 - a * a;
                        }
                        delta = prev;
                    }
                }
            }
            adam.t += 1;
            let mut offset = 0;
            for (layer, (gw, gb)) in net.layers.iter_mut().zip(&grads) {
                adam.update(&mut layer.w, gw, offset, cfg.learning_rate);
                offset += gw.len();
                adam.update(&mut layer.b, gb, offset, cfg.learning_rate);
                offset += gb.len();
            }
        }
        let err = val_rmse(&net, &mut acts);
        if err < best.0 {
            best = (err, net.layers.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    net.layers = best.1;
    net.validation_error = best.0;
    if net.layers.iter().any(|l| l.w.iter().chain(&l.b).any(|v| !v.is_finite())) {
        return Err(OptError::Config("surrogate training diverged".into()));
    }
    Ok(net)
}

/// Mean of several independently trained networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub members: Vec<SurrogateNet>,
}

impl Ensemble {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let mut sum = 0.0;
        for m in &self.members {
            sum += m.predict(x)?;
        }
        Ok(sum / self.members.len() as f64)
    }
}

/// Trains `m` members on bootstrap resamples, concurrently when
/// `workers > 1`. Member seeds come from `rng` in member order.
pub fn train_ensemble(
    xs: &[Vec<f64>],
    ys: &[f64],
    lower: &[f64],
    upper: &[f64],
    cfg: &TrainConfig,
    m: usize,
    workers: usize,
    rng: &mut CoordRng,
) -> Result<Ensemble> {
    let n = xs.len();
    let jobs: Vec<(Vec<Vec<f64>>, Vec<f64>, u64)> = (0..m.max(1))
        .map(|_| {
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let seed = rng.next_u64();
            (
                idx.iter().map(|&i| xs[i].clone()).collect(),
                idx.iter().map(|&i| ys[i]).collect(),
                seed,
            )
        })
        .collect();
    let train = |(bx, by, seed): &(Vec<Vec<f64>>, Vec<f64>, u64)| train_surrogate(bx, by, lower, upper, cfg, *seed);
    let members: Vec<Result<SurrogateNet>> = if workers > 1 {
        std::thread::scope(|scope| {
            let handles: Vec<_> = jobs.iter().map(|job| scope.spawn(move || train(job))).collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p)))
                .collect()
        })
    } else {
        jobs.iter().map(train).collect()
    };
    Ok(Ensemble {
        members: members.into_iter().collect::<Result<_>>()?,
    })
}

#[derive(Clone, Debug)]
pub struct NhhoConfig {
    pub space: SearchSpace,
    pub fitness: FitnessSpec,
    pub seed: u64,
    pub workers: usize,
    pub true_budget: usize,
    pub ngen_surrogate: usize,
    pub nhawks: usize,
    pub ensemble_size: usize,
    pub top_k: usize,
    pub train: TrainConfig,
}

impl NhhoConfig {
    pub fn new(space: SearchSpace, fitness: FitnessSpec, seed: u64, true_budget: usize, ngen_surrogate: usize) -> Self {
        NhhoConfig {
            space,
            fitness,
            seed,
            workers: 1,
            true_budget,
            ngen_surrogate,
            nhawks: 30,
            ensemble_size: 5,
            top_k: 5,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct NhhoResult {
    pub x_best: Vec<Value>,
    pub y_best: f64,
    pub log: RunLog,
    /// True fitness evaluations spent; always `true_budget + top_k`, or
    /// just `true_budget` when the surrogate phase is skipped.
    pub true_evals: usize,
    pub ensemble: Option<Ensemble>,
}

/// Offline surrogate-assisted HHO: sample and evaluate, train an ensemble,
/// optimize the ensemble mean, then truly re-evaluate the `top_k` best
/// surrogate points. The answer is the best true evaluation seen.
pub fn nhho_run(cfg: &NhhoConfig) -> Result<NhhoResult> {
    let space = &cfg.space;
    let d = space.dim();
    if cfg.true_budget < 10 * d {
        return Err(OptError::Config(format!(
            "nhho needs a true budget of at least 10 * dim = {}, got {}",
            10 * d,
            cfg.true_budget
        )));
    }
    let mode = cfg.fitness.mode;
    let started = std::time::Instant::now();
    let mut rng = CoordRng::seed_from_u64(cfg.seed);
    let evaluator = Evaluator::new(space.clone(), cfg.fitness.clone(), cfg.workers);

    let samples: Vec<Vec<f64>> = (0..cfg.true_budget).map(|_| space.sample_internal(&mut rng)).collect();
    let ys_raw = evaluator.evaluate_raw(&samples)?;
    let mut log = RunLog::default();
    let mut best = best_of(&samples, &ys_raw, mode);
    log.push(phase_record(1, cfg.true_budget, mode, best.1, &ys_raw), seconds_since(started));

    if cfg.ngen_surrogate == 0 || cfg.top_k == 0 {
        return Ok(NhhoResult {
            x_best: space.decode_unchecked(&best.0),
            y_best: best.1,
            log,
            true_evals: cfg.true_budget,
            ensemble: None,
        });
    }

    let ensemble = train_ensemble(
        &samples,
        &ys_raw,
        &space.lower(),
        &space.upper(),
        &cfg.train,
        cfg.ensemble_size,
        cfg.workers,
        &mut rng,
    )?;
    let shared = Arc::new(ensemble);

    let model = shared.clone();
    let model_space = space.clone();
    let surrogate_fitness = FitnessSpec::new(
        format!("surrogate:{}", cfg.fitness.name),
        mode,
        Arc::new(move |x: &[Value]| -> std::result::Result<f64, crate::error::FitnessError> {
            let internal = model_space
                .encode(x)
                .map_err(|e| crate::error::FitnessError::Evaluator(e.to_string()))?;
            model
                .predict(&internal)
                .map_err(|e| crate::error::FitnessError::Evaluator(e.to_string()))
        }),
    );

    let nhawks = cfg.nhawks.min(cfg.true_budget).max(2);
    let mut ranked: Vec<usize> = (0..samples.len()).collect();
    ranked.sort_by(|&a, &b| mode.canonical(ys_raw[a]).total_cmp(&mode.canonical(ys_raw[b])));
    let x0: Vec<Vec<Value>> = ranked[..nhawks]
        .iter()
        .map(|&i| space.decode_unchecked(&samples[i]))
        .collect();
    let hho_cfg = OptimizerConfig::new(
        AlgorithmConfig::Hho(HhoParams { nhawks }),
        space.clone(),
        surrogate_fitness,
    )
    .with_seed(rng.next_u64())
    .with_workers(cfg.workers);
    let mut run = Run::new(&hho_cfg, cfg.ngen_surrogate, Some(&x0))?;
    run.run_to_end()?;

    let inc = run.result().x_best_internal;
    let mut pool: Vec<(Vec<f64>, f64)> = vec![(inc.clone(), shared.predict(&inc)?)];
    for (x, _) in run.optimizer().members() {
        let x = space.snap(&x);
        pool.push((x.clone(), shared.predict(&x)?));
    }
    pool.sort_by(|a, b| mode.canonical(a.1).total_cmp(&mode.canonical(b.1)));
    let mut picks: Vec<Vec<f64>> = Vec::new();
    for (x, _) in &pool {
        let key = space.decode_unchecked(x);
        if picks.len() < cfg.top_k && !picks.iter().any(|p| space.decode_unchecked(p) == key) {
            picks.push(space.snap(x));
        }
    }
    let mut k = 0;
    while picks.len() < cfg.top_k {
        picks.push(space.snap(&pool[k % pool.len()].0));
        k += 1;
    }
    let ys_top = evaluator.evaluate_raw(&picks)?;
    let top_best = best_of(&picks, &ys_top, mode);
    if mode.canonical(top_best.1) < mode.canonical(best.1) {
        best = top_best;
    }
    log.push(
        phase_record(2, cfg.true_budget + picks.len(), mode, best.1, &ys_top),
        seconds_since(started),
    );

    Ok(NhhoResult {
        x_best: space.decode_unchecked(&best.0),
        y_best: best.1,
        log,
        true_evals: cfg.true_budget + picks.len(),
        ensemble: Some(Arc::try_unwrap(shared).unwrap_or_else(|a| (*a).clone())),
    })
}

fn best_of(xs: &[Vec<f64>], ys: &[f64], mode: Mode) -> (Vec<f64>, f64) {
    let i = (0..ys.len())
        .min_by(|&a, &b| mode.canonical(ys[a]).total_cmp(&mode.canonical(ys[b])))
        .expect("non-empty");
    (xs[i].clone(), ys[i])
}

fn phase_record(generation: usize, nevals: usize, mode: Mode, best: f64, ys: &[f64]) -> GenerationRecord {
    let gen_best = ys
        .iter()
        .copied()
        .min_by(|a, b| mode.canonical(*a).total_cmp(&mode.canonical(*b)))
        .unwrap_or(f64::NAN);
    GenerationRecord {
        generation,
        nevals,
        best,
        gen_best,
        gen_mean: ys.iter().sum::<f64>() / ys.len().max(1) as f64,
    }
}
