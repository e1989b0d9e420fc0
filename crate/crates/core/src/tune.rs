//! Hyperparameter search over optimizer configurations: grid, random,
//! Bayesian (Gaussian process + expected improvement) and evolutionary.
//!
//! Every tuner minimizes `mode.canonical(objective)`; the objective of a
//! configuration is usually the median best fitness of a few short inner
//! runs (see [`InnerRun`]).

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::algorithms::es::{es_offspring, es_select, EsParams, EsPopulation};
use crate::algorithms::{argsort, run_optimizer, AlgorithmConfig, OptimizerConfig};
use crate::error::{OptError, Result};
use crate::problems::{FitnessSpec, Mode};
use crate::space::{SearchSpace, Value, VariableSpec};

/// The tunable hyperparameters of an optimizer, one variable per name.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperSpace {
    space: SearchSpace,
}

impl HyperSpace {
    pub fn new(variables: Vec<VariableSpec>) -> Result<Self> {
        Ok(HyperSpace {
            space: SearchSpace::new(variables)?,
        })
    }

    pub fn from_space(space: SearchSpace) -> Self {
        HyperSpace { space }
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn names(&self) -> Vec<String> {
        self.space.names().map(str::to_string).collect()
    }

    fn unit(&self, internal: &[f64]) -> Vec<f64> {
        let lo = self.space.lower();
        let r = self.space.ranges();
        internal
            .iter()
            .zip(lo.iter().zip(&r))
            .map(|(x, (l, w))| if *w > 0.0 { (x - l) / w } else { 0.5 })
            .collect()
    }
}

type ObjectiveFn = dyn Fn(&[Value]) -> Result<f64> + Send + Sync;

/// Objective over decoded hyperparameter vectors, with an audited counter.
#[derive(Clone)]
pub struct TuneObjective {
    mode: Mode,
    f: Arc<ObjectiveFn>,
    calls: Arc<AtomicUsize>,
}

impl std::fmt::Debug for TuneObjective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TuneObjective")
            .field("mode", &self.mode)
            .field("calls", &self.calls())
            .finish()
    }
}

impl TuneObjective {
    pub fn from_fn<F>(mode: Mode, f: F) -> Self
    where
        F: Fn(&[Value]) -> Result<f64> + Send + Sync + 'static,
    {
        TuneObjective {
            mode,
            f: Arc::new(f),
            calls: Arc::new(AtomicUsize::new(0)),
        }
    }

    pub fn inner_run(recipe: InnerRun, hs: &HyperSpace) -> Self {
        let names = hs.names();
        let mode = recipe.fitness.mode;
        Self::from_fn(mode, move |values| recipe.objective(&names, values))
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Number of evaluations performed so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn evaluate(&self, config: &[Value]) -> Result<f64> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let y = (self.f)(config)?;
        if !y.is_finite() {
            return Err(OptError::Config(format!("tuning objective returned {y}")));
        }
        Ok(y)
    }

    /// Evaluates a batch on up to `workers` threads, preserving order.
    fn evaluate_batch(&self, configs: &[Vec<Value>], workers: usize) -> Result<Vec<f64>> {
        let workers = workers.max(1).min(configs.len().max(1));
        if workers == 1 {
            return configs.iter().map(|c| self.evaluate(c)).collect();
        }
        let chunk = configs.len().div_ceil(workers);
        let parts: Vec<Result<Vec<f64>>> = std::thread::scope(|s| {
            let handles: Vec<_> = configs
                .chunks(chunk)
                .map(|part| s.spawn(move || part.iter().map(|c| self.evaluate(c)).collect::<Result<Vec<f64>>>()))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(OptError::Config("tuning worker panicked".into()))))
                .collect()
        });
        let mut out = Vec::with_capacity(configs.len());
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }
}

/// Recipe for the inner objective: run `base` with the hyperparameters
/// overlaid, once per inner seed, and take the median best fitness.
#[derive(Clone, Debug)]
pub struct InnerRun {
    pub base: AlgorithmConfig,
    pub space: SearchSpace,
    pub fitness: FitnessSpec,
    pub ngen: usize,
    pub seeds: Vec<u64>,
}

impl InnerRun {
    pub fn new(base: AlgorithmConfig, space: SearchSpace, fitness: FitnessSpec, ngen: usize) -> Self {
        InnerRun {
            base,
            space,
            fitness,
            ngen,
            seeds: vec![1, 2, 3],
        }
    }

    /// The base algorithm with `names = values` overlaid and validated.
    pub fn configure(&self, names: &[String], values: &[Value]) -> Result<AlgorithmConfig> {
        let mut doc = self.base.to_json();
        let obj = doc.as_object_mut().expect("algorithm configs are objects");
        for (n, v) in names.iter().zip(values) {
            obj.insert(n.clone(), serde_json::to_value(v)?);
        }
        AlgorithmConfig::from_json(&doc)
    }

    pub fn objective(&self, names: &[String], values: &[Value]) -> Result<f64> {
        let algorithm = self.configure(names, values)?;
        let mut ys = Vec::with_capacity(self.seeds.len());
        for &seed in &self.seeds {
            let cfg = OptimizerConfig::new(algorithm.clone(), self.space.clone(), self.fitness.clone()).with_seed(seed);
            ys.push(run_optimizer(&cfg, self.ngen, None)?.y_best);
        }
        Ok(median(&ys))
    }
}

pub(crate) fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// One evaluated configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneRecord {
    /// 1-based evaluation index.
    pub iteration: usize,
    pub config: Vec<Value>,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneResult {
    pub method: String,
    pub names: Vec<String>,
    pub mode: Mode,
    /// In evaluation order.
    pub records: Vec<TuneRecord>,
}

pub const TUNE_CSV_VERSION: u32 = 1;

impl TuneResult {
    fn new(method: &str, hs: &HyperSpace, mode: Mode) -> Self {
        TuneResult {
            method: method.to_string(),
            names: hs.names(),
            mode,
            records: Vec::new(),
        }
    }

    fn push(&mut self, config: Vec<Value>, objective: f64) {
        let iteration = self.records.len() + 1;
        self.records.push(TuneRecord {
            iteration,
            config,
            objective,
        });
    }

    /// Records sorted best first; ties keep evaluation order.
    pub fn ranked(&self) -> Vec<&TuneRecord> {
        let keys: Vec<f64> = self.records.iter().map(|r| self.mode.canonical(r.objective)).collect();
        argsort(&keys).into_iter().map(|i| &self.records[i]).collect()
    }

    pub fn best(&self) -> Option<&TuneRecord> {
        self.ranked().into_iter().next()
    }

    /// Best objective so far after each evaluation.
    pub fn trace(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.records.len());
        let mut best: Option<f64> = None;
        for r in &self.records {
            best = Some(match best {
                Some(b) if !self.mode.better(r.objective, b) => b,
                _ => r.objective,
            });
            out.push(best.unwrap());
        }
        out
    }

    /// Best objective within each consecutive block of `size` evaluations.
    pub fn bucket_best(&self, size: usize) -> Vec<f64> {
        self.records
            .chunks(size.max(1))
            .map(|c| {
                c.iter()
                    .map(|r| r.objective)
                    .reduce(|a, b| if self.mode.better(b, a) { b } else { a })
                    .unwrap()
            })
            .collect()
    }

    /// `iteration, <names...>, objective, best_so_far`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# tune.csv v{TUNE_CSV_VERSION} method={}", self.method)?;
        writeln!(w, "iteration,{},objective,best_so_far", self.names.join(","))?;
        for (r, b) in self.records.iter().zip(self.trace()) {
            let vals: Vec<String> = r.config.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{},{},{:e},{:e}", r.iteration, vals.join(","), r.objective, b)?;
        }
        Ok(())
    }
}

fn decode(hs: &HyperSpace, internal: &[f64]) -> Vec<Value> {
    hs.space.decode_unchecked(internal)
}

/// Evenly spaced internal coordinates for one axis (midpoint when k = 1),
/// snapped to the variable's lattice and de-duplicated.
fn axis_levels(var: &VariableSpec, k: usize) -> Vec<f64> {
    let (lo, hi) = (var.lower(), var.upper());
    let mut out: Vec<f64> = Vec::with_capacity(k);
    for i in 0..k {
        let t = if k == 1 { 0.5 } else { i as f64 / (k - 1) as f64 };
        let mut x = lo + t * (hi - lo);
        if !var.is_continuous() {
            x = x.round();
        }
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

/// Exhaustive grid with `levels[i]` points on axis `i`, last axis fastest.
pub fn grid_search(hs: &HyperSpace, levels: &[usize], objective: &TuneObjective, cap: usize, workers: usize) -> Result<TuneResult> {
    if levels.len() != hs.space.dim() {
        return Err(OptError::Config(format!(
            "grid needs {} level counts, got {}",
            hs.space.dim(),
            levels.len()
        )));
    }
    if levels.contains(&0) {
        return Err(OptError::Config("grid level counts must be positive".into()));
    }
    let axes: Vec<Vec<f64>> = hs.space.variables().iter().zip(levels).map(|(v, &k)| axis_levels(v, k)).collect();
    let needed = axes.iter().try_fold(1usize, |acc, a| acc.checked_mul(a.len())).unwrap_or(usize::MAX);
    if needed > cap {
        return Err(OptError::Budget { needed, cap });
    }
    let mut points = Vec::with_capacity(needed);
    for mut idx in 0..needed {
        let mut x = vec![0.0; axes.len()];
        for (j, axis) in axes.iter().enumerate().rev() {
            x[j] = axis[idx % axis.len()];
            idx /= axis.len();
        }
        points.push(decode(hs, &x));
    }
    let ys = objective.evaluate_batch(&points, workers)?;
    let mut res = TuneResult::new("grid", hs, objective.mode);
    for (c, y) in points.into_iter().zip(ys) {
        res.push(c, y);
    }
    Ok(res)
}

fn random_points<R: Rng + ?Sized>(hs: &HyperSpace, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n).map(|_| hs.space.sample_internal(rng)).collect()
}

pub fn random_search<R: Rng + ?Sized>(
    hs: &HyperSpace,
    budget: usize,
    objective: &TuneObjective,
    workers: usize,
    rng: &mut R,
) -> Result<TuneResult> {
    if budget == 0 {
        return Err(OptError::Config("tuning budget must be at least 1".into()));
    }
    let points: Vec<Vec<Value>> = random_points(hs, budget, rng).iter().map(|x| decode(hs, x)).collect();
    let ys = objective.evaluate_batch(&points, workers)?;
    let mut res = TuneResult::new("random", hs, objective.mode);
    for (c, y) in points.into_iter().zip(ys) {
        res.push(c, y);
    }
    Ok(res)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BayesConfig {
    /// Random configurations evaluated before the model takes over.
    pub n_init: usize,
    /// Random candidates scored by expected improvement per iteration.
    pub n_candidates: usize,
    /// Extra candidates drawn around the incumbent.
    pub n_local: usize,
}

impl Default for BayesConfig {
    fn default() -> Self {
        BayesConfig {
            n_init: 10,
            n_candidates: 1000,
            n_local: 200,
        }
    }
}

fn matern52(r: f64) -> f64 {
    let s = 5f64.sqrt() * r;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

/// Zero-mean Gaussian process with an isotropic Matérn-5/2 kernel on unit
/// inputs and standardized targets.
#[derive(Clone, Debug)]
pub struct GaussianProcess {
    xs: Vec<Vec<f64>>,
    length: f64,
    noise: f64,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    alpha: DVector<f64>,
    y_mean: f64,
    y_std: f64,
}

const GP_LENGTHS: [f64; 8] = [0.03, 0.06, 0.1, 0.2, 0.3, 0.5, 1.0, 2.0];
const GP_NOISES: [f64; 4] = [1e-6, 1e-3, 1e-2, 1e-1];

impl GaussianProcess {
    fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        matern52(dist(a, b) / self.length)
    }

    /// Fits with kernel length and noise picked by marginal likelihood over
    /// a fixed grid. `None` when no factorization succeeds.
    pub fn fit(xs: &[Vec<f64>], ys: &[f64]) -> Option<Self> {
        let n = xs.len();
        if n == 0 {
            return None;
        }
        let y_mean = ys.iter().sum::<f64>() / n as f64;
        let var = ys.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_std = if var > 0.0 { var.sqrt() } else { 1.0 };
        let t = DVector::from_iterator(n, ys.iter().map(|y| (y - y_mean) / y_std));
        let mut best: Option<(f64, GaussianProcess)> = None;
        for &length in &GP_LENGTHS {
            for &noise in &GP_NOISES {
                let k = DMatrix::from_fn(n, n, |i, j| {
                    matern52(dist(&xs[i], &xs[j]) / length) + if i == j { noise } else { 0.0 }
                });
                let Some(chol) = k.cholesky() else { continue };
                let alpha = chol.solve(&t);
                let logdet: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
                let lml = -0.5 * t.dot(&alpha) - 0.5 * logdet;
                if !lml.is_finite() {
                    continue;
                }
                if best.as_ref().is_none_or(|(b, _)| lml > *b) {
                    best = Some((
                        lml,
                        GaussianProcess {
                            xs: xs.to_vec(),
                            length,
                            noise,
                            chol,
                            alpha,
                            y_mean,
                            y_std,
                        },
                    ));
                }
            }
        }
        best.map(|(_, gp)| gp)
    }

    pub fn length_scale(&self) -> f64 {
        self.length
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// Posterior mean and standard deviation in target units.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let k = DVector::from_iterator(self.xs.len(), self.xs.iter().map(|xi| self.kernel(xi, x)));
        let mean = k.dot(&self.alpha);
        let v = self.chol.solve(&k);
        let var = (1.0 - k.dot(&v)).max(0.0);
        (self.y_mean + self.y_std * mean, self.y_std * var.sqrt())
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Expected improvement below `best` for a Gaussian prediction.
pub fn expected_improvement(mean: f64, sd: f64, best: f64) -> f64 {
    let gain = best - mean;
    if sd <= 0.0 {
        return gain.max(0.0);
    }
    let z = gain / sd;
    let n = Normal::standard();
    gain * n.cdf(z) + sd * n.pdf(z)
}

pub fn bayesian_search<R: Rng + ?Sized>(
    hs: &HyperSpace,
    budget: usize,
    objective: &TuneObjective,
    cfg: &BayesConfig,
    workers: usize,
    rng: &mut R,
) -> Result<TuneResult> {
    if cfg.n_init == 0 || budget < cfg.n_init {
        return Err(OptError::Config(format!(
            "bayesian search needs 1 <= n_init <= budget, got n_init {} and budget {budget}",
            cfg.n_init
        )));
    }
    let mode = objective.mode;
    let mut res = TuneResult::new("bayesian", hs, mode);
    let mut xs = random_points(hs, cfg.n_init, rng);
    let init: Vec<Vec<Value>> = xs.iter().map(|x| decode(hs, x)).collect();
    let raw = objective.evaluate_batch(&init, workers)?;
    let mut ys: Vec<f64> = raw.iter().map(|&y| mode.canonical(y)).collect();
    for (c, y) in init.into_iter().zip(raw) {
        res.push(c, y);
    }
    let ranges = hs.space.ranges();
    while res.records.len() < budget {
        let units: Vec<Vec<f64>> = xs.iter().map(|x| hs.unit(x)).collect();
        let best_i = argsort(&ys)[0];
        let next = match GaussianProcess::fit(&units, &ys) {
            Some(gp) => {
                let mut cands = random_points(hs, cfg.n_candidates, rng);
                for _ in 0..cfg.n_local {
                    let mut x: Vec<f64> = xs[best_i]
                        .iter()
                        .zip(&ranges)
                        .map(|(v, r)| v + 0.05 * r * rng.sample::<f64, _>(rand_distr::StandardNormal))
                        .collect();
                    hs.space.repair_in_place(&mut x);
                    cands.push(x);
                }
                let mut top: Option<(f64, Vec<f64>)> = None;
                for c in cands {
                    let c = hs.space.snap(&c);
                    let (m, s) = gp.predict(&hs.unit(&c));
                    let ei = expected_improvement(m, s, ys[best_i]);
                    if top.as_ref().is_none_or(|(b, _)| ei > *b) {
                        top = Some((ei, c));
                    }
                }
                top.map(|(_, c)| c).expect("candidate set is non-empty")
            }
            None => {
                log::warn!("bayesian search: surrogate fit failed at iteration {}, drawing at random", res.records.len() + 1);
                hs.space.sample_internal(rng)
            }
        };
        let config = decode(hs, &next);
        let y = objective.evaluate(&config)?;
        res.push(config, y);
        xs.push(next);
        ys.push(mode.canonical(y));
    }
    Ok(res)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    /// Configurations per tuning generation; the first generation is random.
    pub population: usize,
    /// Variation operators; `lambda_` and `mu` are derived from `population`.
    pub es: EsParams,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            population: 10,
            es: EsParams {
                cxpb: 0.6,
                mutpb: 0.5,
                tournament: 2,
                sinit: 0.15,
                ..EsParams::default()
            },
        }
    }
}

pub fn evolutionary_search<R: Rng + ?Sized>(
    hs: &HyperSpace,
    budget: usize,
    objective: &TuneObjective,
    cfg: &EvolutionConfig,
    workers: usize,
    rng: &mut R,
) -> Result<TuneResult> {
    if cfg.population == 0 || budget < cfg.population {
        return Err(OptError::Config(format!(
            "evolutionary search needs 1 <= population <= budget, got population {} and budget {budget}",
            cfg.population
        )));
    }
    let mode = objective.mode;
    let d = hs.space.dim();
    let mu = (cfg.population / 2).max(1);
    let mut p = EsParams {
        lambda: cfg.population,
        mu,
        ..cfg.es.clone()
    };
    p.validate()?;
    let ranges = hs.space.ranges();
    let mut res = TuneResult::new("evolutionary", hs, mode);

    let xs = random_points(hs, cfg.population, rng);
    let configs: Vec<Vec<Value>> = xs.iter().map(|x| decode(hs, x)).collect();
    let ys = objective.evaluate_batch(&configs, workers)?;
    for (c, &y) in configs.into_iter().zip(&ys) {
        res.push(c, y);
    }
    let first = EsPopulation {
        ss: vec![vec![p.sinit; d]; xs.len()],
        ys: ys.iter().map(|&y| mode.canonical(y)).collect(),
        xs,
    };
    let mut parents = es_select(&first, first.clone(), mu);

    while res.records.len() < budget {
        p.lambda = cfg.population.min(budget - res.records.len());
        let (mut xs, ss) = es_offspring(&parents, &p, &ranges, rng);
        for x in &mut xs {
            *x = hs.space.snap(x);
        }
        let configs: Vec<Vec<Value>> = xs.iter().map(|x| decode(hs, x)).collect();
        let ys = objective.evaluate_batch(&configs, workers)?;
        for (c, &y) in configs.into_iter().zip(&ys) {
            res.push(c, y);
        }
        let offspring = EsPopulation {
            xs,
            ss,
            ys: ys.iter().map(|&y| mode.canonical(y)).collect(),
        };
        parents = es_select(&parents, offspring, mu);
    }
    Ok(res)
}

/// The three ES hyperparameters on `[0, 1]`.
pub fn es_hyperspace() -> HyperSpace {
    HyperSpace::new(vec![
        VariableSpec::float("cxpb", 0.0, 1.0).expect("valid bounds"),
        VariableSpec::float("mutpb", 0.0, 1.0).expect("valid bounds"),
        VariableSpec::float("alpha", 0.0, 1.0).expect("valid bounds"),
    ])
    .expect("distinct names")
}
