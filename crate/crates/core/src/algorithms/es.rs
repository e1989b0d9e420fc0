//! (mu, lambda) evolution strategy with blend crossover and self-adaptive
//! Gaussian mutation.
//!
//! Offspring are built from tournament-selected parents. With probability
//! `cxpb` a second parent is blended in; each variable is then mutated with
//! probability `mutpb`, its step size adapted log-normally first. The best
//! `mu` offspring become the next parents, and the best previous parent
//! survives if it beats all of them.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{argsort, check_min_population, check_probability, from_state, to_state, Generation, Optimizer};
use crate::engine::Ctx;
use crate::error::{OptError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EsParams {
    #[serde(rename = "lambda_")]
    pub lambda: usize,
    pub mu: usize,
    pub cxpb: f64,
    pub mutpb: f64,
    /// Blend crossover extent beyond the parents' interval.
    pub alpha: f64,
    pub tournament: usize,
    /// Step-size bounds and initial value, as fractions of each range.
    pub smin: f64,
    pub smax: f64,
    pub sinit: f64,
}

impl Default for EsParams {
    fn default() -> Self {
        EsParams {
            lambda: 60,
            mu: 30,
            cxpb: 0.6,
            mutpb: 0.3,
            alpha: 0.5,
            tournament: 3,
            smin: 1e-6,
            smax: 0.5,
            sinit: 0.1,
        }
    }
}

impl EsParams {
    pub fn validate(&self) -> Result<()> {
        check_min_population("es", self.lambda, 2)?;
        check_min_population("es", self.mu, 1)?;
        if self.mu > self.lambda {
            return Err(OptError::Config(format!(
                "es needs mu <= lambda_, got mu {} and lambda_ {}",
                self.mu, self.lambda
            )));
        }
        check_probability("cxpb", self.cxpb)?;
        check_probability("mutpb", self.mutpb)?;
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(OptError::Config(format!("es alpha must be >= 0, got {}", self.alpha)));
        }
        check_min_population("es tournament", self.tournament, 1)?;
        if !(self.smin > 0.0 && self.smin <= self.sinit && self.sinit <= self.smax) {
            return Err(OptError::Config("es needs 0 < smin <= sinit <= smax".into()));
        }
        Ok(())
    }
}

/// Individuals of an ES population: positions, step sizes, fitness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EsPopulation {
    pub xs: Vec<Vec<f64>>,
    pub ss: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
}

fn tournament<R: Rng + ?Sized>(ys: &[f64], k: usize, rng: &mut R) -> usize {
    let mut best = rng.random_range(0..ys.len());
    for _ in 1..k {
        let c = rng.random_range(0..ys.len());
        if ys[c] < ys[best] {
            best = c;
        }
    }
    best
}

/// Blend crossover of two vectors with the same per-gene weights applied to
/// positions and step sizes. Only the first child is kept.
pub fn blend<R: Rng + ?Sized>(a: &[f64], b: &[f64], alpha: f64, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let gammas: Vec<f64> = (0..a.len())
        .map(|_| (1.0 + 2.0 * alpha) * rng.random::<f64>() - alpha)
        .collect();
    let child = a.iter().zip(b).zip(&gammas).map(|((x, y), g)| (1.0 - g) * x + g * y).collect();
    (child, gammas)
}

/// Produces `lambda` offspring (unrepaired) from the parent set.
pub fn es_offspring<R: Rng + ?Sized>(
    parents: &EsPopulation,
    p: &EsParams,
    ranges: &[f64],
    rng: &mut R,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let d = ranges.len();
    let tau_global = 1.0 / (2.0 * d as f64).sqrt();
    let tau_local = 1.0 / (2.0 * (d as f64).sqrt()).sqrt();
    let mut xs = Vec::with_capacity(p.lambda);
    let mut ss = Vec::with_capacity(p.lambda);
    for _ in 0..p.lambda {
        let i = tournament(&parents.ys, p.tournament, rng);
        let mut x = parents.xs[i].clone();
        let mut s = parents.ss[i].clone();
        if rng.random::<f64>() < p.cxpb {
            let k = tournament(&parents.ys, p.tournament, rng);
            let (child, gammas) = blend(&x, &parents.xs[k], p.alpha, rng);
            for j in 0..d {
                s[j] = ((1.0 - gammas[j]) * s[j] + gammas[j] * parents.ss[k][j]).clamp(p.smin, p.smax);
            }
            x = child;
        }
        let mut global: Option<f64> = None;
        for j in 0..d {
            if rng.random::<f64>() >= p.mutpb {
                continue;
            }
            let n0 = *global.get_or_insert_with(|| rng.sample(StandardNormal));
            let nj: f64 = rng.sample(StandardNormal);
            s[j] = (s[j] * (tau_global * n0 + tau_local * nj).exp()).clamp(p.smin, p.smax);
            let z: f64 = rng.sample(StandardNormal);
            x[j] += s[j] * ranges[j] * z;
        }
        xs.push(x);
        ss.push(s);
    }
    (xs, ss)
}

/// Comma selection with single elitism.
pub fn es_select(parents: &EsPopulation, offspring: EsPopulation, mu: usize) -> EsPopulation {
    let order = argsort(&offspring.ys);
    let mut next = EsPopulation {
        xs: Vec::with_capacity(mu),
        ss: Vec::with_capacity(mu),
        ys: Vec::with_capacity(mu),
    };
    for &i in order.iter().take(mu) {
        next.xs.push(offspring.xs[i].clone());
        next.ss.push(offspring.ss[i].clone());
        next.ys.push(offspring.ys[i]);
    }
    let elite = argsort(&parents.ys)[0];
    if parents.ys[elite] < next.ys[0] {
        let last = next.ys.len() - 1;
        next.xs[last] = parents.xs[elite].clone();
        next.ss[last] = parents.ss[elite].clone();
        next.ys[last] = parents.ys[elite];
    }
    next
}

pub struct Es {
    params: EsParams,
    parents: Option<EsPopulation>,
}

impl Es {
    pub fn new(params: EsParams) -> Self {
        Es { params, parents: None }
    }
}

impl Optimizer for Es {
    fn name(&self) -> &'static str {
        "es"
    }

    fn population_size(&self) -> usize {
        self.params.lambda
    }

    fn initialize(&mut self, ctx: &mut Ctx, population: Vec<Vec<f64>>) -> Result<()> {
        let ys = ctx.evaluate(&population)?;
        let d = ctx.space().dim();
        let all = EsPopulation {
            ss: vec![vec![self.params.sinit; d]; population.len()],
            xs: population,
            ys,
        };
        let mu = self.params.mu.min(all.xs.len());
        self.parents = Some(es_select(&all, all.clone(), mu));
        Ok(())
    }

    fn step(&mut self, ctx: &mut Ctx, _gen: Generation) -> Result<()> {
        let parents = self.parents.as_ref().expect("initialized");
        let ranges = ctx.space().ranges();
        let (mut xs, ss) = es_offspring(parents, &self.params, &ranges, &mut ctx.rng);
        for x in &mut xs {
            ctx.space().repair_in_place(x);
        }
        let ys = ctx.evaluate(&xs)?;
        let next = es_select(parents, EsPopulation { xs, ss, ys }, self.params.mu);
        self.parents = Some(next);
        Ok(())
    }

    fn members(&self) -> Vec<(Vec<f64>, f64)> {
        let p = self.parents.as_ref().expect("initialized");
        p.xs.iter().cloned().zip(p.ys.iter().copied()).collect()
    }

    fn inject(&mut self, replacements: Vec<(Vec<f64>, f64)>) {
        let sinit = self.params.sinit;
        let p = self.parents.as_mut().expect("initialized");
        let order = argsort(&p.ys);
        for ((x, y), &i) in replacements.into_iter().zip(order.iter().rev()) {
            p.ss[i] = vec![sinit; x.len()];
            p.xs[i] = x;
            p.ys[i] = y;
        }
    }

    fn save_state(&self) -> serde_json::Value {
        to_state(&self.parents)
    }

    fn load_state(&mut self, state: serde_json::Value) -> Result<()> {
        self.parents = from_state(state)?;
        Ok(())
    }
}
