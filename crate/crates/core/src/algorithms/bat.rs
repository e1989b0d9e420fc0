//! Bat algorithm: frequency-tuned velocities, loudness and pulse-rate
//! schedules, and a local walk around the best bat.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argsort, check_min_population, check_probability, from_state, to_state, Generation, Optimizer};
use crate::engine::Ctx;
use crate::error::{OptError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatParams {
    pub nbats: usize,
    pub fmin: f64,
    pub fmax: f64,
    /// Initial loudness.
    #[serde(rename = "A")]
    pub loudness: f64,
    /// Pulse-rate ceiling.
    pub r0: f64,
    /// Loudness decay per accepted move.
    pub alpha: f64,
    /// Pulse-rate growth constant.
    pub gamma: f64,
    /// Local walk scale as a fraction of each range.
    pub walk: f64,
}

impl Default for BatParams {
    fn default() -> Self {
        BatParams {
            nbats: 50,
            fmin: 0.0,
            fmax: 1.0,
            loudness: 2.0,
            r0: 0.5,
            alpha: 0.9,
            gamma: 0.9,
            walk: 0.5,
        }
    }
}

impl BatParams {
    pub fn validate(&self) -> Result<()> {
        check_min_population("bat", self.nbats, 1)?;
        check_probability("r0", self.r0)?;
        check_probability("alpha", self.alpha)?;
        if !(self.fmin <= self.fmax && self.fmin.is_finite() && self.fmax.is_finite()) {
            return Err(OptError::Config("bat needs finite fmin <= fmax".into()));
        }
        if !(self.loudness > 0.0 && self.gamma > 0.0 && self.walk > 0.0) {
            return Err(OptError::Config("bat A, gamma and walk must be positive".into()));
        }
        Ok(())
    }
}

/// Pulse rate after `t` generations.
pub fn pulse_rate(r0: f64, gamma: f64, t: usize) -> f64 {
    r0 * (1.0 - (-gamma * t as f64).exp())
}

/// Frequency-driven move of one bat (unrepaired); updates `v` in place.
pub fn bat_move<R: Rng + ?Sized>(x: &[f64], v: &mut [f64], best: &[f64], p: &BatParams, rng: &mut R) -> Vec<f64> {
    let beta: f64 = rng.random();
    let f = p.fmin + (p.fmax - p.fmin) * beta;
    x.iter()
        .zip(v.iter_mut())
        .zip(best)
        .map(|((xj, vj), bj)| {
            *vj += (xj - bj) * f;
            xj + *vj
        })
        .collect()
}

/// Random walk around the best bat, scaled by the mean loudness.
pub fn local_walk<R: Rng + ?Sized>(best: &[f64], mean_loudness: f64, scale: &[f64], rng: &mut R) -> Vec<f64> {
    best.iter()
        .zip(scale)
        .map(|(b, s)| b + rng.random_range(-1.0..=1.0) * mean_loudness * s)
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct State {
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
    vs: Vec<Vec<f64>>,
    loudness: Vec<f64>,
    pulse: Vec<f64>,
    best_x: Vec<f64>,
    best_y: f64,
}

pub struct Bat {
    params: BatParams,
    state: Option<State>,
}

impl Bat {
    pub fn new(params: BatParams) -> Self {
        Bat { params, state: None }
    }
}

impl Optimizer for Bat {
    fn name(&self) -> &'static str {
        "bat"
    }

    fn population_size(&self) -> usize {
        self.params.nbats
    }

    fn initialize(&mut self, ctx: &mut Ctx, population: Vec<Vec<f64>>) -> Result<()> {
        let ys = ctx.evaluate(&population)?;
        let n = population.len();
        let best = argsort(&ys)[0];
        self.state = Some(State {
            vs: vec![vec![0.0; ctx.space().dim()]; n],
            loudness: vec![self.params.loudness; n],
            pulse: vec![0.0; n],
            best_x: population[best].clone(),
            best_y: ys[best],
            xs: population,
            ys,
        });
        Ok(())
    }

    fn step(&mut self, ctx: &mut Ctx, gen: Generation) -> Result<()> {
        let p = &self.params;
        let st = self.state.as_mut().expect("initialized");
        let scale: Vec<f64> = ctx.space().ranges().iter().map(|r| r * p.walk).collect();
        let mean_loudness = st.loudness.iter().sum::<f64>() / st.loudness.len() as f64;
        let mut proposals = Vec::with_capacity(st.xs.len());
        for i in 0..st.xs.len() {
            let mut x = bat_move(&st.xs[i], &mut st.vs[i], &st.best_x, p, &mut ctx.rng);
            if ctx.rng.random::<f64>() > st.pulse[i] {
                x = local_walk(&st.best_x, mean_loudness, &scale, &mut ctx.rng);
            }
            ctx.space().repair_in_place(&mut x);
            proposals.push(x);
        }
        let ys = ctx.evaluate(&proposals)?;
        let t = gen.index + 1;
        for (i, (x, y)) in proposals.into_iter().zip(ys).enumerate() {
            if y <= st.best_y {
                st.best_x = x.clone();
                st.best_y = y;
            }
            if y <= st.ys[i] && ctx.rng.random::<f64>() < st.loudness[i] {
                st.xs[i] = x;
                st.ys[i] = y;
                st.loudness[i] *= p.alpha;
                st.pulse[i] = pulse_rate(p.r0, p.gamma, t);
            }
        }
        Ok(())
    }

    fn members(&self) -> Vec<(Vec<f64>, f64)> {
        let st = self.state.as_ref().expect("initialized");
        st.xs.iter().cloned().zip(st.ys.iter().copied()).collect()
    }

    fn inject(&mut self, replacements: Vec<(Vec<f64>, f64)>) {
        let st = self.state.as_mut().expect("initialized");
        let order = argsort(&st.ys);
        for ((x, y), &i) in replacements.into_iter().zip(order.iter().rev()) {
            if y <= st.best_y {
                st.best_x = x.clone();
                st.best_y = y;
            }
            st.xs[i] = x;
            st.ys[i] = y;
            st.vs[i].iter_mut().for_each(|v| *v = 0.0);
        }
    }

    fn save_state(&self) -> serde_json::Value {
        to_state(&self.state)
    }

    fn load_state(&mut self, state: serde_json::Value) -> Result<()> {
        self.state = from_state(state)?;
        Ok(())
    }
}
