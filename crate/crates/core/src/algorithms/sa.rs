//! Simulated annealing with one or more parallel Metropolis chains.
//!
//! Each generation runs `chain_size` moves per chain at a fixed temperature;
//! the moves of all chains are evaluated together as one batch. The
//! temperature cools geometrically from `T0` (the spread of the initial
//! fitness values) to `T0 * t_final` at the end of the run.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{argsort, check_min_population, check_probability, from_state, to_state, Generation, Optimizer};
use crate::engine::Ctx;
use crate::error::{OptError, Result};
use crate::space::SearchSpace;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaParams {
    pub chain_size: usize,
    pub chains: usize,
    /// Per-variable perturbation probability.
    pub chi: f64,
    /// Gaussian step for continuous variables, as a fraction of the range.
    pub step: f64,
    /// Final temperature as a fraction of the initial one.
    pub t_final: f64,
}

impl Default for SaParams {
    fn default() -> Self {
        SaParams {
            chain_size: 10,
            chains: 1,
            chi: 0.2,
            step: 0.1,
            t_final: 1e-4,
        }
    }
}

impl SaParams {
    pub fn validate(&self) -> Result<()> {
        check_min_population("sa", self.chain_size, 1)?;
        check_min_population("sa", self.chains, 1)?;
        check_probability("chi", self.chi)?;
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(OptError::Config(format!("sa step must be positive, got {}", self.step)));
        }
        if !(self.t_final > 0.0 && self.t_final <= 1.0) {
            return Err(OptError::Config(format!("sa t_final must lie in (0, 1], got {}", self.t_final)));
        }
        Ok(())
    }
}

/// Metropolis rule: downhill and flat moves are always taken, uphill moves
/// with probability `exp(-delta / T)` (decided by the uniform draw `u`).
pub fn metropolis_accept(delta: f64, temperature: f64, u: f64) -> bool {
    delta <= 0.0 || u < (-delta / temperature).exp()
}

/// Perturbs each variable with probability `chi`. Continuous variables take
/// a clipped Gaussian step; integers and grid levels are redrawn uniformly.
/// Returns the proposal and which coordinates were touched.
pub fn sa_perturb<R: Rng + ?Sized>(
    space: &SearchSpace,
    x: &[f64],
    chi: f64,
    step: f64,
    rng: &mut R,
) -> (Vec<f64>, Vec<bool>) {
    let mut out = x.to_vec();
    let mut touched = vec![false; x.len()];
    for (j, var) in space.variables().iter().enumerate() {
        let u: f64 = rng.random();
        if u >= chi {
            continue;
        }
        touched[j] = true;
        out[j] = if var.is_continuous() {
            let z: f64 = rng.sample(StandardNormal);
            (x[j] + z * step * (var.upper() - var.lower())).clamp(var.lower(), var.upper())
        } else {
            var.sample(rng)
        };
    }
    (out, touched)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct State {
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
    t0: f64,
}

pub struct Sa {
    params: SaParams,
    state: Option<State>,
}

impl Sa {
    pub fn new(params: SaParams) -> Self {
        Sa { params, state: None }
    }

    pub fn temperature(&self, gen: Generation) -> f64 {
        let t0 = self.state.as_ref().map_or(1.0, |s| s.t0);
        t0 * self.params.t_final.powf(gen.progress())
    }
}

fn initial_temperature(ys: &[f64]) -> f64 {
    let finite: Vec<f64> = ys.iter().copied().filter(|y| y.is_finite()).collect();
    let n = finite.len() as f64;
    if finite.len() >= 2 {
        let mean = finite.iter().sum::<f64>() / n;
        let sd = (finite.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        if sd > 0.0 && sd.is_finite() {
            return sd;
        }
        if mean != 0.0 {
            return 0.1 * mean.abs();
        }
    }
    1.0
}

impl Optimizer for Sa {
    fn name(&self) -> &'static str {
        "sa"
    }

    fn population_size(&self) -> usize {
        self.params.chain_size * self.params.chains
    }

    fn initialize(&mut self, ctx: &mut Ctx, population: Vec<Vec<f64>>) -> Result<()> {
        let ys = ctx.evaluate(&population)?;
        let order = argsort(&ys);
        let starts = &order[..self.params.chains.min(order.len())];
        self.state = Some(State {
            xs: starts.iter().map(|&i| population[i].clone()).collect(),
            ys: starts.iter().map(|&i| ys[i]).collect(),
            t0: initial_temperature(&ys),
        });
        Ok(())
    }

    fn step(&mut self, ctx: &mut Ctx, gen: Generation) -> Result<()> {
        let temperature = self.temperature(gen);
        let st = self.state.as_mut().expect("initialized");
        for _ in 0..self.params.chain_size {
            let (space, rng) = ctx.space_and_rng();
            let proposals: Vec<Vec<f64>> = st
                .xs
                .iter()
                .map(|x| sa_perturb(space, x, self.params.chi, self.params.step, rng).0)
                .collect();
            let ys = ctx.evaluate(&proposals)?;
            for (c, (x, y)) in proposals.into_iter().zip(ys).enumerate() {
                let delta = y - st.ys[c];
                let u = if delta > 0.0 { ctx.rng.random::<f64>() } else { 0.0 };
                if metropolis_accept(delta, temperature, u) {
                    st.xs[c] = x;
                    st.ys[c] = y;
                }
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
        super::replace_worst(&mut st.xs, &mut st.ys, replacements);
    }

    fn save_state(&self) -> serde_json::Value {
        to_state(&self.state)
    }

    fn load_state(&mut self, state: serde_json::Value) -> Result<()> {
        self.state = from_state(state)?;
        Ok(())
    }
}
