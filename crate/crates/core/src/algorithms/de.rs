//! Differential evolution, rand/1/bin with greedy replacement.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_min_population, check_probability, from_state, replace_worst, to_state, Generation, Optimizer};
use crate::engine::Ctx;
use crate::error::{OptError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeParams {
    pub npop: usize,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "CR")]
    pub cr: f64,
}

impl Default for DeParams {
    fn default() -> Self {
        DeParams {
            npop: 50,
            f: 0.5,
            cr: 0.7,
        }
    }
}

impl DeParams {
    pub fn validate(&self) -> Result<()> {
        check_min_population("de", self.npop, 4)?;
        check_probability("CR", self.cr)?;
        if !(self.f > 0.0 && self.f <= 2.0) {
            return Err(OptError::Config(format!("F must lie in (0, 2], got {}", self.f)));
        }
        Ok(())
    }
}

/// Three mutually distinct indices, all different from `i`.
fn pick_three<R: Rng + ?Sized>(n: usize, i: usize, rng: &mut R) -> [usize; 3] {
    let mut out = [usize::MAX; 3];
    for k in 0..3 {
        loop {
            let r = rng.random_range(0..n);
            if r != i && !out[..k].contains(&r) {
                out[k] = r;
                break;
            }
        }
    }
    out
}

/// Builds one trial vector per target (unrepaired).
pub fn de_trials<R: Rng + ?Sized>(pop: &[Vec<f64>], f: f64, cr: f64, rng: &mut R) -> Vec<Vec<f64>> {
    let n = pop.len();
    (0..n)
        .map(|i| {
            let [r1, r2, r3] = pick_three(n, i, rng);
            let d = pop[i].len();
            let jrand = rng.random_range(0..d);
            (0..d)
                .map(|j| {
                    let u: f64 = rng.random();
                    if u < cr || j == jrand {
                        pop[r1][j] + f * (pop[r2][j] - pop[r3][j])
                    } else {
                        pop[i][j]
                    }
                })
                .collect()
        })
        .collect()
}

/// Greedy one-to-one survivor selection: a trial replaces its target only
/// when it is strictly better.
pub fn de_select(pop: &mut [Vec<f64>], fit: &mut [f64], trials: Vec<Vec<f64>>, trial_fit: &[f64]) {
    for (i, trial) in trials.into_iter().enumerate() {
        if trial_fit[i] < fit[i] {
            pop[i] = trial;
            fit[i] = trial_fit[i];
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct State {
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
}

pub struct De {
    params: DeParams,
    state: State,
}

impl De {
    pub fn new(params: DeParams) -> Self {
        De {
            params,
            state: State {
                xs: Vec::new(),
                ys: Vec::new(),
            },
        }
    }
}

impl Optimizer for De {
    fn name(&self) -> &'static str {
        "de"
    }

    fn population_size(&self) -> usize {
        self.params.npop
    }

    fn initialize(&mut self, ctx: &mut Ctx, population: Vec<Vec<f64>>) -> Result<()> {
        let ys = ctx.evaluate(&population)?;
        self.state = State { xs: population, ys };
        Ok(())
    }

    fn step(&mut self, ctx: &mut Ctx, _gen: Generation) -> Result<()> {
        let mut trials = de_trials(&self.state.xs, self.params.f, self.params.cr, &mut ctx.rng);
        for t in &mut trials {
            ctx.space().repair_in_place(t);
        }
        let tf = ctx.evaluate(&trials)?;
        de_select(&mut self.state.xs, &mut self.state.ys, trials, &tf);
        Ok(())
    }

    fn members(&self) -> Vec<(Vec<f64>, f64)> {
        self.state.xs.iter().cloned().zip(self.state.ys.iter().copied()).collect()
    }

    fn inject(&mut self, replacements: Vec<(Vec<f64>, f64)>) {
        replace_worst(&mut self.state.xs, &mut self.state.ys, replacements);
    }

    fn save_state(&self) -> serde_json::Value {
        to_state(&self.state)
    }

    fn load_state(&mut self, state: serde_json::Value) -> Result<()> {
        self.state = from_state(state)?;
        Ok(())
    }
}
