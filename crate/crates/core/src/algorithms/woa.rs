//! Whale optimization: encircling, random search and spiral bubble-net
//! moves around the best whale.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argsort, check_min_population, from_state, to_state, Generation, Optimizer};
use crate::engine::Ctx;
use crate::error::{OptError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WoaParams {
    pub nwhales: usize,
    /// Spiral shape constant.
    pub b: f64,
}

impl Default for WoaParams {
    fn default() -> Self {
        WoaParams { nwhales: 50, b: 1.0 }
    }
}

impl WoaParams {
    pub fn validate(&self) -> Result<()> {
        check_min_population("woa", self.nwhales, 2)?;
        if !self.b.is_finite() {
            return Err(OptError::Config("woa b must be finite".into()));
        }
        Ok(())
    }
}

pub fn woa_a(gen: Generation) -> f64 {
    2.0 * (1.0 - gen.progress())
}

/// Moves every whale once (unrepaired). Per whale the draws are r1, r2,
/// p, l, and a partner index when searching away from the leader.
pub fn woa_positions<R: Rng + ?Sized>(whales: &[Vec<f64>], best: &[f64], a: f64, b: f64, rng: &mut R) -> Vec<Vec<f64>> {
    let tau = 2.0 * std::f64::consts::PI;
    whales
        .iter()
        .map(|x| {
            let r1: f64 = rng.random();
            let r2: f64 = rng.random();
            let big_a = 2.0 * a * r1 - a;
            let c = 2.0 * r2;
            let p: f64 = rng.random();
            let l: f64 = rng.random_range(-1.0..=1.0);
            if p < 0.5 {
                let target = if big_a.abs() < 1.0 {
                    best
                } else {
                    &whales[rng.random_range(0..whales.len())][..]
                };
                x.iter()
                    .zip(target)
                    .map(|(xj, tj)| tj - big_a * (c * tj - xj).abs())
                    .collect()
            } else {
                x.iter()
                    .zip(best)
                    .map(|(xj, bj)| (bj - xj).abs() * (b * l).exp() * (tau * l).cos() + bj)
                    .collect()
            }
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct State {
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
    best_x: Vec<f64>,
    best_y: f64,
}

impl State {
    fn offer(&mut self, x: &[f64], y: f64) {
        if y < self.best_y {
            self.best_x = x.to_vec();
            self.best_y = y;
        }
    }
}

pub struct Woa {
    params: WoaParams,
    state: Option<State>,
}

impl Woa {
    pub fn new(params: WoaParams) -> Self {
        Woa { params, state: None }
    }
}

impl Optimizer for Woa {
    fn name(&self) -> &'static str {
        "woa"
    }

    fn population_size(&self) -> usize {
        self.params.nwhales
    }

    fn initialize(&mut self, ctx: &mut Ctx, population: Vec<Vec<f64>>) -> Result<()> {
        let ys = ctx.evaluate(&population)?;
        let best = argsort(&ys)[0];
        self.state = Some(State {
            best_x: population[best].clone(),
            best_y: ys[best],
            xs: population,
            ys,
        });
        Ok(())
    }

    fn step(&mut self, ctx: &mut Ctx, gen: Generation) -> Result<()> {
        let st = self.state.as_mut().expect("initialized");
        let mut next = woa_positions(&st.xs, &st.best_x, woa_a(gen), self.params.b, &mut ctx.rng);
        for x in &mut next {
            ctx.space().repair_in_place(x);
        }
        let ys = ctx.evaluate(&next)?;
        for (x, &y) in next.iter().zip(&ys) {
            st.offer(x, y);
        }
        st.xs = next;
        st.ys = ys;
        Ok(())
    }

    fn members(&self) -> Vec<(Vec<f64>, f64)> {
        let st = self.state.as_ref().expect("initialized");
        st.xs.iter().cloned().zip(st.ys.iter().copied()).collect()
    }

    fn inject(&mut self, replacements: Vec<(Vec<f64>, f64)>) {
        let st = self.state.as_mut().expect("initialized");
        for (x, y) in &replacements {
            st.offer(x, *y);
        }
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
