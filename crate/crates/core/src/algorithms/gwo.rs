//! Grey wolf optimizer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argsort, check_min_population, from_state, replace_worst, to_state, Generation, Optimizer};
use crate::engine::Ctx;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GwoParams {
    pub nwolves: usize,
}

impl Default for GwoParams {
    fn default() -> Self {
        GwoParams { nwolves: 5 }
    }
}

impl GwoParams {
    pub fn validate(&self) -> Result<()> {
        check_min_population("gwo", self.nwolves, 3)
    }
}

/// Leaders of the pack: best, second and third positions seen so far.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leaders {
    pub x: [Vec<f64>; 3],
    pub y: [f64; 3],
}

impl Leaders {
    fn from_points(points: &[(Vec<f64>, f64)]) -> Leaders {
        let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        let order = argsort(&ys);
        let pick = |k: usize| &points[order[k.min(order.len() - 1)]];
        Leaders {
            x: [pick(0).0.clone(), pick(1).0.clone(), pick(2).0.clone()],
            y: [pick(0).1, pick(1).1, pick(2).1],
        }
    }

    fn update(&mut self, xs: &[Vec<f64>], ys: &[f64]) {
        let mut pool: Vec<(Vec<f64>, f64)> = (0..3).map(|k| (self.x[k].clone(), self.y[k])).collect();
        pool.extend(xs.iter().cloned().zip(ys.iter().copied()));
        *self = Leaders::from_points(&pool);
    }
}

/// `a` decreases linearly from 2 towards 0 over the run.
pub fn gwo_a(gen: Generation) -> f64 {
    2.0 * (1.0 - gen.progress())
}

/// Proposes the next wolf positions (unrepaired). Draws `r1, r2` for the
/// alpha, beta and delta terms in that order, per wolf and coordinate.
pub fn gwo_positions<R: Rng + ?Sized>(wolves: &[Vec<f64>], leaders: &Leaders, a: f64, rng: &mut R) -> Vec<Vec<f64>> {
    wolves
        .iter()
        .map(|x| {
            (0..x.len())
                .map(|j| {
                    let mut sum = 0.0;
                    for leader in &leaders.x {
                        let r1: f64 = rng.random();
                        let r2: f64 = rng.random();
                        let big_a = 2.0 * a * r1 - a;
                        let c = 2.0 * r2;
                        let d = (c * leader[j] - x[j]).abs();
                        sum += leader[j] - big_a * d;
                    }
                    sum / 3.0
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct State {
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
    leaders: Option<Leaders>,
}

pub struct Gwo {
    params: GwoParams,
    state: State,
}

impl Gwo {
    pub fn new(params: GwoParams) -> Self {
        Gwo {
            params,
            state: State {
                xs: Vec::new(),
                ys: Vec::new(),
                leaders: None,
            },
        }
    }

    pub fn leaders(&self) -> Option<&Leaders> {
        self.state.leaders.as_ref()
    }
}

impl Optimizer for Gwo {
    fn name(&self) -> &'static str {
        "gwo"
    }

    fn population_size(&self) -> usize {
        self.params.nwolves
    }

    fn initialize(&mut self, ctx: &mut Ctx, population: Vec<Vec<f64>>) -> Result<()> {
        let ys = ctx.evaluate(&population)?;
        let points: Vec<_> = population.iter().cloned().zip(ys.iter().copied()).collect();
        self.state = State {
            leaders: Some(Leaders::from_points(&points)),
            xs: population,
            ys,
        };
        Ok(())
    }

    fn step(&mut self, ctx: &mut Ctx, gen: Generation) -> Result<()> {
        let leaders = self.state.leaders.as_ref().expect("initialized");
        let mut next = gwo_positions(&self.state.xs, leaders, gwo_a(gen), &mut ctx.rng);
        for x in &mut next {
            ctx.space().repair_in_place(x);
        }
        let ys = ctx.evaluate(&next)?;
        self.state.leaders.as_mut().unwrap().update(&next, &ys);
        self.state.xs = next;
        self.state.ys = ys;
        Ok(())
    }

    fn members(&self) -> Vec<(Vec<f64>, f64)> {
        self.state.xs.iter().cloned().zip(self.state.ys.iter().copied()).collect()
    }

    fn inject(&mut self, replacements: Vec<(Vec<f64>, f64)>) {
        let slots = replace_worst(&mut self.state.xs, &mut self.state.ys, replacements);
        if let Some(leaders) = self.state.leaders.as_mut() {
            let xs: Vec<_> = slots.iter().map(|&i| self.state.xs[i].clone()).collect();
            let ys: Vec<_> = slots.iter().map(|&i| self.state.ys[i]).collect();
            leaders.update(&xs, &ys);
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
