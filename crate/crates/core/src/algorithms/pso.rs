//! Particle swarm optimization with inertia weight and velocity clamping.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argsort, check_min_population, from_state, to_state, Generation, Optimizer};
use crate::engine::Ctx;
use crate::error::{OptError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoParams {
    pub npar: usize,
    pub w: f64,
    pub c1: f64,
    pub c2: f64,
    /// Velocity limit as a fraction of each variable's range; 0 disables it.
    pub vmax: f64,
}

impl Default for PsoParams {
    fn default() -> Self {
        PsoParams {
            npar: 50,
            w: 0.72,
            c1: 1.49,
            c2: 1.49,
            vmax: 0.2,
        }
    }
}

impl PsoParams {
    pub fn validate(&self) -> Result<()> {
        check_min_population("pso", self.npar, 1)?;
        for (name, v) in [("w", self.w), ("c1", self.c1), ("c2", self.c2), ("vmax", self.vmax)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(OptError::Config(format!("pso {name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// One velocity and position update for a single particle (unrepaired).
/// `vlimit` holds per-coordinate absolute limits, or is empty for none.
#[allow(clippy::too_many_arguments)]
pub fn pso_move<R: Rng + ?Sized>(
    x: &mut [f64],
    v: &mut [f64],
    pbest: &[f64],
    gbest: &[f64],
    p: &PsoParams,
    vlimit: &[f64],
    rng: &mut R,
) {
    for j in 0..x.len() {
        let r1: f64 = rng.random();
        let r2: f64 = rng.random();
        let mut vj = p.w * v[j] + p.c1 * r1 * (pbest[j] - x[j]) + p.c2 * r2 * (gbest[j] - x[j]);
        if let Some(&lim) = vlimit.get(j) {
            vj = vj.clamp(-lim, lim);
        }
        v[j] = vj;
        x[j] += vj;
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct State {
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
    vs: Vec<Vec<f64>>,
    pbest_x: Vec<Vec<f64>>,
    pbest_y: Vec<f64>,
    gbest_x: Vec<f64>,
    gbest_y: f64,
}

pub struct Pso {
    params: PsoParams,
    state: Option<State>,
}

impl Pso {
    pub fn new(params: PsoParams) -> Self {
        Pso { params, state: None }
    }

    fn state(&self) -> &State {
        self.state.as_ref().expect("initialized")
    }
}

impl State {
    fn offer_best(&mut self, i: usize) {
        if self.ys[i] < self.pbest_y[i] {
            self.pbest_x[i] = self.xs[i].clone();
            self.pbest_y[i] = self.ys[i];
        }
        if self.ys[i] < self.gbest_y {
            self.gbest_x = self.xs[i].clone();
            self.gbest_y = self.ys[i];
        }
    }
}

impl Optimizer for Pso {
    fn name(&self) -> &'static str {
        "pso"
    }

    fn population_size(&self) -> usize {
        self.params.npar
    }

    fn initialize(&mut self, ctx: &mut Ctx, population: Vec<Vec<f64>>) -> Result<()> {
        let ys = ctx.evaluate(&population)?;
        let d = ctx.space().dim();
        let best = argsort(&ys)[0];
        self.state = Some(State {
            vs: vec![vec![0.0; d]; population.len()],
            pbest_x: population.clone(),
            pbest_y: ys.clone(),
            gbest_x: population[best].clone(),
            gbest_y: ys[best],
            xs: population,
            ys,
        });
        Ok(())
    }

    fn step(&mut self, ctx: &mut Ctx, _gen: Generation) -> Result<()> {
        let vlimit: Vec<f64> = if self.params.vmax > 0.0 {
            ctx.space().ranges().iter().map(|r| r * self.params.vmax).collect()
        } else {
            Vec::new()
        };
        let st = self.state.as_mut().expect("initialized");
        for i in 0..st.xs.len() {
            pso_move(
                &mut st.xs[i],
                &mut st.vs[i],
                &st.pbest_x[i],
                &st.gbest_x,
                &self.params,
                &vlimit,
                &mut ctx.rng,
            );
            ctx.space().repair_in_place(&mut st.xs[i]);
        }
        st.ys = ctx.evaluate(&st.xs)?;
        for i in 0..st.xs.len() {
            st.offer_best(i);
        }
        Ok(())
    }

    fn members(&self) -> Vec<(Vec<f64>, f64)> {
        let st = self.state();
        st.xs.iter().cloned().zip(st.ys.iter().copied()).collect()
    }

    fn inject(&mut self, replacements: Vec<(Vec<f64>, f64)>) {
        let st = self.state.as_mut().expect("initialized");
        let order = argsort(&st.ys);
        for ((x, y), &i) in replacements.into_iter().zip(order.iter().rev()) {
            st.xs[i] = x;
            st.ys[i] = y;
            st.vs[i].iter_mut().for_each(|v| *v = 0.0);
            st.offer_best(i);
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
