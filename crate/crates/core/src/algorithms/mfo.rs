//! Moth-flame optimization. Moths spiral around a shrinking set of flames,
//! the best positions found so far.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argsort, check_min_population, from_state, to_state, Generation, Optimizer};
use crate::engine::Ctx;
use crate::error::{OptError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MfoParams {
    pub nmoths: usize,
    /// Logarithmic spiral shape constant.
    pub b: f64,
}

impl Default for MfoParams {
    fn default() -> Self {
        MfoParams { nmoths: 50, b: 1.0 }
    }
}

impl MfoParams {
    pub fn validate(&self) -> Result<()> {
        check_min_population("mfo", self.nmoths, 1)?;
        if !self.b.is_finite() {
            return Err(OptError::Config("mfo b must be finite".into()));
        }
        Ok(())
    }
}

/// Number of flames during generation `gen`; reaches 1 on the last one.
pub fn flame_count(n: usize, gen: Generation) -> usize {
    let k = (gen.index + 1) as f64;
    let total = gen.total.max(1) as f64;
    let count = (n as f64 - k * (n as f64 - 1.0) / total).round();
    (count as usize).clamp(1, n)
}

/// Spiral flight of one moth around its flame (unrepaired).
pub fn mfo_move<R: Rng + ?Sized>(moth: &[f64], flame: &[f64], b: f64, rng: &mut R) -> Vec<f64> {
    moth.iter()
        .zip(flame)
        .map(|(m, f)| {
            let t: f64 = rng.random_range(-1.0..=1.0);
            let d = (f - m).abs();
            d * (b * t).exp() * (2.0 * std::f64::consts::PI * t).cos() + f
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct State {
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
    /// Sorted best-first.
    flames_x: Vec<Vec<f64>>,
    flames_y: Vec<f64>,
}

impl State {
    fn merge_flames(&mut self, xs: &[Vec<f64>], ys: &[f64]) {
        let n = self.xs.len();
        let mut px = std::mem::take(&mut self.flames_x);
        let mut py = std::mem::take(&mut self.flames_y);
        px.extend_from_slice(xs);
        py.extend_from_slice(ys);
        let order = argsort(&py);
        self.flames_x = order.iter().take(n).map(|&i| px[i].clone()).collect();
        self.flames_y = order.iter().take(n).map(|&i| py[i]).collect();
    }
}

pub struct Mfo {
    params: MfoParams,
    state: Option<State>,
}

impl Mfo {
    pub fn new(params: MfoParams) -> Self {
        Mfo { params, state: None }
    }
}

impl Optimizer for Mfo {
    fn name(&self) -> &'static str {
        "mfo"
    }

    fn population_size(&self) -> usize {
        self.params.nmoths
    }

    fn initialize(&mut self, ctx: &mut Ctx, population: Vec<Vec<f64>>) -> Result<()> {
        let ys = ctx.evaluate(&population)?;
        let mut st = State {
            xs: population.clone(),
            ys: ys.clone(),
            flames_x: Vec::new(),
            flames_y: Vec::new(),
        };
        st.merge_flames(&population, &ys);
        self.state = Some(st);
        Ok(())
    }

    fn step(&mut self, ctx: &mut Ctx, gen: Generation) -> Result<()> {
        let st = self.state.as_mut().expect("initialized");
        let nflames = flame_count(st.xs.len(), gen);
        let mut next = Vec::with_capacity(st.xs.len());
        for (i, moth) in st.xs.iter().enumerate() {
            let flame = &st.flames_x[i.min(nflames - 1)];
            let mut x = mfo_move(moth, flame, self.params.b, &mut ctx.rng);
            ctx.space().repair_in_place(&mut x);
            next.push(x);
        }
        let ys = ctx.evaluate(&next)?;
        st.merge_flames(&next, &ys);
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
        let slots = super::replace_worst(&mut st.xs, &mut st.ys, replacements);
        let xs: Vec<_> = slots.iter().map(|&i| st.xs[i].clone()).collect();
        let ys: Vec<_> = slots.iter().map(|&i| st.ys[i]).collect();
        st.merge_flames(&xs, &ys);
    }

    fn save_state(&self) -> serde_json::Value {
        to_state(&self.state)
    }

    fn load_state(&mut self, state: serde_json::Value) -> Result<()> {
        self.state = from_state(state)?;
        Ok(())
    }
}
