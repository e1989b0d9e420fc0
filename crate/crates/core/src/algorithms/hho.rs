//! Harris hawks optimization.
//!
//! The escaping energy `E = 2 E0 (1 - k/N)` picks the phase per hawk:
//! exploration while `|E| >= 1`, then soft or hard besiege, each with or
//! without progressive rapid dives. A dive proposes `Y`, keeps it if it
//! beats the hawk, and otherwise tries the Levy-perturbed `Z = Y + S * LF`.
//!
//! A generation evaluates the dive proposals `Y` as one sub-batch, the
//! fallback `Z` points as a second, and the remaining hawks as a third, so
//! the evaluation count per generation is `nhawks` plus the number of `Z`
//! trials.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{argsort, check_min_population, from_state, mean_position, to_state, Generation, Optimizer};
use crate::engine::Ctx;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HhoParams {
    pub nhawks: usize,
}

impl Default for HhoParams {
    fn default() -> Self {
        HhoParams { nhawks: 30 }
    }
}

impl HhoParams {
    pub fn validate(&self) -> Result<()> {
        check_min_population("hho", self.nhawks, 2)
    }
}

/// Levy exponent of the rapid-dive steps.
pub const LEVY_BETA: f64 = 1.5;

/// Mantegna's sigma for beta = 1.5:
/// (G(2.5) sin(0.75 pi) / (G(1.25) * 1.5 * 2^0.25))^(1/1.5).
fn mantegna_sigma() -> f64 {
    const GAMMA_2_5: f64 = 1.329_340_388_179_137;
    const GAMMA_1_25: f64 = 0.906_402_477_055_477;
    let num = GAMMA_2_5 * (std::f64::consts::PI * LEVY_BETA / 2.0).sin();
    let den = GAMMA_1_25 * LEVY_BETA * 2f64.powf((LEVY_BETA - 1.0) / 2.0);
    (num / den).powf(1.0 / LEVY_BETA)
}

/// One Levy-flight step per coordinate (Mantegna's algorithm, scale 0.01).
pub fn levy_flight<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let sigma = mantegna_sigma();
    (0..d)
        .map(|_| {
            let u: f64 = rng.sample(StandardNormal);
            let v: f64 = rng.sample(StandardNormal);
            0.01 * u * sigma / v.abs().powf(1.0 / LEVY_BETA)
        })
        .collect()
}

/// Escaping energy of the prey at generation `k` of `n_gen`.
pub fn hho_prey_energy(e0: f64, k: usize, n_gen: usize) -> f64 {
    2.0 * e0 * (1.0 - k as f64 / n_gen.max(1) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Exploration,
    Soft,
    Hard,
    SoftDive,
    HardDive,
}

impl Phase {
    pub const ALL: [Phase; 5] = [Phase::Exploration, Phase::Soft, Phase::Hard, Phase::SoftDive, Phase::HardDive];

    fn index(self) -> usize {
        self as usize
    }
}

/// Result of the per-hawk branch selection. Dives still need the fitness
/// comparison before a position is accepted.
#[derive(Clone, Debug, PartialEq)]
pub enum Proposal {
    Move { x: Vec<f64>, phase: Phase },
    Dive { y: Vec<f64>, phase: Phase },
}

/// Everything the position update needs besides the hawk itself.
pub struct Flock<'a> {
    pub hawks: &'a [Vec<f64>],
    pub rabbit: &'a [f64],
    pub mean: &'a [f64],
    pub lower: &'a [f64],
    pub upper: &'a [f64],
}

/// Branch selection and position update for one hawk (unrepaired).
pub fn hho_position_update<R: Rng + ?Sized>(x: &[f64], flock: &Flock, e: f64, rng: &mut R) -> Proposal {
    let rabbit = flock.rabbit;
    let d = x.len();
    if e.abs() >= 1.0 {
        let q: f64 = rng.random();
        let x_new = if q >= 0.5 {
            let partner = &flock.hawks[rng.random_range(0..flock.hawks.len())];
            let r1: f64 = rng.random();
            let r2: f64 = rng.random();
            (0..d)
                .map(|j| partner[j] - r1 * (partner[j] - 2.0 * r2 * x[j]).abs())
                .collect()
        } else {
            let r3: f64 = rng.random();
            let r4: f64 = rng.random();
            (0..d)
                .map(|j| {
                    (rabbit[j] - flock.mean[j]) - r3 * (flock.lower[j] + r4 * (flock.upper[j] - flock.lower[j]))
                })
                .collect()
        };
        return Proposal::Move {
            x: x_new,
            phase: Phase::Exploration,
        };
    }
    let r: f64 = rng.random();
    let soft = e.abs() >= 0.5;
    if r >= 0.5 && !soft {
        let x_new = (0..d).map(|j| rabbit[j] - e * (rabbit[j] - x[j]).abs()).collect();
        return Proposal::Move {
            x: x_new,
            phase: Phase::Hard,
        };
    }
    let jump = 2.0 * (1.0 - rng.random::<f64>());
    if r >= 0.5 {
        let x_new = (0..d)
            .map(|j| (rabbit[j] - x[j]) - e * (jump * rabbit[j] - x[j]).abs())
            .collect();
        Proposal::Move {
            x: x_new,
            phase: Phase::Soft,
        }
    } else if soft {
        let y = (0..d).map(|j| rabbit[j] - e * (jump * rabbit[j] - x[j]).abs()).collect();
        Proposal::Dive {
            y,
            phase: Phase::SoftDive,
        }
    } else {
        let y = (0..d)
            .map(|j| rabbit[j] - e * (jump * rabbit[j] - flock.mean[j]).abs())
            .collect();
        Proposal::Dive {
            y,
            phase: Phase::HardDive,
        }
    }
}

/// `Z = Y + S * LF`, with the Levy step scaled by each variable's range.
pub fn dive_fallback<R: Rng + ?Sized>(y: &[f64], ranges: &[f64], rng: &mut R) -> Vec<f64> {
    let s: Vec<f64> = (0..y.len()).map(|_| rng.random::<f64>()).collect();
    let lf = levy_flight(y.len(), rng);
    (0..y.len()).map(|j| y[j] + s[j] * lf[j] * ranges[j]).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct State {
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
    rabbit_x: Vec<f64>,
    rabbit_y: f64,
    phase_counts: [u64; 5],
}

impl State {
    fn offer(&mut self, x: &[f64], y: f64) {
        if y < self.rabbit_y {
            self.rabbit_x = x.to_vec();
            self.rabbit_y = y;
        }
    }
}

pub struct Hho {
    params: HhoParams,
    state: Option<State>,
}

impl Hho {
    pub fn new(params: HhoParams) -> Self {
        Hho { params, state: None }
    }

    /// How often each phase has run, in [`Phase::ALL`] order.
    pub fn phase_counts(&self) -> [u64; 5] {
        self.state.as_ref().map_or([0; 5], |s| s.phase_counts)
    }

    /// Phase counters of a saved HHO state.
    pub fn phase_counts_of(state: &serde_json::Value) -> Option<[u64; 5]> {
        serde_json::from_value(state.get("phase_counts")?.clone()).ok()
    }
}

impl Optimizer for Hho {
    fn name(&self) -> &'static str {
        "hho"
    }

    fn population_size(&self) -> usize {
        self.params.nhawks
    }

    fn initialize(&mut self, ctx: &mut Ctx, population: Vec<Vec<f64>>) -> Result<()> {
        let ys = ctx.evaluate(&population)?;
        let best = argsort(&ys)[0];
        self.state = Some(State {
            rabbit_x: population[best].clone(),
            rabbit_y: ys[best],
            xs: population,
            ys,
            phase_counts: [0; 5],
        });
        Ok(())
    }

    fn step(&mut self, ctx: &mut Ctx, gen: Generation) -> Result<()> {
        let st = self.state.as_mut().expect("initialized");
        let space = ctx.space().clone();
        let (lower, upper, ranges) = (space.lower(), space.upper(), space.ranges());
        let mean = mean_position(&st.xs);
        let n = st.xs.len();

        let mut moves: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut dives: Vec<(usize, Vec<f64>)> = Vec::new();
        {
            let flock = Flock {
                hawks: &st.xs,
                rabbit: &st.rabbit_x,
                mean: &mean,
                lower: &lower,
                upper: &upper,
            };
            for i in 0..n {
                let e0 = 2.0 * ctx.rng.random::<f64>() - 1.0;
                let e = hho_prey_energy(e0, gen.index, gen.total);
                match hho_position_update(&st.xs[i], &flock, e, &mut ctx.rng) {
                    Proposal::Move { mut x, phase } => {
                        st.phase_counts[phase.index()] += 1;
                        space.repair_in_place(&mut x);
                        moves.push((i, x));
                    }
                    Proposal::Dive { mut y, phase } => {
                        st.phase_counts[phase.index()] += 1;
                        space.repair_in_place(&mut y);
                        dives.push((i, y));
                    }
                }
            }
        }

        let y_batch: Vec<Vec<f64>> = dives.iter().map(|(_, y)| y.clone()).collect();
        let y_fit = ctx.evaluate(&y_batch)?;
        let mut fallback: Vec<(usize, Vec<f64>)> = Vec::new();
        for ((i, y), fy) in dives.into_iter().zip(y_fit) {
            if fy < st.ys[i] {
                st.xs[i] = y;
                st.ys[i] = fy;
            } else {
                let mut z = dive_fallback(&y, &ranges, &mut ctx.rng);
                space.repair_in_place(&mut z);
                fallback.push((i, z));
            }
        }
        let z_batch: Vec<Vec<f64>> = fallback.iter().map(|(_, z)| z.clone()).collect();
        let z_fit = ctx.evaluate(&z_batch)?;
        for ((i, z), fz) in fallback.into_iter().zip(z_fit) {
            if fz < st.ys[i] {
                st.xs[i] = z;
                st.ys[i] = fz;
            }
        }

        let m_batch: Vec<Vec<f64>> = moves.iter().map(|(_, x)| x.clone()).collect();
        let m_fit = ctx.evaluate(&m_batch)?;
        for ((i, x), fx) in moves.into_iter().zip(m_fit) {
            st.xs[i] = x;
            st.ys[i] = fx;
        }
        for i in 0..n {
            let (x, y) = (st.xs[i].clone(), st.ys[i]);
            st.offer(&x, y);
        }
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

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn flock<'a>(hawks: &'a [Vec<f64>], rabbit: &'a [f64], mean: &'a [f64], lo: &'a [f64], hi: &'a [f64]) -> Flock<'a> {
        Flock {
            hawks,
            rabbit,
            mean,
            lower: lo,
            upper: hi,
        }
    }

    #[test]
    fn energy_schedule() {
        assert_eq!(hho_prey_energy(0.5, 0, 10), 1.0);
        assert_eq!(hho_prey_energy(-1.0, 5, 10), -1.0);
        assert_eq!(hho_prey_energy(0.7, 10, 10), 0.0);
    }

    #[test]
    fn hard_besiege_fixed_point() {
        let rabbit = vec![0.2, -0.4];
        let hawks = vec![rabbit.clone()];
        let (lo, hi) = (vec![-1.0; 2], vec![1.0; 2]);
        let f = flock(&hawks, &rabbit, &rabbit, &lo, &hi);
        let mut hits = 0;
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            if let Proposal::Move { x, phase: Phase::Hard } = hho_position_update(&rabbit, &f, 0.3, &mut rng) {
                assert_eq!(x, rabbit);
                hits += 1;
            }
        }
        assert!(hits > 50);
    }

    #[test]
    fn exploration_with_zero_r3_returns_rabbit_minus_mean() {
        // Replays the q < 0.5 branch with the same draws.
        let rabbit = vec![0.5, 0.5];
        let mean = vec![0.1, -0.2];
        let hawks = vec![vec![0.0, 0.0]];
        let (lo, hi) = (vec![-1.0; 2], vec![1.0; 2]);
        let f = flock(&hawks, &rabbit, &mean, &lo, &hi);
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = hho_position_update(&hawks[0], &f, 1.5, &mut rng);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q: f64 = rng.random();
            if q < 0.5 {
                let r3: f64 = rng.random();
                let r4: f64 = rng.random();
                let want: Vec<f64> = (0..2).map(|j| (rabbit[j] - mean[j]) - r3 * (-1.0 + r4 * 2.0)).collect();
                assert_eq!(p, Proposal::Move { x: want, phase: Phase::Exploration });
                // r3 = 0 collapses onto rabbit - mean
                let r3 = 0.0;
                let collapsed: Vec<f64> = (0..2).map(|j| (rabbit[j] - mean[j]) - r3 * (-1.0 + r4 * 2.0)).collect();
                assert_eq!(collapsed, vec![0.4, 0.7]);
            }
        }
    }

    #[test]
    fn levy_steps_are_heavy_tailed_but_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let steps = levy_flight(20_000, &mut rng);
        assert!(steps.iter().all(|s| s.is_finite()));
        let mut abs: Vec<f64> = steps.iter().map(|s| s.abs()).collect();
        abs.sort_by(f64::total_cmp);
        let median = abs[abs.len() / 2];
        let p999 = abs[abs.len() * 999 / 1000];
        // a Gaussian would give p99.9 / median near 4.9
        assert!(p999 / median > 20.0, "{}", p999 / median);
    }

    #[test]
    fn mantegna_sigma_value() {
        assert!((mantegna_sigma() - 0.696_574_502_557_696).abs() < 1e-9);
    }
}
