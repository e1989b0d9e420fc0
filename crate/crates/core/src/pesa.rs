//! PESA and PESA2: three sub-algorithms stepping in lockstep over a shared
//! replay memory.
//!
//! Every generation each sub-algorithm runs one step in its own context
//! (own RNG stream, so they can run on separate threads). Their evaluations
//! are then merged into the shared memory in a fixed order, and each
//! sub-population has its worst members overwritten by `lambda_greedy` of
//! the memory's top entries and `lambda_prio` of rank-prioritized samples.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::algorithms::{
    check_probability, AlgorithmConfig, DeParams, EsParams, Generation, GwoParams, Optimizer, PsoParams, SaParams,
    WoaParams,
};
use crate::engine::{CoordRng, Ctx, CtxState};
use crate::error::{OptError, Result};
use crate::space::{Value, ValueKey};

/// Fitness with a total order, so it can key a `BTreeMap`.
#[derive(Clone, Copy, Debug)]
struct Fit(f64);

impl PartialEq for Fit {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Fit {}
impl PartialOrd for Fit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Fit {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// A stored evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub x: Vec<f64>,
    pub decoded: Vec<Value>,
    pub y: f64,
    pub index: u64,
}

/// Fitness-ranked store of evaluated points, unique by decoded value.
#[derive(Clone, Debug)]
pub struct ReplayMemory {
    capacity: usize,
    alpha: f64,
    by_key: HashMap<Vec<ValueKey>, (Fit, u64)>,
    ranked: BTreeMap<(Fit, u64), MemoryEntry>,
    next_index: u64,
    added: u64,
}

fn key_of(decoded: &[Value]) -> Vec<ValueKey> {
    decoded.iter().map(Value::key).collect()
}

impl ReplayMemory {
    pub fn new(capacity: usize, alpha: f64) -> Self {
        ReplayMemory {
            capacity: capacity.max(1),
            alpha,
            by_key: HashMap::new(),
            ranked: BTreeMap::new(),
            next_index: 0,
            added: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total number of insertions ever offered.
    pub fn added(&self) -> u64 {
        self.added
    }

    pub fn best(&self) -> Option<&MemoryEntry> {
        self.ranked.values().next()
    }

    /// Entries best-first.
    pub fn entries(&self) -> impl Iterator<Item = &MemoryEntry> {
        self.ranked.values()
    }

    /// Inserts an evaluated point. A repeated decoded point replaces the old
    /// entry; past capacity the worst entry is evicted.
    pub fn add(&mut self, x: Vec<f64>, decoded: Vec<Value>, y: f64) {
        self.added += 1;
        let key = key_of(&decoded);
        if let Some(old) = self.by_key.remove(&key) {
            self.ranked.remove(&old);
        }
        let index = self.next_index;
        self.next_index += 1;
        self.by_key.insert(key, (Fit(y), index));
        self.ranked.insert((Fit(y), index), MemoryEntry { x, decoded, y, index });
        while self.ranked.len() > self.capacity {
            let (_, worst) = self.ranked.pop_last().expect("non-empty");
            self.by_key.remove(&key_of(&worst.decoded));
        }
    }

    /// Priority of the entry at 1-based fitness rank `rank`.
    pub fn priority(&self, rank: usize) -> f64 {
        (rank as f64).powf(-self.alpha)
    }

    /// Sampling probabilities in rank order; they sum to 1.
    pub fn probabilities(&self) -> Vec<f64> {
        let p: Vec<f64> = (1..=self.len()).map(|r| self.priority(r)).collect();
        let total: f64 = p.iter().sum();
        p.into_iter().map(|v| v / total).collect()
    }

    /// The `n` best entries, best-first. Asking for more than the memory
    /// holds returns everything.
    pub fn sample_greedy(&self, n: usize) -> Vec<&MemoryEntry> {
        self.ranked.values().take(n).collect()
    }

    /// `n` draws without replacement, each with probability proportional
    /// to `rank^-alpha` among the entries not yet drawn. Asking for more
    /// than the memory holds returns everything.
    pub fn sample_prioritized<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&MemoryEntry> {
        let entries: Vec<&MemoryEntry> = self.ranked.values().collect();
        if n >= entries.len() {
            return entries;
        }
        let mut weights: Vec<f64> = (1..=entries.len()).map(|r| self.priority(r)).collect();
        let mut total: f64 = weights.iter().sum();
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, w) in weights.iter().enumerate() {
                if *w == 0.0 {
                    continue;
                }
                acc += w;
                pick = Some(i);
                if target < acc {
                    break;
                }
            }
            let i = pick.expect("positive weight remains");
            total -= weights[i];
            weights[i] = 0.0;
            out.push(entries[i]);
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct MemoryState {
    capacity: usize,
    alpha: f64,
    next_index: u64,
    added: u64,
    entries: Vec<MemoryEntry>,
}

impl Serialize for ReplayMemory {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MemoryState {
            capacity: self.capacity,
            alpha: self.alpha,
            next_index: self.next_index,
            added: self.added,
            entries: self.ranked.values().cloned().collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ReplayMemory {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let st = MemoryState::deserialize(d)?;
        let mut m = ReplayMemory::new(st.capacity, st.alpha);
        for e in st.entries {
            m.by_key.insert(key_of(&e.decoded), (Fit(e.y), e.index));
            m.ranked.insert((Fit(e.y), e.index), e);
        }
        m.next_index = st.next_index;
        m.added = st.added;
        Ok(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PesaVariant {
    /// ES + PSO + SA.
    Classic,
    /// GWO + DE + WOA.
    Modern,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PesaParams {
    /// Population of each sub-algorithm unless its own block says otherwise.
    pub npop: usize,
    pub lambda_greedy: f64,
    pub lambda_prio: f64,
    pub alpha_prio: f64,
    /// Memory capacity as a multiple of the combined population.
    pub memory_factor: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub es: Option<EsParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pso: Option<PsoParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sa: Option<SaParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gwo: Option<GwoParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub de: Option<DeParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub woa: Option<WoaParams>,
}

impl Default for PesaParams {
    fn default() -> Self {
        PesaParams {
            npop: 50,
            lambda_greedy: 0.2,
            lambda_prio: 0.2,
            alpha_prio: 0.5,
            memory_factor: 50,
            es: None,
            pso: None,
            sa: None,
            gwo: None,
            de: None,
            woa: None,
        }
    }
}

impl PesaParams {
    pub fn validate(&self) -> Result<()> {
        check_probability("lambda_greedy", self.lambda_greedy)?;
        check_probability("lambda_prio", self.lambda_prio)?;
        if self.lambda_greedy + self.lambda_prio > 1.0 {
            return Err(OptError::Config("lambda_greedy + lambda_prio must not exceed 1".into()));
        }
        if !(self.alpha_prio >= 0.0 && self.alpha_prio.is_finite()) {
            return Err(OptError::Config(format!("alpha_prio must be >= 0, got {}", self.alpha_prio)));
        }
        if self.memory_factor == 0 {
            return Err(OptError::Config("memory_factor must be positive".into()));
        }
        for v in [PesaVariant::Classic, PesaVariant::Modern] {
            for sub in self.sub_configs(v) {
                sub.validate()?;
            }
        }
        Ok(())
    }

    /// Resolved configurations of the three sub-algorithms.
    pub fn sub_configs(&self, variant: PesaVariant) -> [AlgorithmConfig; 3] {
        let n = self.npop;
        match variant {
            PesaVariant::Classic => [
                AlgorithmConfig::Es(self.es.clone().unwrap_or(EsParams {
                    lambda: n,
                    mu: (n / 2).max(1),
                    ..EsParams::default()
                })),
                AlgorithmConfig::Pso(self.pso.clone().unwrap_or(PsoParams {
                    npar: n,
                    ..PsoParams::default()
                })),
                AlgorithmConfig::Sa(self.sa.clone().unwrap_or(SaParams {
                    chain_size: 1,
                    chains: n,
                    ..SaParams::default()
                })),
            ],
            PesaVariant::Modern => [
                AlgorithmConfig::Gwo(self.gwo.clone().unwrap_or(GwoParams { nwolves: n })),
                AlgorithmConfig::De(self.de.clone().unwrap_or(DeParams {
                    npop: n,
                    ..DeParams::default()
                })),
                AlgorithmConfig::Woa(self.woa.clone().unwrap_or(WoaParams {
                    nwhales: n,
                    ..WoaParams::default()
                })),
            ],
        }
    }
}

/// Seeds of the three sub-algorithm RNG streams, drawn from the run's RNG.
pub fn sub_seeds(rng: &mut CoordRng) -> [u64; 3] {
    [rng.next_u64(), rng.next_u64(), rng.next_u64()]
}

#[derive(Serialize, Deserialize)]
struct State {
    seeds: [u64; 3],
    subs: Vec<serde_json::Value>,
    ctxs: Vec<CtxState>,
    memory: ReplayMemory,
}

pub struct Pesa {
    variant: PesaVariant,
    params: PesaParams,
    subs: Vec<Box<dyn Optimizer>>,
    seeds: Option<[u64; 3]>,
    ctxs: Vec<Ctx>,
    pending: Option<Vec<CtxState>>,
    memory: ReplayMemory,
}

impl Pesa {
    pub fn new(variant: PesaVariant, params: PesaParams) -> Self {
        let subs = params.sub_configs(variant).iter().map(AlgorithmConfig::build).collect();
        Pesa {
            variant,
            params,
            subs,
            seeds: None,
            ctxs: Vec::new(),
            pending: None,
            memory: ReplayMemory::new(1, 0.0),
        }
    }

    pub fn variant(&self) -> PesaVariant {
        self.variant
    }

    pub fn memory(&self) -> &ReplayMemory {
        &self.memory
    }

    pub fn sub_names(&self) -> Vec<&'static str> {
        self.subs.iter().map(|s| s.name()).collect()
    }

    /// Best fitness seen by each sub-algorithm's own context.
    pub fn sub_best(&self) -> Vec<f64> {
        self.ctxs
            .iter()
            .map(|c| c.incumbent().map_or(f64::INFINITY, |i| i.y))
            .collect()
    }

    fn sub_sizes(&self) -> Vec<usize> {
        self.subs.iter().map(|s| s.population_size()).collect()
    }

    fn ensure_contexts(&mut self, ctx: &mut Ctx) -> Result<()> {
        if let Some(states) = self.pending.take() {
            self.ctxs = states
                .iter()
                .map(|s| Ctx::restore(ctx.evaluator().clone(), s))
                .collect::<Result<_>>()?;
        }
        if self.ctxs.is_empty() {
            let seeds = sub_seeds(&mut ctx.rng);
            self.seeds = Some(seeds);
            self.ctxs = seeds
                .iter()
                .map(|&s| Ctx::new(ctx.evaluator().clone(), CoordRng::seed_from_u64(s)))
                .collect();
            let total: usize = self.sub_sizes().iter().sum();
            self.memory = ReplayMemory::new(self.params.memory_factor * total, self.params.alpha_prio);
        }
        for c in &mut self.ctxs {
            c.set_recording(true);
        }
        Ok(())
    }

    /// Runs `f` on every (sub-algorithm, context) pair, concurrently when
    /// the evaluator has more than one worker.
    fn for_each_sub<F>(&mut self, parallel: bool, f: F) -> Result<()>
    where
        F: Fn(usize, &mut dyn Optimizer, &mut Ctx) -> Result<()> + Sync,
    {
        if !parallel {
            for (i, (sub, c)) in self.subs.iter_mut().zip(self.ctxs.iter_mut()).enumerate() {
                f(i, sub.as_mut(), c)?;
            }
            return Ok(());
        }
        let f = &f;
        let results: Vec<Result<()>> = std::thread::scope(|scope| {
            let handles: Vec<_> = self
                .subs
                .iter_mut()
                .zip(self.ctxs.iter_mut())
                .enumerate()
                .map(|(i, (sub, c))| scope.spawn(move || f(i, sub.as_mut(), c)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p)))
                .collect()
        });
        results.into_iter().collect()
    }

    /// Moves every sub-evaluation into the parent context and the memory.
    fn merge(&mut self, ctx: &mut Ctx) {
        let space = ctx.space().clone();
        for c in &mut self.ctxs {
            for (x, y) in c.take_recorded() {
                ctx.observe(&x, y);
                let decoded = space.decode_unchecked(&x);
                self.memory.add(x, decoded, y);
            }
        }
    }

    fn replay(&mut self, ctx: &mut Ctx) {
        let (lg, lp) = (self.params.lambda_greedy, self.params.lambda_prio);
        if lg == 0.0 && lp == 0.0 {
            return;
        }
        for sub in &mut self.subs {
            let n = sub.members().len();
            let ng = ((lg * n as f64).round() as usize).min(n);
            let np = ((lp * n as f64).round() as usize).min(n - ng);
            let mut picks: Vec<(Vec<f64>, f64)> = self
                .memory
                .sample_greedy(ng)
                .into_iter()
                .map(|e| (e.x.clone(), e.y))
                .collect();
            picks.extend(
                self.memory
                    .sample_prioritized(np, &mut ctx.rng)
                    .into_iter()
                    .map(|e| (e.x.clone(), e.y)),
            );
            if !picks.is_empty() {
                sub.inject(picks);
            }
        }
    }
}

impl Optimizer for Pesa {
    fn name(&self) -> &'static str {
        match self.variant {
            PesaVariant::Classic => "pesa",
            PesaVariant::Modern => "pesa2",
        }
    }

    fn population_size(&self) -> usize {
        self.sub_sizes().iter().sum()
    }

    fn initial_population(&mut self, ctx: &mut Ctx) -> Vec<Vec<f64>> {
        self.ensure_contexts(ctx).expect("fresh contexts");
        let mut out = Vec::new();
        for (sub, c) in self.subs.iter_mut().zip(self.ctxs.iter_mut()) {
            out.extend(sub.initial_population(c));
        }
        out
    }

    fn initialize(&mut self, ctx: &mut Ctx, population: Vec<Vec<f64>>) -> Result<()> {
        self.ensure_contexts(ctx)?;
        let sizes = self.sub_sizes();
        let mut slices = Vec::with_capacity(3);
        let mut rest = population;
        for &n in &sizes {
            let tail = rest.split_off(n.min(rest.len()));
            slices.push(std::mem::replace(&mut rest, tail));
        }
        let slices = std::sync::Mutex::new(slices.into_iter().map(Some).collect::<Vec<_>>());
        let parallel = ctx.evaluator().workers > 1;
        self.for_each_sub(parallel, |i, sub, c| {
            let slice = slices.lock().expect("slices")[i].take().expect("one slice per sub");
            sub.initialize(c, slice)
        })?;
        self.merge(ctx);
        Ok(())
    }

    fn step(&mut self, ctx: &mut Ctx, gen: Generation) -> Result<()> {
        self.ensure_contexts(ctx)?;
        let parallel = ctx.evaluator().workers > 1;
        self.for_each_sub(parallel, |_, sub, c| sub.step(c, gen))?;
        self.merge(ctx);
        self.replay(ctx);
        Ok(())
    }

    fn members(&self) -> Vec<(Vec<f64>, f64)> {
        self.subs.iter().flat_map(|s| s.members()).collect()
    }

    fn inject(&mut self, replacements: Vec<(Vec<f64>, f64)>) {
        if let Some(first) = self.subs.first_mut() {
            first.inject(replacements);
        }
    }

    fn save_state(&self) -> serde_json::Value {
        let state = State {
            seeds: self.seeds.unwrap_or_default(),
            subs: self.subs.iter().map(|s| s.save_state()).collect(),
            ctxs: match &self.pending {
                Some(p) => p.clone(),
                None => self.ctxs.iter().map(Ctx::snapshot).collect(),
            },
            memory: self.memory.clone(),
        };
        serde_json::to_value(state).expect("pesa state serializes")
    }

    fn load_state(&mut self, state: serde_json::Value) -> Result<()> {
        let st: State =
            serde_json::from_value(state).map_err(|e| OptError::Checkpoint(format!("bad pesa state: {e}")))?;
        if st.subs.len() != self.subs.len() || st.ctxs.len() != self.subs.len() {
            return Err(OptError::Checkpoint("pesa state has the wrong number of sub-algorithms".into()));
        }
        for (sub, s) in self.subs.iter_mut().zip(st.subs) {
            sub.load_state(s)?;
        }
        self.seeds = Some(st.seeds);
        self.ctxs.clear();
        self.pending = Some(st.ctxs);
        self.memory = st.memory;
        Ok(())
    }
}
