mod common;

use common::chi_square;
use optkit::engine::CoordRng;
use optkit::pesa::{sub_seeds, PesaParams, PesaVariant, ReplayMemory};
use optkit::{AlgorithmConfig, FitnessSpec, Mode, OptimizerConfig, Run, SearchSpace, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn filled_memory(n: usize, alpha: f64, seed: u64) -> ReplayMemory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = ReplayMemory::new(1000, alpha);
    for i in 0..n {
        let y = rng.random_range(-10.0..10.0);
        m.add(vec![i as f64], vec![Value::Float(i as f64)], y);
    }
    m
}

#[test]
fn prioritized_draws_follow_rank_probabilities() {
    for alpha in [0.5, 1.0, 2.0] {
        let m = filled_memory(12, alpha, 4);
        let rank_of: std::collections::HashMap<u64, usize> =
            m.entries().enumerate().map(|(r, e)| (e.index, r)).collect();
        // Independent reference: p_r = r^-alpha / sum.
        let w: Vec<f64> = (1..=12).map(|r| (r as f64).powf(-alpha)).collect();
        let total: f64 = w.iter().sum();
        let want: Vec<f64> = w.iter().map(|v| v / total).collect();
        for (a, b) in m.probabilities().iter().zip(&want) {
            assert!((a - b).abs() < 1e-15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = vec![0u64; 12];
        for _ in 0..100_000 {
            let pick = m.sample_prioritized(1, &mut rng);
            counts[rank_of[&pick[0].index]] += 1;
        }
        let (stat, crit) = chi_square(&counts, &want, 0.001);
        assert!(stat < crit, "alpha {alpha}: chi2 {stat} >= {crit}");
    }
}

#[test]
fn greedy_returns_exact_top_n() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let n = rng.random_range(1..60);
        let m = filled_memory(n, 1.0, rng.random());
        let mut all: Vec<(f64, u64)> = m.entries().map(|e| (e.y, e.index)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let k = rng.random_range(0..n + 5);
        let got: Vec<(f64, u64)> = m.sample_greedy(k).iter().map(|e| (e.y, e.index)).collect();
        assert_eq!(got, all[..k.min(n)].to_vec());
    }
}

fn sphere_space() -> (SearchSpace, FitnessSpec) {
    (
        SearchSpace::uniform_float(4, -10.0, 10.0).unwrap(),
        FitnessSpec::from_fn("sphere", Mode::Min, |x| x.iter().map(|v| v * v).sum()),
    )
}

/// With both replay fractions zero each sub-algorithm must behave exactly
/// like a standalone run seeded with its sub-seed.
#[test]
fn zero_replay_matches_standalone_subs() {
    for variant in [PesaVariant::Classic, PesaVariant::Modern] {
        for seed in [1u64, 19, 400] {
            let params = PesaParams {
                npop: 10,
                lambda_greedy: 0.0,
                lambda_prio: 0.0,
                ..PesaParams::default()
            };
            let algo = match variant {
                PesaVariant::Classic => AlgorithmConfig::Pesa(params.clone()),
                PesaVariant::Modern => AlgorithmConfig::Pesa2(params.clone()),
            };
            let (space, fitness) = sphere_space();
            let ngen = 20;
            let mut pesa = Run::new(&OptimizerConfig::new(algo, space.clone(), fitness.clone()).with_seed(seed), ngen, None).unwrap();
            pesa.run_to_end().unwrap();
            let state = pesa.checkpoint().algorithm_state;

            let seeds = sub_seeds(&mut CoordRng::seed_from_u64(seed));
            assert_eq!(state["seeds"], serde_json::json!(seeds));
            let mut best_total = f64::INFINITY;
            for (i, sub) in params.sub_configs(variant).into_iter().enumerate() {
                let cfg = OptimizerConfig::new(sub, space.clone(), fitness.clone()).with_seed(seeds[i]);
                let mut alone = Run::new(&cfg, ngen, None).unwrap();
                alone.run_to_end().unwrap();
                let cp = alone.checkpoint();
                assert_eq!(state["subs"][i], cp.algorithm_state, "{variant:?} seed {seed} sub {i}");
                assert_eq!(state["ctxs"][i], serde_json::to_value(&cp.ctx).unwrap());
                best_total = best_total.min(alone.result().y_best);
            }
            assert_eq!(pesa.result().y_best, best_total);
        }
    }
}

#[test]
fn replay_changes_the_trajectory() {
    let (space, fitness) = sphere_space();
    let run = |lg: f64| {
        let params = PesaParams { npop: 10, lambda_greedy: lg, lambda_prio: 0.0, ..PesaParams::default() };
        let cfg = OptimizerConfig::new(AlgorithmConfig::Pesa2(params), space.clone(), fitness.clone()).with_seed(5);
        optkit::run_optimizer(&cfg, 30, None).unwrap()
    };
    let (a, b) = (run(0.0), run(0.3));
    assert_ne!(a.log, b.log);
}
