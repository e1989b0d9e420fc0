use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use optkit::surrogate::{nhho_run, train_surrogate, NhhoConfig, SurrogateNet, TrainConfig};
use optkit::{FitnessSpec, Mode, SearchSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn trained_net(d: usize, seed: u64) -> (SurrogateNet, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lower: Vec<f64> = (0..d).map(|i| -2.0 - i as f64).collect();
    let upper: Vec<f64> = (0..d).map(|i| 3.0 + 2.0 * i as f64).collect();
    let xs: Vec<Vec<f64>> = (0..200)
        .map(|_| lower.iter().zip(&upper).map(|(l, u)| rng.random_range(*l..*u)).collect())
        .collect();
    let ys: Vec<f64> = xs.iter().map(|x| x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v.sin() + v * v).sum()).collect();
    let cfg = TrainConfig { hidden: vec![16, 8], epochs: 40, ..TrainConfig::default() };
    (train_surrogate(&xs, &ys, &lower, &upper, &cfg, seed).unwrap(), lower, upper)
}

/// Forward pass rebuilt from the serialized weights with nalgebra.
fn oracle_predict(net: &SurrogateNet, x: &[f64]) -> f64 {
    let doc = serde_json::to_value(net).unwrap();
    let floats = |v: &serde_json::Value| -> Vec<f64> { v.as_array().unwrap().iter().map(|f| f.as_f64().unwrap()).collect() };
    let lower = floats(&doc["lower"]);
    let range = floats(&doc["range"]);
    let mut a = DVector::from_iterator(x.len(), x.iter().zip(&lower).zip(&range).map(|((x, l), r)| (x - l) / r));
    let layers = doc["layers"].as_array().unwrap();
    for (k, layer) in layers.iter().enumerate() {
        let n_in = layer["n_in"].as_u64().unwrap() as usize;
        let n_out = layer["n_out"].as_u64().unwrap() as usize;
        let w = DMatrix::from_row_slice(n_out, n_in, &floats(&layer["w"]));
        let b = DVector::from_vec(floats(&layer["b"]));
        a = w * a + b;
        if k + 1 < layers.len() {
            a.apply(|v| *v = v.tanh());
        }
    }
    doc["y_mean"].as_f64().unwrap() + doc["y_std"].as_f64().unwrap() * a[0]
}

#[test]
fn forward_pass_matches_matrix_oracle() {
    let (net, lower, upper) = trained_net(3, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let x: Vec<f64> = lower.iter().zip(&upper).map(|(l, u)| rng.random_range(*l..*u)).collect();
        let got = net.predict(&x).unwrap();
        let want = oracle_predict(&net, &x);
        assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{got} vs {want}");
    }
}

#[test]
fn input_gradient_matches_central_differences() {
    for seed in 0..5 {
        let (net, lower, upper) = trained_net(4, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        for _ in 0..20 {
            let x: Vec<f64> = lower.iter().zip(&upper).map(|(l, u)| rng.random_range(*l..*u)).collect();
            let g = net.input_gradient(&x).unwrap();
            let fd: Vec<f64> = (0..x.len())
                .map(|i| {
                    let h = 1e-5 * (upper[i] - lower[i]);
                    let (mut xp, mut xm) = (x.clone(), x.clone());
                    xp[i] += h;
                    xm[i] -= h;
                    (net.predict(&xp).unwrap() - net.predict(&xm).unwrap()) / (2.0 * h)
                })
                .collect();
            let diff: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(diff <= 1e-4 * norm, "seed {seed}: {g:?} vs {fd:?}");
        }
    }
}

fn counted_sphere(d: usize) -> (SearchSpace, FitnessSpec, Arc<AtomicUsize>) {
    let calls = Arc::new(AtomicUsize::new(0));
    let c = calls.clone();
    let fitness = FitnessSpec::from_fn("sphere", Mode::Min, move |x| {
        c.fetch_add(1, Ordering::SeqCst);
        x.iter().map(|v| v * v).sum()
    });
    (SearchSpace::uniform_float(d, -5.0, 5.0).unwrap(), fitness, calls)
}

fn quick(cfg: &mut NhhoConfig) {
    cfg.train = TrainConfig { hidden: vec![16, 16], epochs: 60, ..TrainConfig::default() };
    cfg.ensemble_size = 3;
}

#[test]
fn nhho_spends_exactly_its_budget_and_keeps_the_best_true_value() {
    let (space, fitness, calls) = counted_sphere(3);
    let mut cfg = NhhoConfig::new(space.clone(), fitness, 4, 60, 30);
    quick(&mut cfg);
    let res = nhho_run(&cfg).unwrap();
    assert_eq!(res.true_evals, 60 + cfg.top_k);
    assert_eq!(calls.load(Ordering::SeqCst), res.true_evals);
    assert_eq!(res.log.records.len(), 2);
    assert!(res.y_best <= res.log.records[0].best);
    let x: Vec<f64> = res.x_best.iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(res.y_best, x.iter().map(|v| v * v).sum::<f64>());
    assert!(space.contains(&res.x_best));
}

#[test]
fn nhho_is_reproducible_and_rejects_small_budgets() {
    let (space, fitness, _) = counted_sphere(3);
    let mut cfg = NhhoConfig::new(space.clone(), fitness.clone(), 9, 40, 20);
    quick(&mut cfg);
    let a = nhho_run(&cfg).unwrap();
    let b = nhho_run(&cfg).unwrap();
    assert_eq!((a.x_best, a.y_best), (b.x_best, b.y_best));
    assert_eq!(a.ensemble, b.ensemble);

    assert!(nhho_run(&NhhoConfig::new(space.clone(), fitness.clone(), 1, 29, 10)).is_err());

    let skip = nhho_run(&NhhoConfig::new(space, fitness, 1, 30, 0)).unwrap();
    assert_eq!(skip.true_evals, 30);
    assert!(skip.ensemble.is_none());
}

#[test]
fn nhho_maximization_mirrors_minimization() {
    let space = SearchSpace::uniform_float(2, -5.0, 5.0).unwrap();
    let fmin = FitnessSpec::from_fn("sphere", Mode::Min, |x| x.iter().map(|v| v * v).sum());
    let fmax = FitnessSpec::from_fn("neg-sphere", Mode::Max, |x| -x.iter().map(|v| v * v).sum::<f64>());
    let mut a = NhhoConfig::new(space.clone(), fmin, 3, 20, 15);
    let mut b = NhhoConfig::new(space, fmax, 3, 20, 15);
    quick(&mut a);
    quick(&mut b);
    let (ra, rb) = (nhho_run(&a).unwrap(), nhho_run(&b).unwrap());
    assert_eq!(ra.log.records[0].best, -rb.log.records[0].best);
    assert!(rb.y_best >= rb.log.records[0].best);
}
