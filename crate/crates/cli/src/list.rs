use optkit::algorithms::ALGORITHM_NAMES;
use optkit::problems::{builtin, PROBLEM_NAMES};
use optkit::AlgorithmConfig;
use serde_json::json;

pub const TUNER_NAMES: [&str; 4] = ["grid", "random", "bayes", "evolution"];

pub fn listing() -> serde_json::Value {
    let algorithms: serde_json::Map<_, _> = ALGORITHM_NAMES
        .iter()
        .map(|n| (n.to_string(), AlgorithmConfig::default_for(n).expect("registered").to_json()))
        .collect();
    let problems: serde_json::Map<_, _> = PROBLEM_NAMES
        .iter()
        .map(|n| {
            let p = builtin(n).expect("registered");
            let names: Vec<&str> = p.space.names().collect();
            (n.to_string(), json!({"mode": p.fitness.mode, "variables": names}))
        })
        .collect();
    json!({"algorithms": algorithms, "problems": problems, "tuners": TUNER_NAMES})
}

pub fn print_listing() {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "algorithms:");
    for n in ALGORITHM_NAMES {
        let cfg = AlgorithmConfig::default_for(n).expect("registered");
        let _ = writeln!(out, "  {n:<6} {}", cfg.to_json());
    }
    let _ = writeln!(out, "problems:");
    for n in PROBLEM_NAMES {
        let p = builtin(n).expect("registered");
        let _ = writeln!(out, "  {n:<6} {}-d, {:?}", p.space.dim(), p.fitness.mode);
    }
    let _ = writeln!(out, "tuners:");
    let _ = writeln!(out, "  {}", TUNER_NAMES.join(", "));
}
