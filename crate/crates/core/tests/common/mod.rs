//! Independent oracles and fixtures shared by the integration and
//! acceptance tests.
#![allow(dead_code)]

use std::time::Duration;

use optkit::{FitnessSpec, Mode, SearchSpace};
use rand::seq::SliceRandom;
use rand::Rng;

/// Every stage of the SOFC voltage chain, evaluated straight from the
/// equations with the shipped constants file.
#[derive(Clone, Copy, Debug)]
pub struct SofcChain {
    pub e: f64,
    pub j0_a: f64,
    pub j0_c: f64,
    pub act_a: f64,
    pub act_c: f64,
    pub ohm: f64,
    pub conc_a: f64,
    pub conc_c: f64,
    pub v_cell: f64,
    pub power: f64,
    pub power_density: f64,
    pub eta: f64,
    pub fitness: f64,
}

fn constant(table: &toml::Table, key: &str) -> f64 {
    table[key].as_float().unwrap_or_else(|| panic!("constant {key}"))
}

pub fn sofc_chain(x: &[f64]) -> SofcChain {
    let c: toml::Table = optkit::sofc::CONSTANTS_TOML.parse().unwrap();
    let k = |key: &str| constant(&c, key);
    let (t, f, r, n) = (k("temperature"), k("faraday"), k("gas_constant"), k("electrons"));
    let [j, area, p_o2, p_h2o, eps, xi, dp, ds, neck, la, lc, le, sa, sc, _s_h2, _s_h2o, s_o2, s_n2, ga, gc] =
        x.try_into().unwrap();
    let rt = r * t;

    let dg = -282150.0 + 86.735 * t;
    let e = -dg / (n * f) + rt / (n * f) * (k("p_h2") * p_o2.powf(0.5) / p_h2o).ln();

    let micro = 72.0 * neck * (dp - (dp + ds) * eps) * eps / (ds.powi(2) * dp.powi(2) * (1.0 - (1.0 - neck.powi(2)).sqrt()));
    let p = k("pressure");
    let j0_a = ga * micro * (k("p_h2") / p) * (p_h2o / p) * (-k("e_act_anode") / rt).exp();
    let j0_c = gc * micro * (p_o2 / p).powf(0.25) * (-k("e_act_cathode") / rt).exp();
    let act_a = rt / f * (j / (2.0 * j0_a)).asinh();
    let act_c = rt / f * (j / (2.0 * j0_c)).asinh();

    let sigma_e = k("electrolyte_conductivity_pre") * (-k("electrolyte_activation_temp") / t).exp();
    let ohm = j * la / sa + j * lc / sc + j * le / sigma_e;

    let conc_a = rt / (n * f) * ((1.0 + j / k("j_limit_h2o")) / (1.0 - j / k("j_limit_h2"))).ln();

    // Knudsen (kinetic theory in a cylindrical pore) and Chapman-Enskog
    // binary diffusivities, porosity/tortuosity scaled, Bosanquet combined.
    let m_o2 = k("molar_mass_o2");
    let m_n2 = k("molar_mass_n2");
    let d_kn = dp / 3.0 * (8.0 * rt / (std::f64::consts::PI * m_o2 / 1000.0)).sqrt();
    let ts = t / (k("lj_energy_o2") * k("lj_energy_n2")).sqrt();
    let omega = 1.06036 * ts.powf(-0.15610)
        + 0.19300 * (-0.47635 * ts).exp()
        + 1.03587 * (-1.52996 * ts).exp()
        + 1.76474 * (-3.89411 * ts).exp();
    let p_c = p_o2 + k("p_n2");
    let sigma = (s_o2 + s_n2) / 2.0;
    let m_ab = 2.0 * m_o2 * m_n2 / (m_o2 + m_n2);
    let d_bin = 2.66e-7 * t.powf(1.5) / (p_c * 1.01325 * m_ab.sqrt() * sigma.powi(2) * omega);
    let d_eff = eps / xi * d_kn * d_bin / (d_kn + d_bin);
    let ratio = d_kn / (d_kn + d_bin);
    let growth = (j * rt * lc * ratio / (4.0 * f * d_eff * p_c * 101325.0)).exp();
    let conc_c = rt / (4.0 * f) * (p_o2 / (p_c / ratio - (p_c / ratio - p_o2) * growth)).ln();

    let v_cell = e - act_a - act_c - ohm - conc_a - conc_c;
    let power = j * area * v_cell;
    let power_density = j * v_cell;
    let eta = -n * f * v_cell / k("enthalpy");
    SofcChain {
        e,
        j0_a,
        j0_c,
        act_a,
        act_c,
        ohm,
        conc_a,
        conc_c,
        v_cell,
        power,
        power_density,
        eta,
        fitness: 0.5 * power_density + 0.5 * 100.0 * eta,
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs())
}

/// Latin hypercube sample of `n` points in `[lo, hi]` per axis.
pub fn latin_hypercube<R: Rng>(n: usize, bounds: &[(f64, f64)], rng: &mut R) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; bounds.len()]; n];
    for (d, &(lo, hi)) in bounds.iter().enumerate() {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (i, s) in strata.into_iter().enumerate() {
            let u = (s as f64 + rng.random::<f64>()) / n as f64;
            pts[i][d] = lo + u * (hi - lo);
        }
    }
    pts
}

pub fn sofc_bounds() -> Vec<(f64, f64)> {
    optkit::sofc::PARAM_BOUNDS.iter().map(|&(_, lo, hi)| (lo, hi)).collect()
}

/// Three-bar truss volume and feasibility, written out from the problem
/// statement (load 2, stress limit 2, bar length 100).
pub fn truss_volume_feasible(x1: f64, x2: f64) -> (f64, bool) {
    let r2 = 2f64.sqrt();
    let vol = 100.0 * (2.0 * r2 * x1 + x2);
    let den = r2 * x1 * x1 + 2.0 * x1 * x2;
    let g1 = 2.0 * (r2 * x1 + x2) / den - 2.0;
    let g2 = 2.0 * x2 / den - 2.0;
    let g3 = 2.0 / (r2 * x2 + x1) - 2.0;
    (vol, g1 <= 0.0 && g2 <= 0.0 && g3 <= 0.0)
}

/// Best feasible truss design from a grid over the unit square, refined
/// around the incumbent five times by a factor of 20.
pub fn truss_grid_optimum() -> (f64, f64, f64) {
    let (mut lo1, mut hi1, mut lo2, mut hi2) = (1e-6, 1.0, 1e-6, 1.0);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for _ in 0..6 {
        let n = 1000;
        for a in 0..=n {
            let x1 = lo1 + (hi1 - lo1) * a as f64 / n as f64;
            for b in 0..=n {
                let x2 = lo2 + (hi2 - lo2) * b as f64 / n as f64;
                let (v, ok) = truss_volume_feasible(x1, x2);
                if ok && v < best.0 {
                    best = (v, x1, x2);
                }
            }
        }
        let (w1, w2) = ((hi1 - lo1) / 20.0, (hi2 - lo2) / 20.0);
        lo1 = (best.1 - w1).max(1e-9);
        hi1 = (best.1 + w1).min(1.0);
        lo2 = (best.2 - w2).max(1e-9);
        hi2 = (best.2 + w2).min(1.0);
    }
    best
}

/// Sphere whose every evaluation sleeps for `delay`.
pub fn delayed_sphere(d: usize, delay: Duration) -> (SearchSpace, FitnessSpec) {
    let fitness = FitnessSpec::from_fn("delayed-sphere", Mode::Min, move |x| {
        std::thread::sleep(delay);
        x.iter().map(|v| v * v).sum()
    });
    (SearchSpace::uniform_float(d, -100.0, 100.0).unwrap(), fitness)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Pearson chi-square statistic and the upper critical value at `p_reject`
/// for `counts` against `probs`.
pub fn chi_square(counts: &[u64], probs: &[f64], p_reject: f64) -> (f64, f64) {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let total: u64 = counts.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = p * total as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    (stat, dist.inverse_cdf(1.0 - p_reject))
}

/// `name` with a small population, for fast property runs.
pub fn small_algorithm(name: &str) -> optkit::AlgorithmConfig {
    let overlay = match name {
        "gwo" => serde_json::json!({"nwolves": 6}),
        "de" => serde_json::json!({"npop": 6}),
        "pso" => serde_json::json!({"npar": 8}),
        "sa" => serde_json::json!({"chain_size": 4, "chains": 2}),
        "es" => serde_json::json!({"lambda_": 10, "mu": 5}),
        "bat" => serde_json::json!({"nbats": 8}),
        "mfo" => serde_json::json!({"nmoths": 8}),
        "woa" => serde_json::json!({"nwhales": 8}),
        "hho" => serde_json::json!({"nhawks": 8}),
        "pesa" | "pesa2" => serde_json::json!({"npop": 8}),
        other => panic!("unknown algorithm {other}"),
    };
    let mut doc = optkit::AlgorithmConfig::default_for(name).unwrap().to_json();
    for (k, v) in overlay.as_object().unwrap() {
        doc[k] = v.clone();
    }
    optkit::AlgorithmConfig::from_json(&doc).unwrap()
}

/// Mixed float/int/grid space used by the property suites.
pub fn mixed_space() -> SearchSpace {
    SearchSpace::from_toml_str(
        "a = [\"float\", -5.0, 3.0]\nb = [\"float\", 0.0, 10.0]\nn = [\"int\", -4, 7]\nkind = [\"grid\", [\"low\", \"mid\", \"high\"]]\n",
    )
    .unwrap()
}

/// A smooth objective on [`mixed_space`] that also records every decoded
/// point it sees, in call order.
pub fn recording_objective(
    mode: Mode,
) -> (FitnessSpec, std::sync::Arc<std::sync::Mutex<Vec<Vec<optkit::Value>>>>) {
    use optkit::Value;
    let seen = std::sync::Arc::new(std::sync::Mutex::new(Vec::new()));
    let log = seen.clone();
    let sign = if mode == Mode::Min { 1.0 } else { -1.0 };
    let f = move |x: &[Value]| -> Result<f64, optkit::FitnessError> {
        log.lock().unwrap().push(x.to_vec());
        let a = x[0].as_f64().unwrap();
        let b = x[1].as_f64().unwrap();
        let n = x[2].as_f64().unwrap();
        let k = match &x[3] {
            Value::Str(s) if s == "low" => 0.0f64,
            Value::Str(s) if s == "mid" => 1.0,
            _ => 2.0,
        };
        Ok(sign * ((a - 1.0).powi(2) + (b - 2.5).powi(2) + (n - 3.0).powi(2) + (k - 1.0).powi(2)))
    };
    (FitnessSpec::new("mixed-quadratic", mode, std::sync::Arc::new(f)), seen)
}
