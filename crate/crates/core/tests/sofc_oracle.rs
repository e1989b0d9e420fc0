mod common;

use common::{latin_hypercube, rel_err, sofc_bounds, sofc_chain};
use optkit::sofc::{self, SofcConstants, SofcParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn chain_matches_oracle_on_hypercube() {
    let c = SofcConstants::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2021);
    let pts = latin_hypercube(1000, &sofc_bounds(), &mut rng);
    for x in pts {
        let o = sofc_chain(&x);
        let p = SofcParams::from_slice(&x).unwrap();
        let perf = sofc::power_and_efficiency(&p, &c).unwrap();
        let v = perf.voltages;
        let (j0_a, j0_c) = sofc::exchange_current_densities(&c, &p).unwrap();
        let pairs = [
            ("E", v.e, o.e),
            ("j0_a", j0_a, o.j0_a),
            ("j0_c", j0_c, o.j0_c),
            ("act_a", v.v_act_a, o.act_a),
            ("act_c", v.v_act_c, o.act_c),
            ("ohm", v.v_ohm, o.ohm),
            ("conc_a", v.v_conc_a, o.conc_a),
            ("conc_c", v.v_conc_c, o.conc_c),
            ("V", v.v_cell, o.v_cell),
            ("P", perf.power, o.power),
            ("P/A", perf.power_density, o.power_density),
            ("eta", perf.efficiency, o.eta),
            ("fitness", sofc::sofc_fitness(&x), o.fitness),
        ];
        for (name, got, want) in pairs {
            assert!(rel_err(got, want) <= 1e-9, "{name}: {got} vs {want} at {x:?}");
        }
    }
}

#[test]
fn midpoint_matches_oracle() {
    let x = SofcParams::midpoint().to_vec();
    let o = sofc_chain(&x);
    assert!(rel_err(sofc::sofc_fitness(&x), o.fitness) <= 1e-9);
    assert!(o.v_cell > 0.0 && o.v_cell < o.e);
}

#[test]
fn log_form_matches_asinh() {
    let c = SofcConstants::default();
    let rt_f = c.gas_constant * c.temperature / c.faraday;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let j = 10f64.powf(rng.random_range(-2.0..6.0));
        let j0 = 10f64.powf(rng.random_range(-1.0..5.0));
        let got = sofc::activation_overpotential(j, j0, &c).unwrap();
        let want = rt_f * (j / (2.0 * j0)).asinh();
        assert!(rel_err(got, want) <= 1e-12, "{got} vs {want}");
    }
}

#[test]
fn efficiency_inside_unit_interval_over_box() {
    let c = SofcConstants::default();
    let bounds = sofc_bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100_000 {
        let x: Vec<f64> = bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect();
        let p = SofcParams::from_slice(&x).unwrap();
        let eta = sofc::power_and_efficiency(&p, &c).unwrap().efficiency;
        assert!(eta > 0.0 && eta < 1.0, "eta {eta} at {x:?}");
    }
}

#[test]
fn cell_voltage_decreases_with_current() {
    let c = SofcConstants::default();
    let bounds = sofc_bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let x: Vec<f64> = bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect();
        let mut p = SofcParams::from_slice(&x).unwrap();
        let v0 = sofc::voltage_breakdown(&p, &c).unwrap();
        p.j += 1.0;
        let v1 = sofc::voltage_breakdown(&p, &c).unwrap();
        assert!(v1.v_cell < v0.v_cell);
        assert_eq!(v1.e, v0.e);
        for o in [v1.v_act_a, v1.v_act_c, v1.v_ohm, v1.v_conc_a, v1.v_conc_c] {
            assert!(o >= 0.0);
        }
    }
}
