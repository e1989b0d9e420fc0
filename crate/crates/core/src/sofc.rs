//! Steady-state solid-oxide fuel cell model: Nernst voltage, activation,
//! ohmic and concentration overpotentials, power and efficiency, and the
//! 20-variable design benchmark built on them.
//!
//! Pressures are in atm except inside the cathode diffusion exponent, which
//! needs Pa. The fixed constants live in `data/sofc_constants.toml`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::DomainError;
use crate::space::{SearchSpace, VariableSpec};

const ATM_PA: f64 = 101_325.0;
const ATM_BAR: f64 = 1.01325;

/// Constants file shipped with the crate.
pub const CONSTANTS_TOML: &str = include_str!("../data/sofc_constants.toml");

/// Fitness returned for designs where the voltage chain is undefined.
pub const SOFC_SENTINEL: f64 = -1.0e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SofcConstants {
    pub version: String,
    pub temperature: f64,
    pub faraday: f64,
    pub gas_constant: f64,
    pub electrons: f64,
    pub enthalpy: f64,
    pub pressure: f64,
    pub p_h2: f64,
    pub p_n2: f64,
    pub e_act_anode: f64,
    pub e_act_cathode: f64,
    pub j_limit_h2o: f64,
    pub j_limit_h2: f64,
    pub electrolyte_conductivity_pre: f64,
    pub electrolyte_activation_temp: f64,
    pub molar_mass_o2: f64,
    pub molar_mass_n2: f64,
    pub lj_energy_o2: f64,
    pub lj_energy_n2: f64,
}

impl Default for SofcConstants {
    fn default() -> Self {
        Self::from_toml(CONSTANTS_TOML).expect("shipped constants file is valid")
    }
}

impl SofcConstants {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let c: SofcConstants = toml::from_str(text).map_err(|e| e.to_string())?;
        let positive = [
            ("temperature", c.temperature),
            ("faraday", c.faraday),
            ("gas_constant", c.gas_constant),
            ("electrons", c.electrons),
            ("pressure", c.pressure),
            ("p_h2", c.p_h2),
            ("p_n2", c.p_n2),
            ("e_act_anode", c.e_act_anode),
            ("e_act_cathode", c.e_act_cathode),
            ("j_limit_h2o", c.j_limit_h2o),
            ("j_limit_h2", c.j_limit_h2),
            ("electrolyte_conductivity_pre", c.electrolyte_conductivity_pre),
            ("electrolyte_activation_temp", c.electrolyte_activation_temp),
            ("molar_mass_o2", c.molar_mass_o2),
            ("molar_mass_n2", c.molar_mass_n2),
            ("lj_energy_o2", c.lj_energy_o2),
            ("lj_energy_n2", c.lj_energy_n2),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
            return Err(format!("constant `{name}` must be positive, got {v}"));
        }
        if !(c.enthalpy < 0.0) {
            return Err(format!("reaction enthalpy must be negative, got {}", c.enthalpy));
        }
        Ok(c)
    }

    /// `RT / F`, in volts.
    fn thermal_voltage(&self) -> f64 {
        self.gas_constant * self.temperature / self.faraday
    }

    /// Gibbs free energy change of the cell reaction, J/mol.
    pub fn gibbs(&self) -> f64 {
        gibbs_free_energy(self.temperature)
    }

    /// Ionic conductivity of the electrolyte, S/m.
    pub fn electrolyte_conductivity(&self) -> f64 {
        self.electrolyte_conductivity_pre * (-self.electrolyte_activation_temp / self.temperature).exp()
    }
}

/// `-282150 + 86.735 T`, J/mol.
pub fn gibbs_free_energy(temperature: f64) -> f64 {
    -282_150.0 + 86.735 * temperature
}

/// The 20 design variables, in benchmark order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SofcParams {
    /// Current density, A/m^2.
    pub j: f64,
    /// Effective surface area, m^2.
    pub area: f64,
    pub p_o2: f64,
    pub p_h2o: f64,
    pub porosity: f64,
    pub tortuosity: f64,
    /// Average pore diameter, m.
    pub pore_diameter: f64,
    /// Average grain size, m.
    pub grain_size: f64,
    /// Grain contact neck length over grain size.
    pub neck_ratio: f64,
    pub l_anode: f64,
    pub l_cathode: f64,
    pub l_electrolyte: f64,
    pub sigma_anode: f64,
    pub sigma_cathode: f64,
    /// Collision diameters, Angstrom.
    pub collision_h2: f64,
    pub collision_h2o: f64,
    pub collision_o2: f64,
    pub collision_n2: f64,
    /// Exchange current density coefficients, A m.
    pub gamma_anode: f64,
    pub gamma_cathode: f64,
}

/// Names and bounds of the design variables.
pub const PARAM_BOUNDS: [(&str, f64, f64); 20] = [
    ("j", 12672.0, 13728.0),
    ("A", 1.55e-3, 1.65e-3),
    ("p_O2", 0.168, 0.252),
    ("p_H2O", 0.04, 0.06),
    ("porosity", 0.3936, 0.5664),
    ("tortuosity", 4.32, 6.48),
    ("D_p", 2.8e-6, 3.2e-6),
    ("D_s", 1.4e-6, 1.6e-6),
    ("X", 0.6, 0.8),
    ("L_a", 4.7e-4, 5.3e-4),
    ("L_c", 4.7e-5, 5.3e-5),
    ("L_e", 4.7e-5, 5.3e-5),
    ("sigma_a", 48000.0, 112000.0),
    ("sigma_c", 5040.0, 11760.0),
    ("sigma_H2", 2.159, 3.495),
    ("sigma_H2O", 2.009, 3.273),
    ("sigma_O2", 2.635, 4.299),
    ("sigma_N2", 2.886, 4.710),
    ("gamma_a", 1.39e-9, 1.69e-9),
    ("gamma_c", 5.27e-10, 6.44e-10),
];

/// The benchmark's default search space.
pub fn default_space() -> SearchSpace {
    let vars = PARAM_BOUNDS
        .iter()
        .map(|&(name, lo, hi)| VariableSpec::float(name, lo, hi).expect("valid bounds"))
        .collect();
    SearchSpace::new(vars).expect("unique names")
}

impl SofcParams {
    pub fn from_slice(x: &[f64]) -> Result<Self, DomainError> {
        let &[j, area, p_o2, p_h2o, porosity, tortuosity, pore_diameter, grain_size, neck_ratio, l_anode, l_cathode, l_electrolyte, sigma_anode, sigma_cathode, collision_h2, collision_h2o, collision_o2, collision_n2, gamma_anode, gamma_cathode] =
            x
        else {
            return Err(DomainError::invalid("parameters", format!("expected 20 values, got {}", x.len())));
        };
        Ok(SofcParams {
            j,
            area,
            p_o2,
            p_h2o,
            porosity,
            tortuosity,
            pore_diameter,
            grain_size,
            neck_ratio,
            l_anode,
            l_cathode,
            l_electrolyte,
            sigma_anode,
            sigma_cathode,
            collision_h2,
            collision_h2o,
            collision_o2,
            collision_n2,
            gamma_anode,
            gamma_cathode,
        })
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.j,
            self.area,
            self.p_o2,
            self.p_h2o,
            self.porosity,
            self.tortuosity,
            self.pore_diameter,
            self.grain_size,
            self.neck_ratio,
            self.l_anode,
            self.l_cathode,
            self.l_electrolyte,
            self.sigma_anode,
            self.sigma_cathode,
            self.collision_h2,
            self.collision_h2o,
            self.collision_o2,
            self.collision_n2,
            self.gamma_anode,
            self.gamma_cathode,
        ]
    }

    /// Centre of every interval.
    pub fn midpoint() -> Self {
        let x: Vec<f64> = PARAM_BOUNDS.iter().map(|&(_, lo, hi)| 0.5 * (lo + hi)).collect();
        Self::from_slice(&x).expect("20 values")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VoltageBreakdown {
    pub e: f64,
    pub v_act_a: f64,
    pub v_act_c: f64,
    pub v_ohm: f64,
    pub v_conc_a: f64,
    pub v_conc_c: f64,
    pub v_cell: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Performance {
    /// `j A V_cell`, W.
    pub power: f64,
    /// `j V_cell`, W/m^2.
    pub power_density: f64,
    /// Fraction of the fuel enthalpy delivered as electricity.
    pub efficiency: f64,
    pub voltages: VoltageBreakdown,
}

/// Maximum (Nernst) voltage.
pub fn nernst_voltage(c: &SofcConstants, p: &SofcParams) -> Result<f64, DomainError> {
    for (name, v) in [("p_H2", c.p_h2), ("p_O2", p.p_o2), ("p_H2O", p.p_h2o)] {
        if !(v > 0.0) {
            return Err(DomainError::invalid("nernst voltage", format!("{name} must be positive, got {v}")));
        }
    }
    let nf = c.electrons * c.faraday;
    let ratio = c.p_h2 * p.p_o2.sqrt() / p.p_h2o;
    Ok(-c.gibbs() / nf + c.gas_constant * c.temperature / nf * ratio.ln())
}

/// Electrode microstructure factor shared by both exchange current densities, m^-3.
fn microstructure_factor(p: &SofcParams) -> Result<f64, DomainError> {
    let (x, dp, ds, eps) = (p.neck_ratio, p.pore_diameter, p.grain_size, p.porosity);
    if !(x > 0.0 && x < 1.0) {
        return Err(DomainError::invalid("exchange current", format!("neck ratio X must lie in (0, 1), got {x}")));
    }
    if !(dp > 0.0 && ds > 0.0) {
        return Err(DomainError::invalid("exchange current", "pore and grain sizes must be positive"));
    }
    let neck = 1.0 - (1.0 - x * x).sqrt();
    let num = 72.0 * x * (dp - (dp + ds) * eps) * eps;
    let factor = num / (ds * ds * dp * dp * neck);
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(DomainError::invalid(
            "exchange current",
            format!("non-physical microstructure factor {factor}"),
        ));
    }
    Ok(factor)
}

/// Anode and cathode exchange current densities, A/m^2.
pub fn exchange_current_densities(c: &SofcConstants, p: &SofcParams) -> Result<(f64, f64), DomainError> {
    let m = microstructure_factor(p)?;
    let rt = c.gas_constant * c.temperature;
    let j0_a = p.gamma_anode * m * (c.p_h2 / c.pressure) * (p.p_h2o / c.pressure) * (-c.e_act_anode / rt).exp();
    let j0_c = p.gamma_cathode * m * (p.p_o2 / c.pressure).powf(0.25) * (-c.e_act_cathode / rt).exp();
    Ok((j0_a, j0_c))
}

/// Activation overpotential of one electrode, `(RT/F) asinh(j / 2 j0)` in
/// its logarithmic form.
pub fn activation_overpotential(j: f64, j0: f64, c: &SofcConstants) -> Result<f64, DomainError> {
    if !(j0 > 0.0) {
        return Err(DomainError::invalid("activation overpotential", format!("j0 must be positive, got {j0}")));
    }
    if !(j >= 0.0) {
        return Err(DomainError::invalid("activation overpotential", format!("j must be non-negative, got {j}")));
    }
    let u = j / (2.0 * j0);
    // ln(u + sqrt(u^2 + 1)) with the leading 1 split off for small u.
    let w = (u * u + 1.0).sqrt();
    Ok(c.thermal_voltage() * (u + u * u / (1.0 + w)).ln_1p())
}

pub fn ohmic_overpotential(j: f64, p: &SofcParams, c: &SofcConstants) -> Result<f64, DomainError> {
    let sigma_e = c.electrolyte_conductivity();
    for (name, s) in [("sigma_a", p.sigma_anode), ("sigma_c", p.sigma_cathode), ("sigma_e", sigma_e)] {
        if !(s > 0.0) {
            return Err(DomainError::invalid("ohmic overpotential", format!("{name} must be positive, got {s}")));
        }
    }
    Ok(j * (p.l_anode / p.sigma_anode + p.l_cathode / p.sigma_cathode + p.l_electrolyte / sigma_e))
}

/// Effective O2 transport in the cathode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CathodeDiffusion {
    /// Knudsen diffusivity of O2 in the pores, m^2/s.
    pub knudsen: f64,
    /// Binary O2-N2 diffusivity, m^2/s.
    pub binary: f64,
    /// Effective O2 diffusivity (porosity/tortuosity scaled, Bosanquet), m^2/s.
    pub effective: f64,
    /// `D_Kn / (D_Kn + D_O2-N2)` of the effective coefficients.
    pub ratio: f64,
}

/// Neufeld's fit of the Lennard-Jones diffusion collision integral.
pub fn collision_integral(reduced_temperature: f64) -> f64 {
    let t = reduced_temperature;
    1.06036 / t.powf(0.15610)
        + 0.19300 * (-0.47635 * t).exp()
        + 1.03587 * (-1.52996 * t).exp()
        + 1.76474 * (-3.89411 * t).exp()
}

pub fn cathode_diffusion(p: &SofcParams, c: &SofcConstants) -> Result<CathodeDiffusion, DomainError> {
    if !(p.porosity > 0.0 && p.porosity < 1.0 && p.tortuosity > 0.0) {
        return Err(DomainError::invalid("cathode diffusion", "porosity must lie in (0, 1) and tortuosity be positive"));
    }
    if !(p.collision_o2 > 0.0 && p.collision_n2 > 0.0 && p.pore_diameter > 0.0) {
        return Err(DomainError::invalid("cathode diffusion", "collision and pore diameters must be positive"));
    }
    let t = c.temperature;
    let pore_radius = 0.5 * p.pore_diameter;
    let m_o2 = c.molar_mass_o2 * 1e-3;
    let knudsen = 2.0 / 3.0 * pore_radius * (8.0 * c.gas_constant * t / (PI * m_o2)).sqrt();

    // Chapman-Enskog, D in cm^2/s with p in bar and sigma in Angstrom.
    let sigma_ab = 0.5 * (p.collision_o2 + p.collision_n2);
    let reduced_t = t / (c.lj_energy_o2 * c.lj_energy_n2).sqrt();
    let m_ab = 2.0 / (1.0 / c.molar_mass_o2 + 1.0 / c.molar_mass_n2);
    let p_bar = (p.p_o2 + c.p_n2) * ATM_BAR;
    let binary_cm2 =
        0.00266 * t.powf(1.5) / (p_bar * m_ab.sqrt() * sigma_ab * sigma_ab * collision_integral(reduced_t));
    let binary = binary_cm2 * 1e-4;

    let scale = p.porosity / p.tortuosity;
    let effective = scale / (1.0 / knudsen + 1.0 / binary);
    let ratio = (scale * knudsen) / (scale * knudsen + scale * binary);
    Ok(CathodeDiffusion {
        knudsen,
        binary,
        effective,
        ratio,
    })
}

/// Anode and cathode concentration overpotentials.
pub fn concentration_overpotential(j: f64, p: &SofcParams, c: &SofcConstants) -> Result<(f64, f64), DomainError> {
    if !(j >= 0.0) {
        return Err(DomainError::invalid("concentration overpotential", format!("j must be non-negative, got {j}")));
    }
    if j >= c.j_limit_h2 {
        return Err(DomainError::LimitingCurrent {
            j,
            limit: c.j_limit_h2,
        });
    }
    let rt = c.gas_constant * c.temperature;
    let v_a = rt / (c.electrons * c.faraday) * ((1.0 + j / c.j_limit_h2o).ln() - (1.0 - j / c.j_limit_h2).ln());

    let diff = cathode_diffusion(p, c)?;
    let d = diff.ratio;
    if !(d > 0.0 && d < 1.0) {
        return Err(DomainError::invalid("cathode concentration", format!("diffusion ratio {d} outside (0, 1)")));
    }
    let p_c = p.p_o2 + c.p_n2;
    let exponent = rt * p.l_cathode * j * d / (4.0 * c.faraday * diff.effective * p_c * ATM_PA);
    let denom = p_c / d - (p_c / d - p.p_o2) * exponent.exp();
    if !(denom > 0.0) {
        return Err(DomainError::invalid(
            "cathode concentration",
            format!("oxygen depleted at the reaction site (denominator {denom})"),
        ));
    }
    let v_c = rt / (4.0 * c.faraday) * (p.p_o2 / denom).ln();
    Ok((v_a, v_c))
}

pub fn voltage_breakdown(p: &SofcParams, c: &SofcConstants) -> Result<VoltageBreakdown, DomainError> {
    let e = nernst_voltage(c, p)?;
    let (j0_a, j0_c) = exchange_current_densities(c, p)?;
    let v_act_a = activation_overpotential(p.j, j0_a, c)?;
    let v_act_c = activation_overpotential(p.j, j0_c, c)?;
    let v_ohm = ohmic_overpotential(p.j, p, c)?;
    let (v_conc_a, v_conc_c) = concentration_overpotential(p.j, p, c)?;
    let v_cell = e - (v_act_a + v_act_c) - v_ohm - (v_conc_a + v_conc_c);
    Ok(VoltageBreakdown {
        e,
        v_act_a,
        v_act_c,
        v_ohm,
        v_conc_a,
        v_conc_c,
        v_cell,
    })
}

/// Power output and efficiency of a design.
pub fn power_and_efficiency(p: &SofcParams, c: &SofcConstants) -> Result<Performance, DomainError> {
    let voltages = voltage_breakdown(p, c)?;
    Ok(performance_from_voltage(p, c, voltages))
}

fn performance_from_voltage(p: &SofcParams, c: &SofcConstants, voltages: VoltageBreakdown) -> Performance {
    let v = voltages.v_cell;
    Performance {
        power: p.j * p.area * v,
        power_density: p.j * v,
        efficiency: -c.electrons * c.faraday * v / c.enthalpy,
        voltages,
    }
}

/// `0.5 P + 0.5 * 100 eta` with `P` the areal power density (W/m^2).
pub fn objective(perf: &Performance) -> f64 {
    0.5 * perf.power_density + 0.5 * perf.efficiency * 100.0
}

/// Benchmark fitness (maximize) with the shipped constants.
pub fn sofc_fitness(x: &[f64]) -> f64 {
    sofc_fitness_with(&SofcConstants::default(), x)
}

/// Benchmark fitness; non-physical designs score [`SOFC_SENTINEL`].
pub fn sofc_fitness_with(c: &SofcConstants, x: &[f64]) -> f64 {
    SofcParams::from_slice(x)
        .and_then(|p| power_and_efficiency(&p, c))
        .map(|perf| objective(&perf))
        .ok()
        .filter(|f| f.is_finite())
        .unwrap_or(SOFC_SENTINEL)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn constants_file_loads() {
        let c = SofcConstants::default();
        assert_eq!(c.temperature, 1073.0);
        assert_eq!(c.j_limit_h2o, 2.27e7);
        assert_eq!(c.j_limit_h2, 4e5);
        assert!(SofcConstants::from_toml(&CONSTANTS_TOML.replace("p_h2 = 0.95", "p_h2 = -1.0")).is_err());
    }

    #[test]
    fn gibbs_at_operating_temperature() {
        assert!((gibbs_free_energy(1073.0) - (-189_083.345)).abs() < 1e-6);
        let c = SofcConstants::default();
        assert_eq!(c.gibbs(), gibbs_free_energy(1073.0));
    }

    #[test]
    fn nernst_unit_ratio_is_standard_potential() {
        let c = SofcConstants::default();
        let mut p = SofcParams::midpoint();
        // p_H2 * sqrt(p_O2) / p_H2O = 1
        p.p_o2 = 0.04;
        p.p_h2o = c.p_h2 * 0.2;
        let e = nernst_voltage(&c, &p).unwrap();
        let e0 = -c.gibbs() / (c.electrons * c.faraday);
        assert!(rel(e, e0) < 1e-12);
        p.p_h2o = 0.0;
        assert!(nernst_voltage(&c, &p).is_err());
    }

    #[test]
    fn exchange_current_limits() {
        let c = SofcConstants::default();
        let mut p = SofcParams::midpoint();
        p.gamma_anode = 0.0;
        assert_eq!(exchange_current_densities(&c, &p).unwrap().0, 0.0);
        let mut hot = c.clone();
        hot.e_act_anode = 1e9;
        hot.e_act_cathode = 1e9;
        let (a, b) = exchange_current_densities(&hot, &SofcParams::midpoint()).unwrap();
        assert_eq!((a, b), (0.0, 0.0));
        let mut bad = SofcParams::midpoint();
        bad.neck_ratio = 1.0;
        assert!(exchange_current_densities(&c, &bad).is_err());
        let mut dense = SofcParams::midpoint();
        dense.porosity = 0.9;
        assert!(exchange_current_densities(&c, &dense).is_err());
    }

    #[test]
    fn activation_closed_forms() {
        let c = SofcConstants::default();
        assert_eq!(activation_overpotential(0.0, 1000.0, &c).unwrap(), 0.0);
        let v = activation_overpotential(2000.0, 1000.0, &c).unwrap();
        let expected = c.thermal_voltage() * (1.0 + 2f64.sqrt()).ln();
        assert!(rel(v, expected) < 1e-14);
        assert!(activation_overpotential(1.0, 0.0, &c).is_err());
    }

    #[test]
    fn ohmic_is_linear_in_current() {
        let c = SofcConstants::default();
        let p = SofcParams::midpoint();
        assert_eq!(ohmic_overpotential(0.0, &p, &c).unwrap(), 0.0);
        let v1 = ohmic_overpotential(5000.0, &p, &c).unwrap();
        let v2 = ohmic_overpotential(10000.0, &p, &c).unwrap();
        assert!(rel(v2, 2.0 * v1) < 1e-14);
        let sigma = c.electrolyte_conductivity();
        assert_eq!(sigma, 3.34e4 * (-10300.0f64 / 1073.0).exp());
    }

    #[test]
    fn concentration_edges() {
        let c = SofcConstants::default();
        let p = SofcParams::midpoint();
        let (a, b) = concentration_overpotential(0.0, &p, &c).unwrap();
        assert_eq!(a, 0.0);
        // p_c/D - (p_c/D - p_O2) only cancels to p_O2 up to rounding
        assert!(b.abs() < 1e-15);
        let mut last = 0.0;
        for j in [1e3, 5e3, 1e4, 2e4] {
            let (a, _) = concentration_overpotential(j, &p, &c).unwrap();
            assert!(a > last);
            last = a;
        }
        assert!(matches!(
            concentration_overpotential(4e5, &p, &c),
            Err(DomainError::LimitingCurrent { .. })
        ));
    }

    #[test]
    fn power_scales_with_area_efficiency_does_not() {
        let c = SofcConstants::default();
        let p = SofcParams::midpoint();
        let mut q = p;
        q.area *= 2.0;
        let a = power_and_efficiency(&p, &c).unwrap();
        let b = power_and_efficiency(&q, &c).unwrap();
        assert!(rel(b.power, 2.0 * a.power) < 1e-14);
        assert_eq!(a.efficiency, b.efficiency);
        let zero = VoltageBreakdown {
            v_cell: 0.0,
            ..a.voltages
        };
        let z = performance_from_voltage(&p, &c, zero);
        assert_eq!((z.power, z.efficiency, objective(&z)), (0.0, 0.0, 0.0));
    }

    // Values from a separate Python evaluation of the same equation chain with
    // the shipped constants at the midpoint of every interval.
    #[test]
    fn midpoint_matches_python_chain() {
        let c = SofcConstants::default();
        let p = SofcParams::midpoint();
        let v = voltage_breakdown(&p, &c).unwrap();
        let (j0_a, j0_c) = exchange_current_densities(&c, &p).unwrap();
        let d = cathode_diffusion(&p, &c).unwrap();
        for (got, want) in [
            (v.e, 1.0799067418612034),
            (v.v_act_a, 0.12911327831095304),
            (v.v_act_c, 0.1763697953837426),
            (v.v_ohm, 0.29170278138870137),
            (v.v_conc_a, 0.0015782729682641237),
            (v.v_conc_c, 0.0010767148695249263),
            (v.v_cell, 0.48006589894001733),
            (j0_a, 3480.1113914342022),
            (j0_c, 2003.8301565901486),
            (d.ratio, 0.8252747272543314),
            (d.effective, 1.3086250401313563e-05),
        ] {
            assert!(rel(got, want) < 1e-9, "{got} vs {want}");
        }
        let perf = power_and_efficiency(&p, &c).unwrap();
        assert!(rel(perf.power_density, 6336.869866008229) < 1e-9);
        assert!(rel(perf.efficiency, 0.3731967747549767) < 1e-9);
    }

    #[test]
    fn fitness_sentinel_for_bad_input() {
        assert_eq!(sofc_fitness(&[1.0; 3]), SOFC_SENTINEL);
        let mut x = SofcParams::midpoint().to_vec();
        x[8] = 1.5;
        assert_eq!(sofc_fitness(&x), SOFC_SENTINEL);
        let mid = sofc_fitness(&SofcParams::midpoint().to_vec());
        assert!(rel(mid, 0.5 * 6336.869866008229 + 50.0 * 0.3731967747549767) < 1e-9);
    }

    #[test]
    fn default_space_matches_bounds() {
        let s = default_space();
        assert_eq!(s.dim(), 20);
        assert_eq!(s.lower()[0], 12672.0);
        assert_eq!(s.upper()[19], 6.44e-10);
    }
}
