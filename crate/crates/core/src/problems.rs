//! Built-in fitness functions, constraint handling and the problem registry.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{DomainError, FitnessError};
use crate::sofc;
use crate::space::{values_to_f64, SearchSpace, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Min,
    Max,
}

impl Mode {
    /// Maps a user-facing fitness onto the canonical minimization axis.
    /// Applying it twice is the identity.
    pub fn canonical(self, y: f64) -> f64 {
        match self {
            Mode::Min => y,
            Mode::Max => -y,
        }
    }

    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Mode::Min => a < b,
            Mode::Max => a > b,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Min => "min",
            Mode::Max => "max",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "min" => Ok(Mode::Min),
            "max" => Ok(Mode::Max),
            other => Err(format!("unknown mode `{other}` (expected min or max)")),
        }
    }
}

/// A pure, reentrant map from decoded values to a scalar.
///
/// Implementations are called concurrently from evaluation workers and must
/// not mutate shared state.
pub trait Fitness: Send + Sync {
    fn evaluate(&self, x: &[Value]) -> Result<f64, FitnessError>;
}

impl<F> Fitness for F
where
    F: Fn(&[Value]) -> Result<f64, FitnessError> + Send + Sync,
{
    fn evaluate(&self, x: &[Value]) -> Result<f64, FitnessError> {
        self(x)
    }
}

/// What to do when an evaluation fails or returns a non-finite value.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailurePolicy {
    #[default]
    Abort,
    /// Record this fitness value (in user units) and keep going.
    Sentinel(f64),
}

#[derive(Clone)]
pub struct FitnessSpec {
    pub name: String,
    pub mode: Mode,
    pub on_failure: FailurePolicy,
    evaluator: Arc<dyn Fitness>,
}

impl fmt::Debug for FitnessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FitnessSpec")
            .field("name", &self.name)
            .field("mode", &self.mode)
            .field("on_failure", &self.on_failure)
            .finish_non_exhaustive()
    }
}

impl FitnessSpec {
    pub fn new(name: impl Into<String>, mode: Mode, evaluator: Arc<dyn Fitness>) -> Self {
        FitnessSpec {
            name: name.into(),
            mode,
            on_failure: FailurePolicy::Abort,
            evaluator,
        }
    }

    /// Wraps a numeric function of the decoded vector.
    pub fn from_fn<F>(name: impl Into<String>, mode: Mode, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let evaluator = move |x: &[Value]| Ok(f(&values_to_f64(x)));
        Self::new(name, mode, Arc::new(evaluator))
    }

    pub fn with_failure_policy(mut self, policy: FailurePolicy) -> Self {
        self.on_failure = policy;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn evaluate(&self, x: &[Value]) -> Result<f64, FitnessError> {
        self.evaluator.evaluate(x)
    }

    pub fn evaluator(&self) -> Arc<dyn Fitness> {
        Arc::clone(&self.evaluator)
    }
}

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Coello's self-adaptive penalty: adds `w1` times the summed violation and
/// `w2` times the number of violated constraints (`g_i > 0`).
pub fn self_adaptive_penalty(y: f64, g: &[f64], w1: f64, w2: f64) -> f64 {
    let magnitude: f64 = g.iter().map(|&gi| gi.max(0.0)).sum();
    let count = g.iter().filter(|&&gi| gi > 0.0).count() as f64;
    y + w1 * magnitude + w2 * count
}

pub const TRUSS_PENALTY_W1: f64 = 100.0;
pub const TRUSS_PENALTY_W2: f64 = 100.0;

/// Penalized fitness assigned by the registry to truss designs with a
/// non-positive cross-section.
pub const TRUSS_SENTINEL: f64 = 1.0e6;

/// Volume and the three stress constraints (`g <= 0` feasible) of the
/// three-bar truss with areas `x1 = A1 = A3` and `x2 = A2`.
pub fn three_bar_truss_terms(x: &[f64]) -> Result<(f64, [f64; 3]), DomainError> {
    let [x1, x2] = x else {
        return Err(DomainError::invalid("three-bar truss", format!("expects 2 areas, got {}", x.len())));
    };
    let (x1, x2) = (*x1, *x2);
    if !(x1 > 0.0 && x2 > 0.0) {
        return Err(DomainError::invalid(
            "three-bar truss",
            format!("cross-sectional areas must be positive, got ({x1}, {x2})"),
        ));
    }
    let s2 = std::f64::consts::SQRT_2;
    let volume = (2.0 * s2 * x1 + x2) * 100.0;
    let denom = s2 * x1 * x1 + 2.0 * x1 * x2;
    let g1 = (s2 * x1 + x2) / denom * 2.0 - 2.0;
    let g2 = x2 / denom * 2.0 - 2.0;
    let g3 = 1.0 / (x1 + s2 * x2) * 2.0 - 2.0;
    Ok((volume, [g1, g2, g3]))
}

pub fn three_bar_truss(x: &[f64]) -> Result<f64, DomainError> {
    let (volume, g) = three_bar_truss_terms(x)?;
    Ok(self_adaptive_penalty(volume, &g, TRUSS_PENALTY_W1, TRUSS_PENALTY_W2))
}

/// Weighted sum of objectives.
pub fn scalarize_linear(objectives: &[f64], weights: &[f64]) -> Result<f64, String> {
    if objectives.len() != weights.len() {
        return Err(format!(
            "{} objectives but {} weights",
            objectives.len(),
            weights.len()
        ));
    }
    Ok(objectives.iter().zip(weights).map(|(f, w)| f * w).sum())
}

/// A registry entry: fitness plus its default search space.
#[derive(Clone, Debug)]
pub struct Problem {
    pub fitness: FitnessSpec,
    pub space: SearchSpace,
}

pub const PROBLEM_NAMES: [&str; 3] = ["sphere", "tbtd", "sofc"];

/// Looks up a built-in problem by name.
pub fn builtin(name: &str) -> Option<Problem> {
    match name {
        "sphere" => Some(Problem {
            fitness: FitnessSpec::from_fn("sphere", Mode::Min, sphere),
            space: SearchSpace::uniform_float(5, -100.0, 100.0).expect("valid bounds"),
        }),
        "tbtd" => {
            let eval = |x: &[Value]| Ok(three_bar_truss(&values_to_f64(x))?);
            let fitness = FitnessSpec::new("tbtd", Mode::Min, Arc::new(eval))
                .with_failure_policy(FailurePolicy::Sentinel(TRUSS_SENTINEL));
            Some(Problem {
                fitness,
                space: SearchSpace::uniform_float(2, 0.0, 1.0).expect("valid bounds"),
            })
        }
        "sofc" => {
            let constants = sofc::SofcConstants::default();
            let eval = move |x: &[Value]| Ok(sofc::sofc_fitness_with(&constants, &values_to_f64(x)));
            Some(Problem {
                fitness: FitnessSpec::new("sofc", Mode::Max, Arc::new(eval)),
                space: sofc::default_space(),
            })
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sphere_values() {
        assert_eq!(sphere(&[0.0; 5]), 0.0);
        assert_eq!(sphere(&[1.0, 2.0]), 5.0);
    }

    #[test]
    fn penalty_arithmetic() {
        assert_eq!(self_adaptive_penalty(7.0, &[-1.0, -2.0], 100.0, 100.0), 7.0);
        assert_eq!(self_adaptive_penalty(0.0, &[0.5, -1.0], 100.0, 100.0), 150.0);
        assert_eq!(self_adaptive_penalty(10.0, &[1.0, 1.0, 1.0], 100.0, 100.0), 610.0);
        // g = 0 is on the boundary and not a violation.
        assert_eq!(self_adaptive_penalty(3.0, &[0.0], 100.0, 100.0), 3.0);
    }

    #[test]
    fn truss_at_unit_areas() {
        let f = three_bar_truss(&[1.0, 1.0]).unwrap();
        let (_, g) = three_bar_truss_terms(&[1.0, 1.0]).unwrap();
        assert!(g.iter().all(|&gi| gi < 0.0));
        assert!((f - 382.842_712_474_619).abs() < 1e-9, "{f}");
    }

    #[test]
    fn truss_rejects_non_positive_areas() {
        assert!(three_bar_truss(&[0.0, 0.5]).is_err());
        assert!(three_bar_truss(&[0.5, -1.0]).is_err());
        assert!(three_bar_truss(&[0.5]).is_err());
    }

    #[test]
    fn truss_feasible_points_return_raw_volume() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut feasible = 0;
        for _ in 0..5000 {
            let x = [rng.random_range(1e-3..1.0), rng.random_range(1e-3..1.0)];
            // Independent feasibility predicate on the stress ratios.
            let s2 = 2f64.sqrt();
            let d = s2 * x[0] * x[0] + 2.0 * x[0] * x[1];
            let ok = (s2 * x[0] + x[1]) / d <= 1.0 && x[1] / d <= 1.0 && 1.0 / (x[0] + s2 * x[1]) <= 1.0;
            if ok {
                feasible += 1;
                let v = (2.0 * s2 * x[0] + x[1]) * 100.0;
                assert_eq!(three_bar_truss(&x).unwrap(), v);
            }
        }
        assert!(feasible > 100);
    }

    #[test]
    fn linear_scalarization() {
        assert_eq!(scalarize_linear(&[3.0, 9.0], &[1.0, 0.0]).unwrap(), 3.0);
        assert_eq!(scalarize_linear(&[3.0, 9.0], &[0.0, 0.0]).unwrap(), 0.0);
        let (p, eta) = (8236.16, 0.4664);
        let f = scalarize_linear(&[p, 100.0 * eta], &[0.5, 0.5]).unwrap();
        assert!((f - 4141.40).abs() < 1e-9);
        assert!(scalarize_linear(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn registry_knows_every_name() {
        for name in PROBLEM_NAMES {
            let p = builtin(name).unwrap();
            assert_eq!(p.fitness.name, name);
        }
        assert!(builtin("rosenbrock").is_none());
        assert_eq!(builtin("sofc").unwrap().space.dim(), 20);
        assert_eq!(builtin("sofc").unwrap().fitness.mode, Mode::Max);
    }

    #[test]
    fn mode_canonical_is_an_involution() {
        for y in [-3.5, 0.0, 2.25] {
            assert_eq!(Mode::Max.canonical(Mode::Max.canonical(y)), y);
            assert_eq!(Mode::Min.canonical(y), y);
        }
    }

    proptest::proptest! {
        #[test]
        fn sphere_non_negative(x in proptest::collection::vec(-1e3f64..1e3, 0..8)) {
            let v = sphere(&x);
            proptest::prop_assert!(v >= 0.0);
            proptest::prop_assert_eq!(v == 0.0, x.iter().all(|&xi| xi == 0.0));
        }

        #[test]
        fn penalty_dominates_objective(
            y in -1e3f64..1e3,
            g in proptest::collection::vec(-10f64..10.0, 1..5),
            bump in 0f64..5.0,
            idx in 0usize..5,
        ) {
            let p = self_adaptive_penalty(y, &g, 100.0, 100.0);
            proptest::prop_assert!(p >= y);
            proptest::prop_assert_eq!(p == y, g.iter().all(|&gi| gi <= 0.0));
            let mut h = g.clone();
            let i = idx % h.len();
            h[i] += bump;
            proptest::prop_assert!(self_adaptive_penalty(y, &h, 100.0, 100.0) >= p);
        }
    }
}
