//! Population-based global optimization over mixed discrete, continuous and
//! categorical search spaces.
//!
//! The pieces, bottom up: [`space`] defines variables and the internal
//! vector encoding, [`problems`] the fitness contract and benchmark
//! problems (including the [`sofc`] fuel-cell model), [`engine`] batch
//! evaluation, run logs and checkpoints, [`algorithms`] the optimizers,
//! [`pesa`] the replay hybrids, [`surrogate`] network surrogates and
//! NHHO, and [`tune`] hyperparameter search.

pub mod algorithms;
pub mod engine;
pub mod error;
pub mod pesa;
pub mod problems;
pub mod sofc;
pub mod space;
pub mod surrogate;
pub mod tune;

pub use algorithms::{run_optimizer, AlgorithmConfig, Optimizer, OptimizerConfig, Run, RunResult};
pub use engine::{Checkpoint, RunLog};
pub use error::{DomainError, FitnessError, OptError, Result, SpaceError};
pub use problems::{FailurePolicy, Fitness, FitnessSpec, Mode, Problem};
pub use space::{Candidate, SearchSpace, Value, VarKind, VariableSpec};
