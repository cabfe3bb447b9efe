//! Fully Bayesian expected-improvement optimization.
//!
//! The posterior over the Gaussian-process range parameters is carried by a
//! weighted particle system updated by sequential Monte Carlo, and candidate
//! evaluation points are drawn from an adaptive tree-histogram density
//! fitted to the candidates of the previous step. The constant mean and the
//! process variance are integrated out analytically, giving a Student-t
//! predictive and a closed-form expected improvement.
//!
//! Modules, bottom-up:
//!
//! * [`gp`]: Matérn-5/2 model, integrated likelihood, Student-t predictive.
//! * [`criteria`]: expected improvement, exceedance probability, particle averages.
//! * [`smc`]: particle initialization, reweighting, resampling, MH move.
//! * [`candidates`]: per-particle candidate populations and the tree histogram.
//! * [`optimizer`]: the SMC-based loop and the fixed-θ reference, both ask/tell.
//! * [`testbed`]: Branin, log-Hartmann-6, maximin LHS.

pub mod candidates;
pub mod criteria;
pub mod error;
pub mod exec;
pub mod gp;
pub mod histogram;
mod linalg;
pub mod optimizer;
pub mod rng;
pub mod smc;
pub mod special;
pub mod testbed;

pub use criteria::{averaged_ei, exceedance_probability, expected_improvement, CriterionValue, ParticleModels};
pub use error::{Error, Result};
pub use exec::Execution;
pub use gp::{
    correlation_matrix, integrated_log_likelihood, matern52_correlation, predictive, scaled_distance, ConditionedGp,
    CorrelationFactor, Domain, EvaluationHistory, HyperParameters, PredictiveDistribution,
};
pub use optimizer::{
    ml_estimate, run_reference_ei, run_smc_ei, smc_ei_step, AskTell, MlConfig, OptimizerConfig, ReferenceEi,
    ReferenceModel, ResamplePolicy, RunTrace, SmcEi, TraceRecord, VarianceMode,
};
pub use rng::{split_stream, RandomStream};
pub use smc::{
    effective_sample_size, init_particles, move_particles, multinomial_resample, reweight, MoveConfig, ParticleSet,
    PriorSpec,
};
pub use testbed::{by_name, maximin_lhs, registry, TestFunction};
