//! Per-participant Bayesian analysis of repeated-measures gait trials.
//!
//! Each participant and outcome gets its own linear model (independent
//! errors, a linear time trend, or AR(1) errors) fitted by a seeded
//! Metropolis-within-Gibbs sampler. Convergence diagnostics, posterior
//! predictive checks and a population-level repeated-measures ANOVA complete
//! the analysis. The crate is `no_std` and only needs `alloc`.

#![no_std]
// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod ar1;
pub mod data;
pub mod design;
pub mod diagnostics;
pub mod error;
mod math;
pub mod mcmc;
pub mod population;
pub mod special;
pub mod stats;
pub mod synth;

pub use ar1::{ar1_covariance, ar1_precision_apply, CovarianceForm};
pub use data::{
    describe, preprocess, Foot, Observation, Outcome, PreprocessConfig, Preprocessed, StrideRecord,
    TrialSeries, WalkingCondition,
};
pub use design::{
    build_design_matrix, default_priors, DesignMatrix, ModelSpec, ModelVariant, PriorRegime,
    PriorSet, PriorSpec,
};
pub use diagnostics::{
    condition_diff_matrix, ess, posterior_predictive, psrf, summarize, PosteriorSummary, PpcReport,
};
pub use error::{Error, Result};
pub use mcmc::{log_likelihood, run_sampler, PosteriorChains, SamplerConfig};
pub use population::{rm_anova_2x2, AnovaResult, CellMeans, Effect};
pub use synth::{generate_series, generate_study, StudySpec, SynthSpec};
