//! Estimating a hidden coin bias, or a hidden mean shift, that is only
//! expressed at the renewal times of a discrete-time renewal process.
//!
//! * [`renewal`]: first-renewal laws, renewal probabilities, classification, sampling.
//! * [`families`]: built-in families (Bernoulli, random-walk returns, power-law tails).
//! * [`observation`]: the coin and L2 observation models.
//! * [`estimation`]: epsilon rules, confidence intervals, the correction constant `k`.
//! * [`experiments`]: the Monte Carlo harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimation;
pub mod experiments;
pub mod families;
pub mod observation;
pub mod renewal;

pub use error::{Error, Result};
pub use estimation::{
    coin_interval, confidence_interval, corrected_interval, correction_k, epsilon,
    harris_keane_diagnostic, normal_quantile, EpsilonRule, HarrisKeane, IntervalEstimate, Method,
};
pub use experiments::{
    run_condition_classifier, run_convergence_sweep, run_coverage_study, ConditionReport,
    ExperimentConfig, ExperimentResult, FamilySpec, ModelSpec, RuleSpec, Verdict,
};
pub use families::{family, family_catalog, growth_exponent_fit, Growth, GrowthFit, RenewalFamily};
pub use observation::{
    sample_coin_run, sample_l2_run, theoretical_mean, CoinModel, L2Known, L2Model, ModelTag,
    ObservationRun, Shape,
};
pub use renewal::{
    classify, f_from_u, sample_renewals, u_from_f, FirstRenewalDistribution, RecurrenceClass,
    RecurrenceKind, RenewalProbabilities, RenewalSampler,
};
