//! Policy learning under noisily measured latent heterogeneity.
//!
//! This crate implements empirical welfare maximization over threshold rule
//! classes, regret-bound calculators for rules that ignore or incorporate a
//! noisy proxy of a latent factor, the minimax budget split between proxy
//! precision and sample size, and the resampling procedures that evaluate
//! rules and data-collection designs on a given sample. Synthetic generators
//! reproduce the adversarial constructions behind the lower bounds, so every
//! bound is a Monte Carlo-checkable target.
//!
//! Modules map one-to-one onto the moving parts:
//!
//! * [`data`] — observations, datasets, threshold rules, assumption checks;
//! * [`dgp`] — synthetic generators, proxy construction, exact welfare;
//! * [`policy`] — IPW welfare estimation and exhaustive EWM search;
//! * [`bounds`] — the four regret bounds, the class comparison, and the
//!   minimax design optimizer;
//! * [`harness`] — welfare evaluation, design evaluation under a budget,
//!   and regret-rate experiments;
//! * [`io`] — the CSV dataset schema.
//!
//! With the `parallel` feature (on by default) the Monte Carlo loops run on
//! rayon; per-item seeding makes every result bit-identical to the
//! sequential fallback.

pub mod bounds;
pub mod data;
pub mod dgp;
pub mod error;
pub mod harness;
pub mod io;
pub mod math;
pub mod par;
pub mod policy;

pub use data::{
    rule_assign, validate_dataset, Dataset, Observation, PolicyClassSpec, PolicyKind,
    ThresholdRule, Violation, ViolationKind,
};
pub use dgp::{
    build_proxy, build_proxy_ragged, generate, oracle_welfare, true_welfare, DgpFamily, DgpSpec,
    ProxyPlan, Selection, TrueWelfare,
};
pub use error::{Error, Result};
pub use harness::{
    feasible_n, regret_rate_experiment, run_algorithm1, run_algorithm2, ClassSpecSource,
    DesignEvalConfig, DesignFrontier, RateReport, ReplicationReport, SplitPlan,
};
pub use policy::{
    ewm_search, first_best_rule, ipw_welfare, random_benchmark_welfare, status_quo_welfare,
    WelfareEstimate,
};
