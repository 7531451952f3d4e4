//! Restricted-time win statistics for prioritized time-to-event outcomes
//! under right censoring: IPCW and conditional-tie-weighted (m-IPCW)
//! estimators, sandwich variances, a Monte Carlo harness and a quadrature
//! truth oracle.

// `!(x > 0.0)` style guards are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod copula;
pub mod data;
pub mod error;
pub mod estimation;
pub mod optim;
pub mod quadrature;
pub mod report;
pub mod simulation;
pub mod survival;
pub mod truth;
pub mod variance;

pub use copula::{fit_copula, fit_copula_lenient, CopulaFit, CopulaSpec, Family};
pub use error::{Error, Result};
pub use estimation::{
    estimate, estimate_full, fit_nuisances, restrict, summarize, CensorModel, Estimate, FittedNuisances, LongRow,
    MarginModel, Method, NuisanceBundle, NuisanceConfig, RestrictedRecord, Summary, WinComponents,
};
pub use report::ResultRow;
pub use simulation::{run_scenario, Dgp, Estimand, MonteCarloSummary, ScenarioConfig, WorkingModel};
pub use survival::{
    cox_survival, fit_censoring_km, fit_cox, fit_exponential, CoxFit, ExponentialFit, KaplanMeierCurve,
    ModelInfluence, SurvivalModel, SurvivalSample, WeibullPh,
};
pub use truth::{true_values, TruthResult};
pub use variance::{delta_ci, influence_rows, sandwich, InfluenceRows, Interval, Intervals, SandwichResult};
