//! Location verification under spatially correlated log-normal shadowing.
//!
//! The crate models a network of base stations that receive a user's signal
//! under Gudmundson-correlated shadowing, decides between a legitimate user
//! at the claimed location and a spoofing attacker with likelihood-ratio
//! tests on raw (RSS) or differenced (DRSS) observations, computes the
//! attacker's optimal power boost and true location, and checks every
//! closed-form rate against Monte Carlo simulation.

pub mod adversary;
pub mod channel;
pub mod detector;
pub mod error;
pub mod experiments;
pub mod format;
pub mod linalg;
pub mod montecarlo;
pub mod scenario_file;

pub use adversary::{
    kl_drss, kl_rss, kl_rss_minimized, optimal_power_boost, optimize_true_location, AttackStrategy, Objective, Region,
    SearchConfig,
};
pub use channel::{MeanVectors, NetworkGeometry, Point, ShadowingModel};
pub use detector::{
    analytic_rates, build_d_matrix, drss_transform, roc_sweep, Decision, DetectorSpec, Mode, RatePair, RocCurve,
};
pub use error::{LvsError, Result};
pub use experiments::{builtin_scenarios, run_scenario, verify_theorems, Scenario, VerificationReport};
pub use montecarlo::{estimate_kl, estimate_rate, EmpiricalRate, Hypothesis, TrialPlan};
