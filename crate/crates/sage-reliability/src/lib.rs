//! Reliability lab for multi-step agent chains.
//!
//! Closed-form success and error models (chained steps, detect-and-retry,
//! gated recovery) with Monte Carlo cross-checks, exact discrete
//! information measures in bits, and cost-bound verification over gate
//! traces. Everything is pure and deterministic per seed.

pub mod chain;
pub mod cost;
pub mod error;
pub mod info;
pub mod mc;
pub mod params;
pub mod report;

pub use chain::{
    chain_success, effective_error, hybrid_success_step, survival_curve, variance_scaling,
    variance_slope,
};
pub use cost::{cost_bound_check, CostBoundReport};
pub use error::{ReliabilityError, ReliabilityResult};
pub use info::{info_bound_check, trace_entropy_suite, DiscreteJoint, EntropyReport, InfoBoundReport};
pub use mc::{
    binomial_se, detector_model, mc_chain_success, mc_detector_model, mc_effective_error,
    mc_hybrid_success_step, DetectorModel,
};
pub use params::{parse_scenario, ReliabilityParams};
pub use report::{run_scenario, CheckOutcome, CurveSet, ScenarioReport};
