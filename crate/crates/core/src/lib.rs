//! Fairness measurement and Rawlsian policy selection over group-structured
//! classification scenarios.
//!
//! A [`Scenario`] describes groups as discrete score distributions with a
//! per-bin probability of being a true positive. A [`Policy`] assigns each
//! group an acceptance rule. Everything downstream (confusion statistics,
//! disparities, utility, welfare, frontiers, selection) is an exact finite
//! sum over bins.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the HTTP
//! service and the CLI live in the `navigator` crate.

#![no_std]

extern crate alloc;

mod error;
pub mod grid;
pub mod impossibility;
pub mod ingest;
pub mod metrics;
pub mod pareto;
pub mod scenario;
pub mod selector;
pub mod synth;
pub mod tree;
pub mod welfare;

pub use error::{Error, Result};
pub use grid::{Cancel, GridKind, PolicyGrid};
pub use impossibility::{joint_feasible, FeasibilityReport};
pub use metrics::{ConfusionStats, FairnessReport, MetricId};
pub use pareto::{Frontier, Optimum, ParetoPoint};
pub use scenario::{
    AcceptanceRule, ContextClass, GroupId, GroupProfile, OutcomeWeights, Policy, Scenario,
    ScoreBin, UtilityParams, WelfareParams,
};
pub use selector::{Selection, SelectionResult, SustainabilityConstraint};
pub use tree::{DecisionNode, DecisionTree, TreeOutcome};
pub use welfare::{LedgerEntry, Trajectory, WelfareOutcome};

/// Absolute tolerance for probability sums (bin masses, group shares).
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;
