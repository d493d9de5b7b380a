//! Request and response documents shared by the CLI and the HTTP service.
//! Both front ends parse a request, call the function here, and print the
//! canonical JSON of the result, so identical inputs give identical bytes.

use std::collections::BTreeMap;

use navigator_core::grid::Cancel;
use navigator_core::impossibility::{joint_feasible_with, DEFAULT_EPSILON};
use navigator_core::metrics::evaluate;
use navigator_core::pareto::{constrained_optimum, frontier_with, Frontier, Optimum};
use navigator_core::selector::{cross_check, select_with, CrossCheck, SelectorConfig, DEFAULT_DISPARITY_BOUND};
use navigator_core::tree::{DecisionTree, TreeOutcome};
use navigator_core::welfare::{ledger, long_run_drift, one_step_welfare, LedgerComparison, LedgerPair};
use navigator_core::{
    AcceptanceRule, FairnessReport, FeasibilityReport, MetricId, Policy, PolicyGrid, Scenario,
    Selection, SustainabilityConstraint, Trajectory, WelfareOutcome, WelfareParams,
};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

/// A policy given inline, by the name of one of the scenario's policies,
/// or as a threshold shared by every group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicyRef {
    Threshold(f64),
    Named(String),
    Inline(Policy),
}

impl PolicyRef {
    pub fn resolve(&self, scenario: &Scenario) -> Result<Policy> {
        let policy = match self {
            PolicyRef::Threshold(t) => Policy::uniform(scenario, AcceptanceRule::Threshold(*t)),
            PolicyRef::Named(name) => scenario
                .policies
                .get(name)
                .cloned()
                .ok_or_else(|| AppError::NotFound(format!("policy `{}`", name)))?,
            PolicyRef::Inline(p) => p.clone(),
        };
        policy.validate(scenario)?;
        Ok(policy)
    }
}

fn required(policy: &Option<PolicyRef>) -> Result<&PolicyRef> {
    policy
        .as_ref()
        .ok_or_else(|| AppError::Request("a policy is required (inline, by name, or a threshold)".into()))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct MetricsRequest {
    #[serde(default)]
    pub policy: Option<PolicyRef>,
}

pub fn metrics(scenario: &Scenario, req: &MetricsRequest) -> Result<FairnessReport> {
    Ok(evaluate(scenario, &required(&req.policy)?.resolve(scenario)?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FrontierRequest {
    pub metric: MetricId,
    #[serde(default)]
    pub grid: PolicyGrid,
    /// Also report the utility-maximal policy within this disparity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub welfare_params: Option<WelfareParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FrontierReport {
    pub frontier: Frontier,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimum: Option<Optimum>,
}

impl FrontierReport {
    pub fn is_infeasible(&self) -> bool {
        matches!(self.optimum, Some(Optimum::Infeasible { .. }))
    }
}

pub fn frontier(scenario: &Scenario, req: &FrontierRequest, cancel: &dyn Cancel) -> Result<FrontierReport> {
    let params = req.welfare_params.as_ref().unwrap_or(&scenario.welfare_params);
    let frontier = frontier_with(scenario, req.metric, &req.grid, params, cancel)?;
    let optimum = req
        .bound
        .map(|b| constrained_optimum(scenario, req.metric, b, &req.grid, params))
        .transpose()?;
    Ok(FrontierReport { frontier, optimum })
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ImpossibilityRequest {
    pub metrics: Vec<MetricId>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub grid: PolicyGrid,
}

pub fn impossibility(
    scenario: &Scenario,
    req: &ImpossibilityRequest,
    cancel: &dyn Cancel,
) -> Result<FeasibilityReport> {
    Ok(joint_feasible_with(scenario, &req.metrics, req.epsilon, &req.grid, cancel)?)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SimulateRequest {
    #[serde(default)]
    pub policy: Option<PolicyRef>,
    /// Drift rounds; no trajectory when 0.
    #[serde(default)]
    pub horizon: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub welfare_params: Option<WelfareParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ledger: Option<Vec<LedgerPair>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimulationReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub welfare: Option<WelfareOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Trajectory>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ledger: Option<LedgerComparison>,
}

/// Welfare of a policy on a scenario, a ledger comparison, or both.
pub fn simulate(scenario: Option<&Scenario>, req: &SimulateRequest) -> Result<SimulationReport> {
    let mut report = SimulationReport {
        welfare: None,
        trajectory: None,
        ledger: req.ledger.as_deref().map(ledger),
    };
    match scenario {
        Some(s) => {
            let policy = required(&req.policy)?.resolve(s)?;
            let params = req.welfare_params.as_ref().unwrap_or(&s.welfare_params);
            report.welfare = Some(one_step_welfare(s, &policy, params)?);
            if req.horizon > 0 {
                report.trajectory = Some(long_run_drift(s, &policy, params, req.horizon)?);
            }
        }
        None if report.ledger.is_none() => {
            return Err(AppError::Request("nothing to simulate: give a scenario or a ledger".into()))
        }
        None => {}
    }
    Ok(report)
}

fn default_bound() -> f64 {
    DEFAULT_DISPARITY_BOUND
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SelectRequest {
    #[serde(default)]
    pub min_utility: f64,
    #[serde(default = "default_bound")]
    pub bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<MetricId>>,
    #[serde(default)]
    pub grid: PolicyGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub welfare_horizon: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub welfare_params: Option<WelfareParams>,
}

impl Default for SelectRequest {
    fn default() -> Self {
        SelectRequest {
            min_utility: 0.0,
            bound: DEFAULT_DISPARITY_BOUND,
            candidates: None,
            grid: PolicyGrid::default(),
            welfare_horizon: None,
            welfare_params: None,
        }
    }
}

impl SelectRequest {
    pub fn config(&self) -> SelectorConfig {
        SelectorConfig {
            bound: self.bound,
            candidates: self.candidates.clone(),
            welfare_horizon: self.welfare_horizon,
        }
    }

    pub fn constraint(&self) -> SustainabilityConstraint {
        SustainabilityConstraint {
            min_institution_utility: self.min_utility,
        }
    }
}

pub fn select(scenario: &Scenario, req: &SelectRequest, cancel: &dyn Cancel) -> Result<Selection> {
    let params = req.welfare_params.as_ref().unwrap_or(&scenario.welfare_params);
    Ok(select_with(scenario, params, &req.constraint(), &req.grid, &req.config(), cancel)?)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TraverseRequest {
    #[serde(default)]
    pub answers: BTreeMap<String, String>,
    /// Stored scenario to cross-check a leaf against (service only; the CLI
    /// takes a scenario file).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub select: Option<SelectRequest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraversalReport {
    pub outcome: TreeOutcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<CrossCheck>,
}

/// Walks `tree`; on a leaf with a scenario at hand, cross-checks the leaf
/// metric against the selector.
pub fn traverse(
    tree: &DecisionTree,
    answers: &BTreeMap<String, String>,
    scenario: Option<(&Scenario, &SelectRequest)>,
) -> Result<TraversalReport> {
    let outcome = tree.traverse(answers)?;
    let cross_check = match (&outcome, scenario) {
        (TreeOutcome::Leaf { metric, .. }, Some((s, req))) => Some(cross_check(*metric, &select(s, req, &())?)),
        _ => None,
    };
    Ok(TraversalReport { outcome, cross_check })
}

/// Persisted bundle of one selection run with the evaluations behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    pub id: String,
    pub scenario_id: String,
    pub request: SelectRequest,
    pub selection: Selection,
    /// Evaluation of the chosen policy; absent when selection is infeasible.
    pub fairness: Option<FairnessReport>,
    pub welfare: Option<WelfareOutcome>,
    /// Frontier of the chosen metric over the same grid.
    pub frontier: Frontier,
    pub created_at_unix_ms: u64,
}

/// Runs a selection and the evaluations that accompany it. `id` and
/// `created_at_unix_ms` are supplied by the caller.
pub fn run_report(
    scenario: &Scenario,
    req: &SelectRequest,
    id: String,
    created_at_unix_ms: u64,
) -> Result<RunReport> {
    let params = req.welfare_params.as_ref().unwrap_or(&scenario.welfare_params);
    let selection = select(scenario, req, &())?;
    let frontier = frontier_with(scenario, selection.chosen_metric(), &req.grid, params, &())?;
    let (fairness, welfare) = match selection.selected() {
        Some(r) => (
            Some(evaluate(scenario, &r.chosen_policy)?),
            Some(one_step_welfare(scenario, &r.chosen_policy, params)?),
        ),
        None => (None, None),
    };
    Ok(RunReport {
        id,
        scenario_id: scenario.id.clone(),
        request: req.clone(),
        selection,
        fairness,
        welfare,
        frontier,
        created_at_unix_ms,
    })
}
