//! Rawlsian selection of a fairness metric and an operating point.
//!
//! Decisions that govern access to offices and positions fall under fair
//! equality of opportunity and get a parity metric, checked afterwards
//! against worst-off welfare. Everything else falls under the difference
//! principle: pick the grid policy that maximises the welfare of the
//! worst-off group while the institution stays viable, and rank metrics by
//! how their constrained optima move that welfare.
//!
//! Every rule that fires is recorded in an ordered justification trace.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cancel, PolicyGrid};
use crate::metrics::MetricId;
use crate::pareto::{best_by_utility, score_grid, ScoredGrid, WelfareMeasure};
use crate::scenario::{ContextClass, GroupId, Policy, Scenario, WelfareParams};

/// Disparity bound used for constrained optima during selection.
pub const DEFAULT_DISPARITY_BOUND: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SustainabilityConstraint {
    pub min_institution_utility: f64,
}

impl Default for SustainabilityConstraint {
    fn default() -> Self {
        SustainabilityConstraint {
            min_institution_utility: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SelectorConfig {
    #[serde(default = "default_bound")]
    pub bound: f64,
    /// Metrics to rank; defaults to the parity metrics available for the
    /// scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<MetricId>>,
    /// Measure welfare as mean-score drift after this many rounds instead
    /// of the one-step expected delta.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub welfare_horizon: Option<u32>,
}

fn default_bound() -> f64 {
    DEFAULT_DISPARITY_BOUND
}

impl Default for SelectorConfig {
    fn default() -> Self {
        SelectorConfig {
            bound: DEFAULT_DISPARITY_BOUND,
            candidates: None,
            welfare_horizon: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Principle {
    FairEqualityOfOpportunity,
    DifferencePrinciple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleId {
    ContextClassification,
    WorstOffIdentification,
    UtilityMaximizer,
    MetricImpact,
    MetricRanking,
    ParityMetricChoice,
    ParityConstrainedChoice,
    WelfareVerification,
    MaximinChoice,
    HarmWarning,
    Infeasibility,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Flag(bool),
    Number(f64),
    Text(String),
}

impl From<f64> for Quantity {
    fn from(v: f64) -> Self {
        Quantity::Number(v)
    }
}

impl From<bool> for Quantity {
    fn from(v: bool) -> Self {
        Quantity::Flag(v)
    }
}

impl From<&str> for Quantity {
    fn from(v: &str) -> Self {
        Quantity::Text(v.to_string())
    }
}

impl From<String> for Quantity {
    fn from(v: String) -> Self {
        Quantity::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Reason {
    pub rule: RuleId,
    pub text: String,
    pub quantities: BTreeMap<String, Quantity>,
}

#[derive(Default)]
struct Trace(Vec<Reason>);

impl Trace {
    fn push<const N: usize>(&mut self, rule: RuleId, text: String, quantities: [(&str, Quantity); N]) {
        self.0.push(Reason {
            rule,
            text,
            quantities: quantities
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricImpact {
    pub metric: MetricId,
    /// Worst-off welfare at the metric's constrained optimum minus
    /// worst-off welfare at the unconstrained utility maximiser.
    pub impact: Option<f64>,
    pub worst_off_welfare: Option<f64>,
    pub utility: Option<f64>,
    pub disparity: Option<f64>,
    pub policy: Option<Policy>,
    pub infeasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SelectionResult {
    pub principle: Principle,
    pub chosen_metric: MetricId,
    pub metric_ranking: Vec<MetricImpact>,
    pub chosen_policy: Policy,
    pub chosen_utility: f64,
    pub worst_off_group: GroupId,
    pub worst_off_welfare: f64,
    /// Worst-off welfare at the chosen policy minus worst-off welfare at the
    /// unconstrained utility maximiser.
    pub welfare_delta_vs_utility_max: f64,
    pub justification: Vec<Reason>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingConstraint {
    Sustainability,
    DisparityBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Infeasibility {
    pub principle: Principle,
    pub chosen_metric: MetricId,
    pub metric_ranking: Vec<MetricImpact>,
    pub worst_off_group: GroupId,
    pub binding_constraint: BindingConstraint,
    pub min_institution_utility: f64,
    /// Highest utility any admissible-by-disparity grid policy reaches.
    pub best_available_utility: Option<f64>,
    pub justification: Vec<Reason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Selection {
    Selected(SelectionResult),
    Infeasible(Infeasibility),
}

impl Selection {
    pub fn justification(&self) -> &[Reason] {
        match self {
            Selection::Selected(r) => &r.justification,
            Selection::Infeasible(i) => &i.justification,
        }
    }

    pub fn selected(&self) -> Option<&SelectionResult> {
        match self {
            Selection::Selected(r) => Some(r),
            Selection::Infeasible(_) => None,
        }
    }

    pub fn metric_ranking(&self) -> &[MetricImpact] {
        match self {
            Selection::Selected(r) => &r.metric_ranking,
            Selection::Infeasible(i) => &i.metric_ranking,
        }
    }

    pub fn chosen_metric(&self) -> MetricId {
        match self {
            Selection::Selected(r) => r.chosen_metric,
            Selection::Infeasible(i) => i.chosen_metric,
        }
    }
}

fn baseline_of(scenario: &Scenario, params: &WelfareParams, index: usize) -> f64 {
    let g = &scenario.groups[index];
    params
        .baseline
        .as_ref()
        .and_then(|b| b.get(&g.id).copied())
        .unwrap_or_else(|| g.mean_score())
}

/// Group with the lowest baseline welfare (mean score when no baseline is
/// configured). With `ses_override` set, only `sesTag` groups compete.
/// Ties go to the lexicographically smallest id.
pub fn identify_worst_off(scenario: &Scenario, params: &WelfareParams) -> GroupId {
    let ses_only = params.ses_override && scenario.groups.iter().any(|g| g.ses_tag);
    (0..scenario.groups.len())
        .filter(|&i| !ses_only || scenario.groups[i].ses_tag)
        .min_by(|&a, &b| {
            baseline_of(scenario, params, a)
                .partial_cmp(&baseline_of(scenario, params, b))
                .unwrap_or(Ordering::Equal)
                .then_with(|| scenario.groups[a].id.cmp(&scenario.groups[b].id))
        })
        .map(|i| scenario.groups[i].id.clone())
        .unwrap_or_default()
}

/// Parity metrics ranked by default: demographic parity (conditional too
/// when strata are tagged), equal opportunity, predictive equality.
pub fn default_candidates(scenario: &Scenario) -> Vec<MetricId> {
    let mut out = alloc::vec![MetricId::DemographicParity];
    if scenario.has_strata() {
        out.push(MetricId::ConditionalDemographicParity);
    }
    out.push(MetricId::EqualOpportunity);
    out.push(MetricId::PredictiveEquality);
    out
}

fn parity_metric(scenario: &Scenario) -> MetricId {
    if scenario.has_strata() {
        MetricId::ConditionalDemographicParity
    } else {
        MetricId::DemographicParity
    }
}

fn fmt_num(v: f64) -> String {
    format!("{:.6}", v)
}

struct Context<'a> {
    scenario: &'a Scenario,
    scored: ScoredGrid,
    slots: Vec<MetricId>,
    worst: usize,
}

impl Context<'_> {
    fn slot(&self, metric: MetricId) -> usize {
        self.slots
            .iter()
            .position(|&m| m == metric)
            .expect("metric scored")
    }

    fn welfare(&self, index: usize) -> f64 {
        self.scored.entries[index].welfare[self.worst]
    }

    fn policy(&self, index: usize) -> Policy {
        self.scored.policy(self.scenario, index)
    }

    fn encoding(&self, index: usize) -> String {
        self.scored.encoding(self.scenario, index)
    }
}

fn rank(ctx: &Context<'_>, candidates: &[MetricId], bound: f64, baseline: usize) -> Vec<MetricImpact> {
    let base_welfare = ctx.welfare(baseline);
    let mut out: Vec<MetricImpact> = candidates
        .iter()
        .map(|&metric| {
            let k = ctx.slot(metric);
            match best_by_utility(ctx.scenario, &ctx.scored, Some(k), |e| e.disparities[k] <= bound) {
                Some(i) => {
                    let e = &ctx.scored.entries[i];
                    MetricImpact {
                        metric,
                        impact: Some(ctx.welfare(i) - base_welfare),
                        worst_off_welfare: Some(ctx.welfare(i)),
                        utility: Some(e.utility),
                        disparity: Some(e.disparities[k]),
                        policy: Some(ctx.policy(i)),
                        infeasible: false,
                    }
                }
                None => MetricImpact {
                    metric,
                    impact: None,
                    worst_off_welfare: None,
                    utility: None,
                    disparity: None,
                    policy: None,
                    infeasible: true,
                },
            }
        })
        .collect();
    out.sort_by(|a, b| match (a.impact, b.impact) {
        (Some(x), Some(y)) => y
            .partial_cmp(&x)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.metric.cmp(&b.metric)),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => a.metric.cmp(&b.metric),
    });
    out
}

fn prepare<'a>(
    scenario: &'a Scenario,
    params: &WelfareParams,
    grid: &PolicyGrid,
    config: &SelectorConfig,
    candidates: &[MetricId],
    cancel: &dyn Cancel,
) -> Result<Context<'a>> {
    scenario.validate()?;
    params.validate(scenario)?;
    if !(config.bound >= 0.0) {
        return Err(Error::Configuration(format!(
            "disparity bound must be >= 0, got {}",
            config.bound
        )));
    }
    if candidates.is_empty() {
        return Err(Error::Configuration("no candidate metrics".into()));
    }
    if candidates.contains(&MetricId::MinmaxError) {
        return Err(Error::Configuration(
            "minmax_error is an error level and cannot be a candidate parity metric".into(),
        ));
    }
    let mut slots: Vec<MetricId> = candidates.to_vec();
    let parity = parity_metric(scenario);
    if !slots.contains(&parity) {
        slots.push(parity);
    }
    let measure = match config.welfare_horizon {
        Some(h) => WelfareMeasure::Drift(params, h),
        None => WelfareMeasure::OneStep(params),
    };
    let scored = score_grid(scenario, grid, &slots, measure, cancel)?;
    let worst_id = identify_worst_off(scenario, params);
    let worst = scenario.group_index(&worst_id).unwrap_or(0);
    Ok(Context {
        scenario,
        scored,
        slots,
        worst,
    })
}

/// Ranks `candidates` by the worst-off welfare impact of their constrained
/// optima (bound [`DEFAULT_DISPARITY_BOUND`]). Infeasible metrics go last.
pub fn rank_metrics_by_impact(
    scenario: &Scenario,
    candidates: &[MetricId],
    params: &WelfareParams,
    grid: &PolicyGrid,
) -> Result<Vec<MetricImpact>> {
    let config = SelectorConfig::default();
    let ctx = prepare(scenario, params, grid, &config, candidates, &())?;
    let baseline = best_by_utility(scenario, &ctx.scored, None, |_| true).expect("grid not empty");
    Ok(rank(&ctx, candidates, config.bound, baseline))
}

pub fn select(
    scenario: &Scenario,
    params: &WelfareParams,
    constraint: &SustainabilityConstraint,
    grid: &PolicyGrid,
) -> Result<Selection> {
    select_with(scenario, params, constraint, grid, &SelectorConfig::default(), &())
}

pub fn select_with(
    scenario: &Scenario,
    params: &WelfareParams,
    constraint: &SustainabilityConstraint,
    grid: &PolicyGrid,
    config: &SelectorConfig,
    cancel: &dyn Cancel,
) -> Result<Selection> {
    if !constraint.min_institution_utility.is_finite() {
        return Err(Error::Configuration(
            "minimum institution utility must be finite".into(),
        ));
    }
    let candidates = config
        .candidates
        .clone()
        .unwrap_or_else(|| default_candidates(scenario));
    let ctx = prepare(scenario, params, grid, config, &candidates, cancel)?;
    let min_utility = constraint.min_institution_utility;
    let mut trace = Trace::default();

    let principle = match scenario.context_class {
        ContextClass::Opportunity => Principle::FairEqualityOfOpportunity,
        ContextClass::General => Principle::DifferencePrinciple,
    };
    trace.push(
        RuleId::ContextClassification,
        match principle {
            Principle::FairEqualityOfOpportunity => "decisions govern access to offices and positions; fair equality of opportunity takes precedence and calls for a parity metric".to_string(),
            Principle::DifferencePrinciple => "decisions do not govern access to offices and positions; the difference principle applies and the welfare of the worst-off decides".to_string(),
        },
        [
            ("contextClass", Quantity::from(match scenario.context_class {
                ContextClass::Opportunity => "opportunity",
                ContextClass::General => "general",
            })),
            ("principle", Quantity::from(match principle {
                Principle::FairEqualityOfOpportunity => "fair_equality_of_opportunity",
                Principle::DifferencePrinciple => "difference_principle",
            })),
        ],
    );

    let worst_id = scenario.groups[ctx.worst].id.clone();
    let ses_only = params.ses_override && scenario.groups.iter().any(|g| g.ses_tag);
    trace.push(
        RuleId::WorstOffIdentification,
        format!(
            "group `{}` has the lowest baseline {}{}",
            worst_id,
            if params.baseline.is_some() { "welfare" } else { "mean score" },
            if ses_only { " among low socio-economic status groups" } else { "" }
        ),
        [
            ("group", Quantity::from(worst_id.as_str())),
            ("baseline", Quantity::from(baseline_of(scenario, params, ctx.worst))),
            ("sesOverride", Quantity::from(ses_only)),
        ],
    );

    let umax = best_by_utility(scenario, &ctx.scored, None, |_| true).expect("grid not empty");
    let umax_welfare = ctx.welfare(umax);
    trace.push(
        RuleId::UtilityMaximizer,
        format!(
            "unconstrained utility maximiser reaches utility {} with worst-off welfare {}",
            fmt_num(ctx.scored.entries[umax].utility),
            fmt_num(umax_welfare)
        ),
        [
            ("policy", Quantity::from(ctx.encoding(umax))),
            ("utility", Quantity::from(ctx.scored.entries[umax].utility)),
            ("worstOffWelfare", Quantity::from(umax_welfare)),
        ],
    );

    let ranking = rank(&ctx, &candidates, config.bound, umax);
    for m in &ranking {
        match (m.impact, m.worst_off_welfare) {
            (Some(impact), Some(w)) => trace.push(
                RuleId::MetricImpact,
                format!(
                    "{} constrained to {} moves worst-off welfare to {} ({} vs the utility maximiser)",
                    m.metric,
                    fmt_num(config.bound),
                    fmt_num(w),
                    fmt_num(impact)
                ),
                [
                    ("metric", Quantity::from(m.metric.as_str())),
                    ("impact", Quantity::from(impact)),
                    ("worstOffWelfare", Quantity::from(w)),
                    ("utility", Quantity::from(m.utility.unwrap_or_default())),
                    ("bound", Quantity::from(config.bound)),
                ],
            ),
            _ => trace.push(
                RuleId::MetricImpact,
                format!("no grid policy keeps {} within {}", m.metric, fmt_num(config.bound)),
                [
                    ("metric", Quantity::from(m.metric.as_str())),
                    ("infeasible", Quantity::from(true)),
                    ("bound", Quantity::from(config.bound)),
                ],
            ),
        }
    }
    let order: Vec<&str> = ranking.iter().map(|m| m.metric.as_str()).collect();
    trace.push(
        RuleId::MetricRanking,
        format!("metrics ranked by worst-off welfare impact: {}", order.join(", ")),
        [("order", Quantity::from(order.join(",")))],
    );
    for m in &ranking {
        if let Some(w) = m.worst_off_welfare.filter(|w| *w < 0.0) {
            trace.push(
                RuleId::HarmWarning,
                format!(
                    "enforcing {} leaves the worst-off group with a negative welfare delta of {}",
                    m.metric,
                    fmt_num(w)
                ),
                [
                    ("metric", Quantity::from(m.metric.as_str())),
                    ("worstOffWelfare", Quantity::from(w)),
                ],
            );
        }
    }

    let (chosen_metric, chosen) = match principle {
        Principle::FairEqualityOfOpportunity => {
            let metric = parity_metric(scenario);
            let k = ctx.slot(metric);
            trace.push(
                RuleId::ParityMetricChoice,
                format!(
                    "fair equality of opportunity is captured by {}{}",
                    metric,
                    if metric == MetricId::DemographicParity {
                        " (no legitimate-condition strata are tagged)"
                    } else {
                        ""
                    }
                ),
                [("metric", Quantity::from(metric.as_str()))],
            );
            let chosen = best_by_utility(scenario, &ctx.scored, Some(k), |e| {
                e.disparities[k] <= config.bound && e.utility >= min_utility
            });
            if let Some(i) = chosen {
                let e = &ctx.scored.entries[i];
                trace.push(
                    RuleId::ParityConstrainedChoice,
                    format!(
                        "utility-maximal policy with {} at most {} and utility at least {}",
                        metric,
                        fmt_num(config.bound),
                        fmt_num(min_utility)
                    ),
                    [
                        ("policy", Quantity::from(ctx.encoding(i))),
                        ("utility", Quantity::from(e.utility)),
                        ("disparity", Quantity::from(e.disparities[k])),
                        ("minInstitutionUtility", Quantity::from(min_utility)),
                    ],
                );
                let delta = ctx.welfare(i) - umax_welfare;
                trace.push(
                    RuleId::WelfareVerification,
                    format!(
                        "parity changes worst-off welfare by {} relative to the utility maximiser{}",
                        fmt_num(delta),
                        if delta < 0.0 { "; the parity cost falls on the worst-off group" } else { "" }
                    ),
                    [
                        ("worstOffWelfare", Quantity::from(ctx.welfare(i))),
                        ("delta", Quantity::from(delta)),
                    ],
                );
            }
            (metric, chosen.ok_or(Some(k)))
        }
        Principle::DifferencePrinciple => {
            let metric = ranking[0].metric;
            let chosen = best_by_welfare(&ctx, |e| e.utility >= min_utility);
            if let Some(i) = chosen {
                let e = &ctx.scored.entries[i];
                trace.push(
                    RuleId::MaximinChoice,
                    format!(
                        "policy maximising worst-off welfare ({}) subject to utility {} >= {}",
                        fmt_num(ctx.welfare(i)),
                        fmt_num(e.utility),
                        fmt_num(min_utility)
                    ),
                    [
                        ("policy", Quantity::from(ctx.encoding(i))),
                        ("worstOffWelfare", Quantity::from(ctx.welfare(i))),
                        ("utility", Quantity::from(e.utility)),
                        ("minInstitutionUtility", Quantity::from(min_utility)),
                        ("metric", Quantity::from(metric.as_str())),
                    ],
                );
            }
            (metric, chosen.ok_or(None))
        }
    };

    match chosen {
        Ok(i) => {
            let e = &ctx.scored.entries[i];
            Ok(Selection::Selected(SelectionResult {
                principle,
                chosen_metric,
                metric_ranking: ranking,
                chosen_policy: ctx.policy(i),
                chosen_utility: e.utility,
                worst_off_group: worst_id,
                worst_off_welfare: ctx.welfare(i),
                welfare_delta_vs_utility_max: ctx.welfare(i) - umax_welfare,
                justification: trace.0,
            }))
        }
        Err(parity_slot) => {
            let admissible = |e: &crate::pareto::Scored| {
                parity_slot.map_or(true, |k| e.disparities[k] <= config.bound)
            };
            let best_available_utility = ctx
                .scored
                .entries
                .iter()
                .filter(|e| admissible(e))
                .map(|e| e.utility)
                .fold(None, |acc: Option<f64>, u| Some(acc.map_or(u, |a| a.max(u))));
            let binding = if best_available_utility.is_some() {
                BindingConstraint::Sustainability
            } else {
                BindingConstraint::DisparityBound
            };
            trace.push(
                RuleId::Infeasibility,
                match binding {
                    BindingConstraint::Sustainability => format!(
                        "no admissible grid policy keeps institution utility at least {}",
                        fmt_num(min_utility)
                    ),
                    BindingConstraint::DisparityBound => format!(
                        "no grid policy keeps {} within {}",
                        chosen_metric,
                        fmt_num(config.bound)
                    ),
                },
                [
                    (
                        "bindingConstraint",
                        Quantity::from(match binding {
                            BindingConstraint::Sustainability => "sustainability",
                            BindingConstraint::DisparityBound => "disparity_bound",
                        }),
                    ),
                    ("minInstitutionUtility", Quantity::from(min_utility)),
                    (
                        "bestAvailableUtility",
                        best_available_utility.map_or(Quantity::Flag(false), Quantity::Number),
                    ),
                ],
            );
            Ok(Selection::Infeasible(Infeasibility {
                principle,
                chosen_metric,
                metric_ranking: ranking,
                worst_off_group: worst_id,
                binding_constraint: binding,
                min_institution_utility: min_utility,
                best_available_utility,
                justification: trace.0,
            }))
        }
    }
}

/// Highest worst-off welfare among admitted entries; ties go to higher
/// utility, then the smaller policy encoding.
fn best_by_welfare(ctx: &Context<'_>, admit: impl Fn(&crate::pareto::Scored) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for e in ctx.scored.entries.iter().filter(|e| admit(e)) {
        best = Some(match best {
            None => e.index,
            Some(b) => {
                let eb = &ctx.scored.entries[b];
                let ord = ctx
                    .welfare(e.index)
                    .partial_cmp(&ctx.welfare(b))
                    .unwrap_or(Ordering::Equal)
                    .then_with(|| e.utility.partial_cmp(&eb.utility).unwrap_or(Ordering::Equal))
                    .then_with(|| ctx.encoding(b).cmp(&ctx.encoding(e.index)));
                if ord == Ordering::Greater {
                    e.index
                } else {
                    b
                }
            }
        });
    }
    best
}

/// Re-executes a selection on its recorded inputs and checks that the
/// trace replays rule by rule and reproduces the same result.
pub fn replay(
    scenario: &Scenario,
    params: &WelfareParams,
    constraint: &SustainabilityConstraint,
    grid: &PolicyGrid,
    config: &SelectorConfig,
    recorded: &Selection,
) -> Result<()> {
    let fresh = select_with(scenario, params, constraint, grid, config, &())?;
    let (a, b) = (recorded.justification(), fresh.justification());
    for (step, (x, y)) in a.iter().zip(b).enumerate() {
        if x != y {
            return Err(Error::ReplayMismatch { step });
        }
    }
    if a.len() != b.len() {
        return Err(Error::ReplayMismatch {
            step: a.len().min(b.len()),
        });
    }
    if &fresh != recorded {
        return Err(Error::ReplayMismatch { step: a.len() });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Concordance {
    Concordant,
    Discordant,
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CrossCheck {
    pub tree_metric: MetricId,
    pub selector_metric: Option<MetricId>,
    pub concordance: Concordance,
    pub tree_metric_welfare: Option<f64>,
    pub selector_metric_welfare: Option<f64>,
    /// Worst-off welfare at the selector metric's constrained optimum minus
    /// that at the tree metric's.
    pub welfare_delta: Option<f64>,
    pub note: String,
}

/// Compares a decision-tree leaf with the selector's metric choice.
pub fn cross_check(tree_metric: MetricId, selection: &Selection) -> CrossCheck {
    let Selection::Selected(result) = selection else {
        return CrossCheck {
            tree_metric,
            selector_metric: None,
            concordance: Concordance::Unavailable,
            tree_metric_welfare: None,
            selector_metric_welfare: None,
            welfare_delta: None,
            note: "selection is infeasible; no comparison available".into(),
        };
    };
    let welfare_of = |m: MetricId| {
        result
            .metric_ranking
            .iter()
            .find(|r| r.metric == m)
            .and_then(|r| r.worst_off_welfare)
    };
    let tree_w = welfare_of(tree_metric);
    let sel_w = welfare_of(result.chosen_metric);
    if tree_metric == result.chosen_metric {
        return CrossCheck {
            tree_metric,
            selector_metric: Some(result.chosen_metric),
            concordance: Concordance::Concordant,
            tree_metric_welfare: tree_w,
            selector_metric_welfare: sel_w,
            welfare_delta: Some(0.0),
            note: "decision tree and welfare-based selection agree".into(),
        };
    }
    let delta = match (sel_w, tree_w) {
        (Some(s), Some(t)) => Some(s - t),
        _ => None,
    };
    let note = match (tree_w, delta) {
        (Some(t), Some(d)) => format!(
            "decision tree picks {} but {} serves the worst-off group better by {}{}",
            tree_metric,
            result.chosen_metric,
            fmt_num(d),
            if t < 0.0 {
                format!("; {} leaves them with a negative welfare delta of {}", tree_metric, fmt_num(t))
            } else {
                String::new()
            }
        ),
        _ => format!(
            "decision tree picks {} but the selector picks {}; the tree metric was not ranked or is infeasible",
            tree_metric, result.chosen_metric
        ),
    };
    CrossCheck {
        tree_metric,
        selector_metric: Some(result.chosen_metric),
        concordance: Concordance::Discordant,
        tree_metric_welfare: tree_w,
        selector_metric_welfare: sel_w,
        welfare_delta: delta,
        note,
    }
}
