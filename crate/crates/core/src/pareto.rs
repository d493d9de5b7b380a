//! Policy enumeration, scoring on (utility, disparity, worst-off welfare),
//! the non-dominated frontier and constrained optima.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cancel, ExpandedGrid, PolicyGrid};
use crate::metrics::{disparity_resolved, stats_resolved, utility_resolved, MetricId};
use crate::scenario::{Policy, Scenario, WelfareParams};
use crate::selector::identify_worst_off;
use crate::welfare::{deltas_resolved, drift_deltas_resolved};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ParetoPoint {
    pub policy: Policy,
    pub utility: f64,
    pub disparity: f64,
    pub worst_off_welfare: f64,
}

impl ParetoPoint {
    /// `self` is at least as good on both axes and strictly better on one.
    pub fn dominates(&self, other: &ParetoPoint) -> bool {
        self.utility >= other.utility
            && self.disparity <= other.disparity
            && (self.utility > other.utility || self.disparity < other.disparity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Frontier {
    pub metric: MetricId,
    /// Non-dominated points, strictly descending in utility.
    pub points: Vec<ParetoPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "camelCase")]
pub enum Optimum {
    Found {
        point: ParetoPoint,
    },
    /// No grid policy meets the bound; `min_disparity` is the best the grid
    /// reaches.
    #[serde(rename_all = "camelCase")]
    Infeasible { bound: f64, min_disparity: f64 },
}

impl Optimum {
    pub fn point(&self) -> Option<&ParetoPoint> {
        match self {
            Optimum::Found { point } => Some(point),
            Optimum::Infeasible { .. } => None,
        }
    }
}

/// How the welfare of a group under a policy is measured.
#[derive(Debug, Clone, Copy)]
pub(crate) enum WelfareMeasure<'a> {
    OneStep(&'a WelfareParams),
    /// Mean-score change after the given number of rounds.
    Drift(&'a WelfareParams, u32),
}

/// One scanned grid policy. `disparities` aligns with the metric list the
/// scan was asked for.
#[derive(Debug, Clone)]
pub(crate) struct Scored {
    pub index: usize,
    pub utility: f64,
    pub disparities: Vec<f64>,
    pub welfare: Vec<f64>,
}

pub(crate) struct ScoredGrid {
    pub grid: ExpandedGrid,
    pub entries: Vec<Scored>,
}

impl ScoredGrid {
    pub fn policy(&self, scenario: &Scenario, index: usize) -> Policy {
        policy_at(&self.grid, scenario, index)
    }

    pub fn encoding(&self, scenario: &Scenario, index: usize) -> String {
        self.policy(scenario, index).encoding()
    }
}

fn policy_at(grid: &ExpandedGrid, scenario: &Scenario, mut index: usize) -> Policy {
    match grid {
        ExpandedGrid::List(list) => list[index].clone(),
        ExpandedGrid::Product(options) => {
            let mut picks = alloc::vec![0usize; options.len()];
            for pos in (0..options.len()).rev() {
                picks[pos] = index % options[pos].len();
                index /= options[pos].len();
            }
            Policy {
                per_group: scenario
                    .groups
                    .iter()
                    .zip(options)
                    .zip(picks)
                    .map(|((g, o), i)| (g.id.clone(), o[i].rule.clone()))
                    .collect(),
            }
        }
    }
}

pub(crate) fn score_grid(
    scenario: &Scenario,
    grid: &PolicyGrid,
    metrics: &[MetricId],
    welfare: WelfareMeasure<'_>,
    cancel: &dyn Cancel,
) -> Result<ScoredGrid> {
    if metrics.contains(&MetricId::ConditionalDemographicParity) && !scenario.has_strata() {
        return Err(Error::Configuration(
            "conditional_demographic_parity needs stratum tags".into(),
        ));
    }
    let expanded = grid.expand(scenario)?;
    let mut entries = Vec::new();
    expanded.for_each(scenario, cancel, |_, taus| {
        let stats = stats_resolved(scenario, taus);
        let disparities = metrics
            .iter()
            .map(|&m| disparity_resolved(m, scenario, taus, &stats))
            .collect::<Result<Vec<f64>>>()?;
        let welfare = match welfare {
            WelfareMeasure::OneStep(params) => deltas_resolved(scenario, taus, params),
            WelfareMeasure::Drift(params, horizon) => {
                drift_deltas_resolved(scenario, taus, params, horizon)
            }
        };
        entries.push(Scored {
            index: entries.len(),
            utility: utility_resolved(scenario, taus),
            disparities,
            welfare,
        });
        Ok(())
    })?;
    Ok(ScoredGrid {
        grid: expanded,
        entries,
    })
}

/// Utility-maximal entry among those passing `admit`; ties go to lower
/// disparity at `metric_slot`, then to the smaller policy encoding.
pub(crate) fn best_by_utility(
    scenario: &Scenario,
    scored: &ScoredGrid,
    metric_slot: Option<usize>,
    admit: impl Fn(&Scored) -> bool,
) -> Option<usize> {
    let disparity = |e: &Scored| metric_slot.map_or(0.0, |k| e.disparities[k]);
    let mut best: Option<&Scored> = None;
    for e in scored.entries.iter().filter(|e| admit(e)) {
        best = Some(match best {
            None => e,
            Some(b) => {
                let ord = e
                    .utility
                    .partial_cmp(&b.utility)
                    .unwrap_or(Ordering::Equal)
                    .then_with(|| {
                        disparity(b)
                            .partial_cmp(&disparity(e))
                            .unwrap_or(Ordering::Equal)
                    })
                    .then_with(|| {
                        scored
                            .encoding(scenario, b.index)
                            .cmp(&scored.encoding(scenario, e.index))
                    });
                if ord == Ordering::Greater {
                    e
                } else {
                    b
                }
            }
        });
    }
    best.map(|e| e.index)
}

pub fn enumerate_policies(scenario: &Scenario, grid: &PolicyGrid) -> Result<Vec<Policy>> {
    grid.expand(scenario)?.policies(scenario)
}

fn worst_off_index(scenario: &Scenario, params: &WelfareParams) -> usize {
    scenario
        .group_index(&identify_worst_off(scenario, params))
        .unwrap_or(0)
}

fn to_point(scenario: &Scenario, scored: &ScoredGrid, index: usize, worst: usize) -> ParetoPoint {
    let e = &scored.entries[index];
    ParetoPoint {
        policy: scored.policy(scenario, index),
        utility: e.utility,
        disparity: e.disparities[0],
        worst_off_welfare: e.welfare[worst],
    }
}

/// Every grid policy scored for `metric`, in grid order.
pub fn score_policies(
    scenario: &Scenario,
    metric: MetricId,
    grid: &PolicyGrid,
    welfare: &WelfareParams,
) -> Result<Vec<ParetoPoint>> {
    welfare.validate(scenario)?;
    let scored = score_grid(scenario, grid, &[metric], WelfareMeasure::OneStep(welfare), &())?;
    let worst = worst_off_index(scenario, welfare);
    Ok((0..scored.entries.len())
        .map(|i| to_point(scenario, &scored, i, worst))
        .collect())
}

/// Non-dominated subset of `points` on (utility max, disparity min).
/// Points equal on both axes collapse to the smallest policy encoding.
pub fn pareto_frontier(metric: MetricId, points: Vec<ParetoPoint>) -> Result<Frontier> {
    if points.is_empty() {
        return Err(Error::EmptyFrontier);
    }
    let mut keyed: Vec<(String, ParetoPoint)> =
        points.into_iter().map(|p| (p.policy.encoding(), p)).collect();
    keyed.sort_by(|(ea, a), (eb, b)| {
        b.utility
            .partial_cmp(&a.utility)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.disparity.partial_cmp(&b.disparity).unwrap_or(Ordering::Equal))
            .then_with(|| ea.cmp(eb))
    });
    let mut kept: Vec<ParetoPoint> = Vec::new();
    let mut best_disparity = f64::INFINITY;
    for (_, p) in keyed {
        if p.disparity < best_disparity {
            best_disparity = p.disparity;
            kept.push(p);
        }
    }
    Ok(Frontier {
        metric,
        points: kept,
    })
}

pub fn frontier(
    scenario: &Scenario,
    metric: MetricId,
    grid: &PolicyGrid,
    welfare: &WelfareParams,
) -> Result<Frontier> {
    frontier_with(scenario, metric, grid, welfare, &())
}

pub fn frontier_with(
    scenario: &Scenario,
    metric: MetricId,
    grid: &PolicyGrid,
    welfare: &WelfareParams,
    cancel: &dyn Cancel,
) -> Result<Frontier> {
    welfare.validate(scenario)?;
    let scored = score_grid(scenario, grid, &[metric], WelfareMeasure::OneStep(welfare), cancel)?;
    let worst = worst_off_index(scenario, welfare);
    // Sweep on indices so only frontier policies get materialised.
    let mut order: Vec<usize> = (0..scored.entries.len()).collect();
    let e = &scored.entries;
    order.sort_by(|&a, &b| {
        e[b].utility
            .partial_cmp(&e[a].utility)
            .unwrap_or(Ordering::Equal)
            .then_with(|| {
                e[a].disparities[0]
                    .partial_cmp(&e[b].disparities[0])
                    .unwrap_or(Ordering::Equal)
            })
    });
    let mut kept: Vec<ParetoPoint> = Vec::new();
    let mut best_disparity = f64::INFINITY;
    let mut i = 0;
    while i < order.len() {
        // Block of exact (utility, disparity) ties: keep the smallest encoding.
        let head = &e[order[i]];
        let mut j = i + 1;
        while j < order.len()
            && e[order[j]].utility == head.utility
            && e[order[j]].disparities[0] == head.disparities[0]
        {
            j += 1;
        }
        if head.disparities[0] < best_disparity {
            best_disparity = head.disparities[0];
            let chosen = order[i..j]
                .iter()
                .copied()
                .min_by_key(|&k| scored.encoding(scenario, k))
                .expect("non-empty block");
            kept.push(to_point(scenario, &scored, chosen, worst));
        }
        i = j;
    }
    Ok(Frontier {
        metric,
        points: kept,
    })
}

/// Utility-maximal grid policy with `metric` disparity at most `bound`.
pub fn constrained_optimum(
    scenario: &Scenario,
    metric: MetricId,
    bound: f64,
    grid: &PolicyGrid,
    welfare: &WelfareParams,
) -> Result<Optimum> {
    if !(bound >= 0.0) {
        return Err(Error::Configuration(alloc::format!(
            "disparity bound must be >= 0, got {}",
            bound
        )));
    }
    welfare.validate(scenario)?;
    let scored = score_grid(scenario, grid, &[metric], WelfareMeasure::OneStep(welfare), &())?;
    let worst = worst_off_index(scenario, welfare);
    Ok(
        match best_by_utility(scenario, &scored, Some(0), |e| e.disparities[0] <= bound) {
            Some(i) => Optimum::Found {
                point: to_point(scenario, &scored, i, worst),
            },
            None => Optimum::Infeasible {
                bound,
                min_disparity: scored
                    .entries
                    .iter()
                    .map(|e| e.disparities[0])
                    .fold(f64::INFINITY, f64::min),
            },
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::fixtures::*;
    use alloc::collections::BTreeMap;
    use alloc::format;
    use alloc::vec;

    fn pt(tag: usize, utility: f64, disparity: f64) -> ParetoPoint {
        ParetoPoint {
            policy: Policy::default()
                .with_rule(format!("g{:03}", tag), crate::AcceptanceRule::Threshold(0.0)),
            utility,
            disparity,
            worst_off_welfare: 0.0,
        }
    }

    #[test]
    fn three_point_example() {
        let f = pareto_frontier(
            MetricId::DemographicParity,
            vec![pt(0, 1.0, 0.5), pt(1, 0.5, 0.2), pt(2, 0.9, 0.6)],
        )
        .unwrap();
        let uv: Vec<(f64, f64)> = f.points.iter().map(|p| (p.utility, p.disparity)).collect();
        assert_eq!(uv, vec![(1.0, 0.5), (0.5, 0.2)]);
    }

    #[test]
    fn single_point_and_empty_input() {
        let f = pareto_frontier(MetricId::DemographicParity, vec![pt(0, 0.3, 0.1)]).unwrap();
        assert_eq!(f.points.len(), 1);
        assert_eq!(
            pareto_frontier(MetricId::DemographicParity, vec![]),
            Err(Error::EmptyFrontier)
        );
    }

    #[test]
    fn duplicates_keep_smallest_encoding() {
        let f = pareto_frontier(
            MetricId::DemographicParity,
            vec![pt(7, 1.0, 0.1), pt(3, 1.0, 0.1), pt(5, 1.0, 0.3)],
        )
        .unwrap();
        assert_eq!(f.points.len(), 1);
        assert_eq!(f.points[0].policy.encoding(), "g003=t:0");
    }

    #[test]
    fn enumeration_counts() {
        let s = two_group();
        let mut values = BTreeMap::new();
        values.insert("A".into(), vec![0.0, 0.5, 1.0]);
        values.insert("B".into(), vec![0.0, 0.5, 1.0]);
        let grid = PolicyGrid::threshold_values(values);
        let ps = enumerate_policies(&s, &grid).unwrap();
        assert_eq!(ps.len(), 9);
        assert_eq!(ps, enumerate_policies(&s, &grid).unwrap());

        let one = scenario(vec![group("A", 1.0, &[(0.0, 0.5, 0.2), (1.0, 0.5, 0.8)])]);
        let mut values = BTreeMap::new();
        values.insert("A".into(), vec![0.0, 1.0]);
        assert_eq!(
            enumerate_policies(&one, &PolicyGrid::threshold_values(values))
                .unwrap()
                .len(),
            2
        );
    }

    #[test]
    fn frontier_from_grid_matches_point_sweep() {
        let s = two_group();
        let grid = PolicyGrid::accept_vectors(0.25);
        let w = s.welfare_params.clone();
        let direct = frontier(&s, MetricId::EqualOpportunity, &grid, &w).unwrap();
        let points = score_policies(&s, MetricId::EqualOpportunity, &grid, &w).unwrap();
        let swept = pareto_frontier(MetricId::EqualOpportunity, points).unwrap();
        assert_eq!(direct, swept);
    }

    #[test]
    fn unbounded_optimum_is_global_utility_max() {
        let s = two_group();
        let grid = PolicyGrid::thresholds();
        let w = s.welfare_params.clone();
        let opt = constrained_optimum(&s, MetricId::DemographicParity, f64::INFINITY, &grid, &w).unwrap();
        let best = score_policies(&s, MetricId::DemographicParity, &grid, &w)
            .unwrap()
            .into_iter()
            .map(|p| p.utility)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(opt.point().unwrap().utility, best);
    }

    #[test]
    fn symmetric_zero_bound_is_common_threshold() {
        let s = scenario(vec![
            group("A", 0.5, &[(0.0, 0.3, 0.2), (1.0, 0.4, 0.6), (2.0, 0.3, 0.9)]),
            group("B", 0.5, &[(0.0, 0.3, 0.2), (1.0, 0.4, 0.6), (2.0, 0.3, 0.9)]),
        ]);
        let w = s.welfare_params.clone();
        let opt = constrained_optimum(&s, MetricId::DemographicParity, 0.0, &PolicyGrid::thresholds(), &w)
            .unwrap();
        let p = &opt.point().unwrap().policy;
        assert_eq!(p.per_group["A"], p.per_group["B"]);
    }

    #[test]
    fn infeasible_bound_is_reported() {
        let s = two_group();
        let w = s.welfare_params.clone();
        let grid = PolicyGrid::explicit(vec![Policy::common_threshold(&s, 0.5)]);
        let opt = constrained_optimum(&s, MetricId::EqualOpportunity, 0.001, &grid, &w).unwrap();
        assert!(matches!(opt, Optimum::Infeasible { .. }));
        assert!(constrained_optimum(&s, MetricId::EqualOpportunity, -1.0, &grid, &w).is_err());
    }
}
