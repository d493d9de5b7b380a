//! Exhaustive search for policies that satisfy several parity metrics at
//! once.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cancel, PolicyGrid};
use crate::metrics::{disparity_resolved, stats_resolved, MetricId};
use crate::scenario::{Policy, Scenario};

/// Default joint-satisfaction tolerance.
pub const DEFAULT_EPSILON: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FeasibilityReport {
    pub metrics: Vec<MetricId>,
    pub epsilon: f64,
    pub grid: PolicyGrid,
    pub evaluated: u64,
    /// Every grid policy meeting all listed disparities within `epsilon`,
    /// sorted by policy encoding.
    pub witnesses: Vec<Policy>,
    /// True when every witness accepts everyone or rejects everyone
    /// (vacuously true without witnesses).
    pub degenerate_only: bool,
    /// Witnesses that are neither accept-all nor reject-all.
    pub non_degenerate_count: usize,
}

fn is_degenerate(taus: &[Vec<f64>]) -> bool {
    let all = |v: f64| taus.iter().flatten().all(|&t| t == v);
    all(1.0) || all(0.0)
}

pub fn joint_feasible(
    scenario: &Scenario,
    metrics: &[MetricId],
    epsilon: f64,
    grid: &PolicyGrid,
) -> Result<FeasibilityReport> {
    joint_feasible_with(scenario, metrics, epsilon, grid, &())
}

pub fn joint_feasible_with(
    scenario: &Scenario,
    metrics: &[MetricId],
    epsilon: f64,
    grid: &PolicyGrid,
    cancel: &dyn Cancel,
) -> Result<FeasibilityReport> {
    if !(epsilon >= 0.0) {
        return Err(Error::Configuration(alloc::format!(
            "epsilon must be >= 0, got {}",
            epsilon
        )));
    }
    if metrics.is_empty() {
        return Err(Error::Configuration("no metrics to check".into()));
    }
    let mut metrics = metrics.to_vec();
    metrics.sort();
    metrics.dedup();
    if metrics.contains(&MetricId::MinmaxError) {
        return Err(Error::Configuration(
            "minmax_error is an error level, not a parity metric".into(),
        ));
    }
    if metrics.contains(&MetricId::ConditionalDemographicParity) && !scenario.has_strata() {
        return Err(Error::Configuration(
            "conditional_demographic_parity needs stratum tags".into(),
        ));
    }

    let expanded = grid.expand(scenario)?;
    let mut evaluated = 0u64;
    let mut witnesses: Vec<(Policy, bool)> = Vec::new();
    expanded.for_each(scenario, cancel, |build, taus| {
        evaluated += 1;
        let stats = stats_resolved(scenario, taus);
        for &m in &metrics {
            if disparity_resolved(m, scenario, taus, &stats)? > epsilon {
                return Ok(());
            }
        }
        witnesses.push((build(), is_degenerate(taus)));
        Ok(())
    })?;
    witnesses.sort_by_cached_key(|(p, _)| p.encoding());
    let non_degenerate_count = witnesses.iter().filter(|(_, d)| !*d).count();
    Ok(FeasibilityReport {
        metrics,
        epsilon,
        grid: grid.clone(),
        evaluated,
        witnesses: witnesses.into_iter().map(|(p, _)| p).collect(),
        degenerate_only: non_degenerate_count == 0,
        non_degenerate_count,
    })
}
