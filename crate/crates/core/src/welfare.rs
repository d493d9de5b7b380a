//! Absolute welfare impacts per group: one-step expected deltas, long-run
//! score drift, and aggregate loan-ledger accounting.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::utility_resolved;
use crate::scenario::{GroupId, GroupProfile, OutcomeWeights, Policy, Scenario, WelfareParams};
use crate::selector::identify_worst_off;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WelfareOutcome {
    pub per_group_delta: BTreeMap<GroupId, f64>,
    pub institution_utility: f64,
    pub worst_off_group: GroupId,
    /// Expected welfare delta of the worst-off group.
    pub worst_off_welfare: f64,
}

/// Expected welfare delta of one group member under per-bin acceptance
/// probabilities.
pub(crate) fn group_delta(group: &GroupProfile, taus: &[f64], w: &OutcomeWeights) -> f64 {
    group
        .bins
        .iter()
        .zip(taus)
        .map(|(b, &tau)| {
            let r = b.positive_rate;
            b.mass
                * (tau * (r * w.w_tp + (1.0 - r) * w.w_fp)
                    + (1.0 - tau) * (r * w.w_fn + (1.0 - r) * w.w_tn))
        })
        .sum()
}

pub(crate) fn deltas_resolved(
    scenario: &Scenario,
    taus: &[Vec<f64>],
    params: &WelfareParams,
) -> Vec<f64> {
    scenario
        .groups
        .iter()
        .zip(taus)
        .map(|(g, t)| group_delta(g, t, params.weights_for(&g.id)))
        .collect()
}

pub fn one_step_welfare(
    scenario: &Scenario,
    policy: &Policy,
    params: &WelfareParams,
) -> Result<WelfareOutcome> {
    params.validate(scenario)?;
    policy.validate(scenario)?;
    let taus = policy.resolve(scenario)?;
    let deltas = deltas_resolved(scenario, &taus, params);
    let worst = identify_worst_off(scenario, params);
    let worst_idx = scenario.group_index(&worst).unwrap_or(0);
    Ok(WelfareOutcome {
        per_group_delta: scenario
            .groups
            .iter()
            .zip(&deltas)
            .map(|(g, d)| (g.id.clone(), *d))
            .collect(),
        institution_utility: utility_resolved(scenario, &taus),
        worst_off_group: worst,
        worst_off_welfare: deltas[worst_idx],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Trajectory {
    pub horizon: u32,
    pub groups: Vec<GroupId>,
    /// `per_group_mean_score[step][i]` is the mean score of `groups[i]`
    /// after `step` decision rounds. Step 0 is the baseline.
    pub per_group_mean_score: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn mean_score(&self, step: usize, group: &str) -> Option<f64> {
        let i = self.groups.iter().position(|g| g == group)?;
        self.per_group_mean_score.get(step).map(|row| row[i])
    }
}

/// Index of the bin whose score is nearest `score`, clamped to the
/// support. Equidistant scores resolve to the lower bin.
fn nearest_bin(group: &GroupProfile, score: f64) -> usize {
    let bins = &group.bins;
    if score <= bins[0].score {
        return 0;
    }
    let last = bins.len() - 1;
    if score >= bins[last].score {
        return last;
    }
    let upper = bins.partition_point(|b| b.score < score);
    let lower = upper - 1;
    if score - bins[lower].score <= bins[upper].score - score {
        lower
    } else {
        upper
    }
}

/// One decision round: accepted mass that succeeds moves up by `c_plus`,
/// accepted mass that fails moves down by `c_minus`; rejected mass stays.
/// Bins keep their scores and positive rates; only masses move.
pub fn drift_step(group: &GroupProfile, masses: &[f64], taus: &[f64], c_plus: f64, c_minus: f64) -> Vec<f64> {
    let mut next = alloc::vec![0.0; masses.len()];
    for (i, ((bin, &m), &tau)) in group.bins.iter().zip(masses).zip(taus).enumerate() {
        let accepted = m * tau;
        next[i] += m - accepted;
        let up = nearest_bin(group, bin.score + c_plus);
        let down = nearest_bin(group, bin.score - c_minus);
        next[up] += accepted * bin.positive_rate;
        next[down] += accepted * (1.0 - bin.positive_rate);
    }
    next
}

fn mean_of(group: &GroupProfile, masses: &[f64]) -> f64 {
    group.bins.iter().zip(masses).map(|(b, m)| b.score * m).sum()
}

/// Per-step mass distributions of every group, `horizon + 1` entries.
pub fn drift_masses(
    scenario: &Scenario,
    policy: &Policy,
    params: &WelfareParams,
    horizon: u32,
) -> Result<Vec<Vec<Vec<f64>>>> {
    params.validate(scenario)?;
    policy.validate(scenario)?;
    let taus = policy.resolve(scenario)?;
    Ok(drift_masses_resolved(scenario, &taus, params, horizon))
}

pub(crate) fn drift_masses_resolved(
    scenario: &Scenario,
    taus: &[Vec<f64>],
    params: &WelfareParams,
    horizon: u32,
) -> Vec<Vec<Vec<f64>>> {
    let mut current: Vec<Vec<f64>> = scenario
        .groups
        .iter()
        .map(|g| g.bins.iter().map(|b| b.mass).collect())
        .collect();
    let mut steps = Vec::with_capacity(horizon as usize + 1);
    steps.push(current.clone());
    for _ in 0..horizon {
        current = scenario
            .groups
            .iter()
            .zip(&current)
            .zip(taus)
            .map(|((g, m), t)| drift_step(g, m, t, params.c_plus, params.c_minus))
            .collect();
        steps.push(current.clone());
    }
    steps
}

/// Mean-score change of every group after `horizon` rounds.
pub(crate) fn drift_deltas_resolved(
    scenario: &Scenario,
    taus: &[Vec<f64>],
    params: &WelfareParams,
    horizon: u32,
) -> Vec<f64> {
    let steps = drift_masses_resolved(scenario, taus, params, horizon);
    let last = steps.last().expect("at least the baseline step");
    scenario
        .groups
        .iter()
        .zip(last)
        .map(|(g, m)| mean_of(g, m) - g.mean_score())
        .collect()
}

pub fn long_run_drift(
    scenario: &Scenario,
    policy: &Policy,
    params: &WelfareParams,
    horizon: u32,
) -> Result<Trajectory> {
    let steps = drift_masses(scenario, policy, params, horizon)?;
    Ok(Trajectory {
        horizon,
        groups: scenario.groups.iter().map(|g| g.id.clone()).collect(),
        per_group_mean_score: steps
            .iter()
            .map(|masses| {
                scenario
                    .groups
                    .iter()
                    .zip(masses)
                    .map(|(g, m)| mean_of(g, m))
                    .collect()
            })
            .collect(),
    })
}

/// Approved-loan aggregate for one group under one model. Currency is held
/// in integer cents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LedgerEntry {
    pub label: String,
    pub approved_count: u64,
    pub average_amount_cents: i64,
    /// Share of approvals that turn out to be false positives, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub false_positive_share: Option<f64>,
}

impl LedgerEntry {
    pub fn new(label: impl Into<String>, approved_count: u64, average_amount_cents: i64) -> Self {
        LedgerEntry {
            label: label.into(),
            approved_count,
            average_amount_cents,
            false_positive_share: None,
        }
    }

    pub fn total_volume_cents(&self) -> i128 {
        self.approved_count as i128 * self.average_amount_cents as i128
    }
}

/// One group's entries under the baseline and the fairness-aware model,
/// with the volume change the source claims, if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LedgerPair {
    pub group: String,
    pub baseline: LedgerEntry,
    pub fairness_aware: LedgerEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stated_delta_cents: Option<i128>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LedgerRow {
    pub group: String,
    pub baseline_total_cents: i128,
    pub fairness_aware_total_cents: i128,
    pub delta_cents: i128,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stated_delta_cents: Option<i128>,
    /// `Some(false)` flags a stated delta that the counts and averages do
    /// not reproduce.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stated_matches: Option<bool>,
    /// Stated minus computed delta.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discrepancy_cents: Option<i128>,
    /// Expected number of fairness-aware approvals that are false positives.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_false_positives: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LedgerComparison {
    pub rows: Vec<LedgerRow>,
    pub total_delta_cents: i128,
    pub discrepancies: usize,
}

pub fn ledger(pairs: &[LedgerPair]) -> LedgerComparison {
    let rows: Vec<LedgerRow> = pairs
        .iter()
        .map(|p| {
            let base = p.baseline.total_volume_cents();
            let fair = p.fairness_aware.total_volume_cents();
            let delta = fair - base;
            LedgerRow {
                group: p.group.clone(),
                baseline_total_cents: base,
                fairness_aware_total_cents: fair,
                delta_cents: delta,
                stated_delta_cents: p.stated_delta_cents,
                stated_matches: p.stated_delta_cents.map(|s| s == delta),
                discrepancy_cents: p.stated_delta_cents.map(|s| s - delta),
                expected_false_positives: p
                    .fairness_aware
                    .false_positive_share
                    .map(|share| share * p.fairness_aware.approved_count as f64),
            }
        })
        .collect();
    LedgerComparison {
        total_delta_cents: rows.iter().map(|r| r.delta_cents).sum(),
        discrepancies: rows.iter().filter(|r| r.stated_matches == Some(false)).count(),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::fixtures::*;
    use crate::scenario::AcceptanceRule;
    use alloc::vec;

    fn weights(w_tp: f64, w_fp: f64, w_fn: f64, w_tn: f64) -> WelfareParams {
        WelfareParams::new(OutcomeWeights::new(w_tp, w_fp, w_fn, w_tn))
    }

    #[test]
    fn reject_all_without_rejection_weights_is_zero() {
        let s = two_group();
        let out = one_step_welfare(&s, &Policy::reject_all(&s), &weights(1.0, -3.0, 0.0, 0.0)).unwrap();
        assert!(out.per_group_delta.values().all(|&d| d == 0.0));
    }

    #[test]
    fn all_positive_accept_all_is_w_tp() {
        let s = scenario(vec![
            group("A", 0.5, &[(0.0, 0.3, 1.0), (1.0, 0.7, 1.0)]),
            group("B", 0.5, &[(0.0, 1.0, 1.0)]),
        ]);
        let out = one_step_welfare(&s, &Policy::accept_all(&s), &weights(1.0, -5.0, 2.0, 7.0)).unwrap();
        for d in out.per_group_delta.values() {
            assert!((d - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn worked_single_group_delta() {
        let s = scenario(vec![group("A", 1.0, &[(0.2, 0.5, 0.2), (0.8, 0.5, 0.9)])]);
        let out = one_step_welfare(&s, &Policy::common_threshold(&s, 0.5), &weights(1.0, -2.0, 0.0, 0.0))
            .unwrap();
        assert!((out.per_group_delta["A"] - 0.35).abs() < 1e-12);
        assert_eq!(out.worst_off_group, "A");
        assert_eq!(out.worst_off_welfare, out.per_group_delta["A"]);
    }

    #[test]
    fn horizon_zero_is_baseline() {
        let s = two_group();
        let mut p = weights(1.0, -1.0, 0.0, 0.0);
        p.c_plus = 0.6;
        p.c_minus = 0.6;
        let t = long_run_drift(&s, &Policy::accept_all(&s), &p, 0).unwrap();
        assert_eq!(t.per_group_mean_score.len(), 1);
        assert_eq!(t.mean_score(0, "A").unwrap(), s.groups[0].mean_score());
    }

    #[test]
    fn zero_drift_is_constant() {
        let s = two_group();
        let t = long_run_drift(&s, &Policy::accept_all(&s), &weights(1.0, -1.0, 0.0, 0.0), 4).unwrap();
        assert_eq!(t.per_group_mean_score.len(), 5);
        for row in &t.per_group_mean_score {
            assert_eq!(row, &t.per_group_mean_score[0]);
        }
    }

    #[test]
    fn drift_clamps_at_support_ends() {
        let g = group("A", 1.0, &[(0.0, 0.5, 1.0), (1.0, 0.5, 0.0)]);
        // top bin fails and moves down, bottom bin succeeds and moves up
        let next = drift_step(&g, &[0.5, 0.5], &[1.0, 1.0], 5.0, 5.0);
        assert_eq!(next, vec![0.5, 0.5]);
        let next = drift_step(&g, &[0.5, 0.5], &[1.0, 0.0], 1.0, 1.0);
        assert_eq!(next, vec![0.0, 1.0]);
    }

    #[test]
    fn nearest_bin_tie_goes_down() {
        let g = group("A", 1.0, &[(0.0, 0.5, 0.5), (1.0, 0.5, 0.5)]);
        assert_eq!(nearest_bin(&g, 0.5), 0);
        assert_eq!(nearest_bin(&g, 0.51), 1);
        assert_eq!(nearest_bin(&g, -3.0), 0);
        assert_eq!(nearest_bin(&g, 9.0), 1);
    }

    #[test]
    fn horizon_one_matches_one_step_score_analogue() {
        // evenly spaced bins, moves of exactly one bin, no clamping: the
        // mean-score change equals one-step welfare with wTP = cPlus,
        // wFP = -cMinus.
        let g = group(
            "A",
            1.0,
            &[(0.0, 0.0, 0.5), (1.0, 0.3, 0.2), (2.0, 0.4, 0.6), (3.0, 0.3, 0.9), (4.0, 0.0, 0.5)],
        );
        let s = scenario(vec![g]);
        let policy = Policy::uniform(&s, AcceptanceRule::AcceptVector(vec![0.0, 0.2, 0.7, 1.0, 0.0]));
        let mut params = weights(1.0, -1.0, 0.0, 0.0);
        params.c_plus = 1.0;
        params.c_minus = 1.0;
        let t = long_run_drift(&s, &policy, &params, 1).unwrap();
        let change = t.mean_score(1, "A").unwrap() - t.mean_score(0, "A").unwrap();
        let analogue = one_step_welfare(&s, &policy, &params).unwrap();
        assert!((change - analogue.per_group_delta["A"]).abs() < 1e-12);
    }

    #[test]
    fn ledger_identical_models_have_zero_delta() {
        let e = LedgerEntry::new("x", 10, 12_345);
        let cmp = ledger(&[LedgerPair {
            group: "g".into(),
            baseline: e.clone(),
            fairness_aware: e,
            stated_delta_cents: Some(0),
        }]);
        assert_eq!(cmp.rows[0].delta_cents, 0);
        assert_eq!(cmp.rows[0].stated_matches, Some(true));
        assert_eq!(cmp.total_delta_cents, 0);
        assert_eq!(cmp.discrepancies, 0);
    }

    #[test]
    fn ledger_loan_case_totals() {
        let biased = LedgerEntry::new("biased", 4722, 258_280_00);
        let fair = LedgerEntry::new("fairness-aware", 12_494, 163_820_00);
        assert_eq!(biased.total_volume_cents(), 1_219_598_160_00);
        assert_eq!(fair.total_volume_cents(), 2_046_767_080_00);
        let cmp = ledger(&[LedgerPair {
            group: "black applicants".into(),
            baseline: biased,
            fairness_aware: fair,
            stated_delta_cents: Some(1_273_000_000_00),
        }]);
        let row = &cmp.rows[0];
        assert_eq!(row.delta_cents, 827_168_920_00);
        assert_eq!(row.stated_matches, Some(false));
        assert_eq!(row.discrepancy_cents, Some(1_273_000_000_00 - 827_168_920_00));
        assert_eq!(cmp.discrepancies, 1);
    }
}
