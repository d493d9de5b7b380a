//! Per-group confusion statistics, the disparity catalog, accuracy and
//! institution utility.
//!
//! Pairwise disparities are the worst pair: `max_g s(g) - min_g s(g)`.
//! Empty denominators resolve to 0 (TPR of a group without positives, PPV of
//! a group with no accepts).

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{AcceptanceRule, GroupId, GroupProfile, Policy, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    DemographicParity,
    ConditionalDemographicParity,
    EqualOpportunity,
    PredictiveEquality,
    EqualizedOdds,
    PredictiveParity,
    MinmaxError,
}

impl MetricId {
    /// Every metric, in catalog order.
    pub const CATALOG: [MetricId; 7] = [
        MetricId::DemographicParity,
        MetricId::ConditionalDemographicParity,
        MetricId::EqualOpportunity,
        MetricId::PredictiveEquality,
        MetricId::EqualizedOdds,
        MetricId::PredictiveParity,
        MetricId::MinmaxError,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::DemographicParity => "demographic_parity",
            MetricId::ConditionalDemographicParity => "conditional_demographic_parity",
            MetricId::EqualOpportunity => "equal_opportunity",
            MetricId::PredictiveEquality => "predictive_equality",
            MetricId::EqualizedOdds => "equalized_odds",
            MetricId::PredictiveParity => "predictive_parity",
            MetricId::MinmaxError => "minmax_error",
        }
    }

    pub fn catalog_index(self) -> usize {
        self as usize
    }

    /// Parity metrics compare groups; `minmax_error` is an absolute level.
    pub fn is_pairwise(self) -> bool {
        self != MetricId::MinmaxError
    }

    /// Demographic parity and its conditional variant.
    pub fn is_parity_based(self) -> bool {
        matches!(
            self,
            MetricId::DemographicParity | MetricId::ConditionalDemographicParity
        )
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricId::CATALOG
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Configuration(alloc::format!("unknown metric `{}`", s)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConfusionStats {
    pub acceptance_rate: f64,
    pub true_positive_rate: f64,
    pub false_positive_rate: f64,
    pub false_negative_rate: f64,
    pub positive_predictive_value: f64,
    pub error_rate: f64,
    /// Share-weighted acceptance rate: this group's accepts per population
    /// member.
    pub expected_accepts: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Confusion statistics of `group` under per-bin acceptance probabilities.
pub(crate) fn confusion_resolved(group: &GroupProfile, taus: &[f64]) -> ConfusionStats {
    let mut accept = 0.0;
    let mut positives = 0.0;
    let mut negatives = 0.0;
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut fn_ = 0.0;
    let mut errors = 0.0;
    for (bin, &tau) in group.bins.iter().zip(taus) {
        let m = bin.mass;
        let r = bin.positive_rate;
        accept += m * tau;
        positives += m * r;
        negatives += m * (1.0 - r);
        tp += m * r * tau;
        fp += m * (1.0 - r) * tau;
        fn_ += m * r * (1.0 - tau);
        errors += m * (tau * (1.0 - r) + (1.0 - tau) * r);
    }
    ConfusionStats {
        acceptance_rate: accept,
        true_positive_rate: ratio(tp, positives),
        false_positive_rate: ratio(fp, negatives),
        false_negative_rate: ratio(fn_, positives),
        positive_predictive_value: ratio(tp, accept),
        error_rate: errors,
        expected_accepts: group.share * accept,
    }
}

pub fn confusion(group: &GroupProfile, rule: &AcceptanceRule) -> Result<ConfusionStats> {
    Ok(confusion_resolved(group, &rule.resolve(group)?))
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

/// Largest within-stratum acceptance-rate gap. Groups with no mass in a
/// stratum do not take part in that stratum's comparison.
fn conditional_parity(scenario: &Scenario, taus: &[Vec<f64>]) -> Result<f64> {
    if !scenario.has_strata() {
        return Err(Error::Configuration(
            "conditional_demographic_parity needs every bin tagged with a stratum".to_string(),
        ));
    }
    let mut strata: Vec<&str> = scenario
        .groups
        .iter()
        .flat_map(|g| g.bins.iter().filter_map(|b| b.stratum.as_deref()))
        .collect();
    strata.sort_unstable();
    strata.dedup();
    let mut worst: f64 = 0.0;
    for stratum in strata {
        let rates = scenario.groups.iter().zip(taus).filter_map(|(g, t)| {
            let (mass, accepted) = g
                .bins
                .iter()
                .zip(t)
                .filter(|(b, _)| b.stratum.as_deref() == Some(stratum))
                .fold((0.0, 0.0), |(m, a), (b, &tau)| (m + b.mass, a + b.mass * tau));
            (mass > 0.0).then(|| accepted / mass)
        });
        worst = worst.max(spread(rates));
    }
    Ok(worst)
}

/// Disparity of `metric` from precomputed per-group statistics.
pub(crate) fn disparity_resolved(
    metric: MetricId,
    scenario: &Scenario,
    taus: &[Vec<f64>],
    stats: &[ConfusionStats],
) -> Result<f64> {
    let pairwise = |f: fn(&ConfusionStats) -> f64| spread(stats.iter().map(f));
    Ok(match metric {
        MetricId::DemographicParity => pairwise(|s| s.acceptance_rate),
        MetricId::ConditionalDemographicParity => conditional_parity(scenario, taus)?,
        MetricId::EqualOpportunity => pairwise(|s| s.true_positive_rate),
        MetricId::PredictiveEquality => pairwise(|s| s.false_positive_rate),
        MetricId::EqualizedOdds => {
            pairwise(|s| s.true_positive_rate).max(pairwise(|s| s.false_positive_rate))
        }
        MetricId::PredictiveParity => pairwise(|s| s.positive_predictive_value),
        MetricId::MinmaxError => stats.iter().map(|s| s.error_rate).fold(0.0, f64::max),
    })
}

pub(crate) fn stats_resolved(scenario: &Scenario, taus: &[Vec<f64>]) -> Vec<ConfusionStats> {
    scenario
        .groups
        .iter()
        .zip(taus)
        .map(|(g, t)| confusion_resolved(g, t))
        .collect()
}

pub fn disparity(metric: MetricId, scenario: &Scenario, policy: &Policy) -> Result<f64> {
    let taus = policy.resolve(scenario)?;
    let stats = stats_resolved(scenario, &taus);
    disparity_resolved(metric, scenario, &taus, &stats)
}

pub(crate) fn utility_resolved(scenario: &Scenario, taus: &[Vec<f64>]) -> f64 {
    let u = &scenario.utility_params;
    scenario
        .groups
        .iter()
        .zip(taus)
        .map(|(g, t)| {
            let per_member: f64 = g
                .bins
                .iter()
                .zip(t)
                .map(|(b, &tau)| {
                    let r = b.positive_rate;
                    b.mass * tau * (r * u.gain_tp - (1.0 - r) * u.loss_fp)
                })
                .sum();
            g.share * per_member
        })
        .sum()
}

/// Expected institution utility per population member.
pub fn utility(scenario: &Scenario, policy: &Policy) -> Result<f64> {
    Ok(utility_resolved(scenario, &policy.resolve(scenario)?))
}

pub(crate) fn accuracy_resolved(scenario: &Scenario, stats: &[ConfusionStats]) -> f64 {
    1.0 - scenario
        .groups
        .iter()
        .zip(stats)
        .map(|(g, s)| g.share * s.error_rate)
        .sum::<f64>()
}

pub fn accuracy(scenario: &Scenario, policy: &Policy) -> Result<f64> {
    let taus = policy.resolve(scenario)?;
    Ok(accuracy_resolved(scenario, &stats_resolved(scenario, &taus)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FairnessReport {
    pub per_group: BTreeMap<GroupId, ConfusionStats>,
    /// Every catalog metric. Without stratum tags the conditional variant
    /// is computed over a single stratum and equals demographic parity.
    pub disparities: BTreeMap<MetricId, f64>,
    pub strata_declared: bool,
    pub accuracy: f64,
    pub utility: f64,
}

/// Full report for one policy.
pub fn evaluate(scenario: &Scenario, policy: &Policy) -> Result<FairnessReport> {
    policy.validate(scenario)?;
    let taus = policy.resolve(scenario)?;
    let stats = stats_resolved(scenario, &taus);
    let strata_declared = scenario.has_strata();
    let mut disparities = BTreeMap::new();
    for metric in MetricId::CATALOG {
        let value = if metric == MetricId::ConditionalDemographicParity && !strata_declared {
            disparity_resolved(MetricId::DemographicParity, scenario, &taus, &stats)?
        } else {
            disparity_resolved(metric, scenario, &taus, &stats)?
        };
        disparities.insert(metric, value);
    }
    Ok(FairnessReport {
        per_group: scenario
            .groups
            .iter()
            .zip(&stats)
            .map(|(g, s)| (g.id.clone(), *s))
            .collect(),
        disparities,
        strata_declared,
        accuracy: accuracy_resolved(scenario, &stats),
        utility: utility_resolved(scenario, &taus),
    })
}

/// Parses a comma-separated metric list such as `demographic_parity,equal_opportunity`.
pub fn parse_metric_list(list: &str) -> Result<Vec<MetricId>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(MetricId::from_str)
        .collect()
}

impl From<MetricId> for String {
    fn from(m: MetricId) -> String {
        m.as_str().to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::fixtures::*;
    use alloc::vec;

    const EPS: f64 = 1e-12;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < EPS
    }

    #[test]
    fn confusion_worked_example() {
        let s = two_group();
        let c = confusion(&s.groups[0], &AcceptanceRule::Threshold(0.5)).unwrap();
        assert!(close(c.acceptance_rate, 0.5));
        // TPR = .45 / .55, FPR = .05 / .45
        assert!(close(c.true_positive_rate, 0.45 / 0.55));
        assert!(close(c.false_positive_rate, 0.05 / 0.45));
        assert!(close(c.true_positive_rate + c.false_negative_rate, 1.0));
        assert!((c.true_positive_rate - 0.8182).abs() < 1e-4);
        assert!((c.false_positive_rate - 0.1111).abs() < 1e-4);
    }

    #[test]
    fn accept_all_and_reject_all_rates() {
        let s = two_group();
        for g in &s.groups {
            let all = confusion(g, &AcceptanceRule::Threshold(0.0)).unwrap();
            assert_eq!(
                (all.acceptance_rate, all.true_positive_rate, all.false_positive_rate),
                (1.0, 1.0, 1.0)
            );
            let none = confusion(g, &AcceptanceRule::Threshold(2.0)).unwrap();
            assert_eq!(
                (none.acceptance_rate, none.true_positive_rate, none.false_positive_rate),
                (0.0, 0.0, 0.0)
            );
            assert_eq!(none.positive_predictive_value, 0.0);
        }
    }

    #[test]
    fn zero_base_rate_uses_zero_convention() {
        let g = group("Z", 1.0, &[(0.0, 0.5, 0.0), (1.0, 0.5, 0.0)]);
        let c = confusion(&g, &AcceptanceRule::Threshold(0.0)).unwrap();
        assert_eq!(c.true_positive_rate, 0.0);
        assert_eq!(c.false_negative_rate, 0.0);
        assert_eq!(c.false_positive_rate, 1.0);
    }

    #[test]
    fn two_group_disparities() {
        let s = two_group();
        let p = Policy::common_threshold(&s, 0.5);
        assert!(close(disparity(MetricId::DemographicParity, &s, &p).unwrap(), 0.0));
        let eo = disparity(MetricId::EqualOpportunity, &s, &p).unwrap();
        // B: TPR = .25 / .30
        assert!(close(eo, (0.25_f64 / 0.30 - 0.45 / 0.55).abs()));
        assert!((eo - 0.0152).abs() < 1e-4);
        let pe = disparity(MetricId::PredictiveEquality, &s, &p).unwrap();
        let odds = disparity(MetricId::EqualizedOdds, &s, &p).unwrap();
        assert!(close(odds, eo.max(pe)));
        // minmax is a level: the larger group error rate (.15 for A, .3 for B)
        let mm = disparity(MetricId::MinmaxError, &s, &p).unwrap();
        assert!(close(mm, 0.5 * 0.1 + 0.5 * 0.5));
    }

    #[test]
    fn conditional_parity_requires_strata() {
        let s = two_group();
        let p = Policy::common_threshold(&s, 0.5);
        assert!(matches!(
            disparity(MetricId::ConditionalDemographicParity, &s, &p),
            Err(Error::Configuration(_))
        ));
    }

    #[test]
    fn conditional_parity_within_strata() {
        let mut s = scenario(vec![
            group("A", 0.5, &[(0.0, 0.2, 0.1), (1.0, 0.3, 0.4), (2.0, 0.5, 0.9)]),
            group("B", 0.5, &[(0.0, 0.6, 0.1), (1.0, 0.2, 0.4), (2.0, 0.2, 0.9)]),
        ]);
        for g in &mut s.groups {
            g.bins[0].stratum = Some("low".into());
            g.bins[1].stratum = Some("high".into());
            g.bins[2].stratum = Some("high".into());
        }
        let p = Policy::common_threshold(&s, 2.0);
        // stratum high: A accepts .5/.8, B accepts .2/.4
        let cdp = disparity(MetricId::ConditionalDemographicParity, &s, &p).unwrap();
        assert!(close(cdp, 0.5 / 0.8 - 0.2 / 0.4));
        let dp = disparity(MetricId::DemographicParity, &s, &p).unwrap();
        assert!(close(dp, 0.3));
    }

    #[test]
    fn utility_worked_example() {
        let mut s = scenario(vec![group("A", 1.0, &[(0.2, 0.5, 0.2), (0.8, 0.5, 0.9)])]);
        s.utility_params.gain_tp = 1.0;
        s.utility_params.loss_fp = 2.0;
        let u = utility(&s, &Policy::common_threshold(&s, 0.5)).unwrap();
        assert!(close(u, 0.35));
        assert_eq!(utility(&s, &Policy::reject_all(&s)).unwrap(), 0.0);
    }

    #[test]
    fn utility_of_accept_all_is_base_rate_when_no_loss() {
        let mut s = two_group();
        s.utility_params.loss_fp = 0.0;
        let u = utility(&s, &Policy::accept_all(&s)).unwrap();
        assert!(close(u, s.base_rate()));
    }

    #[test]
    fn accuracy_worked_examples() {
        let s = scenario(vec![group("A", 1.0, &[(0.2, 0.5, 0.2), (0.8, 0.5, 0.9)])]);
        let a = accuracy(&s, &Policy::common_threshold(&s, 0.5)).unwrap();
        assert!(close(a, 0.85));
        let sep = scenario(vec![group("A", 1.0, &[(0.0, 0.4, 0.0), (1.0, 0.6, 1.0)])]);
        assert_eq!(accuracy(&sep, &Policy::common_threshold(&sep, 1.0)).unwrap(), 1.0);
        let two = two_group();
        let a = accuracy(&two, &Policy::accept_all(&two)).unwrap();
        assert!(close(a, two.base_rate()));
    }

    #[test]
    fn report_contains_whole_catalog() {
        let s = two_group();
        let r = evaluate(&s, &Policy::common_threshold(&s, 0.5)).unwrap();
        assert_eq!(r.disparities.len(), MetricId::CATALOG.len());
        assert!(!r.strata_declared);
        assert_eq!(
            r.disparities[&MetricId::ConditionalDemographicParity],
            r.disparities[&MetricId::DemographicParity]
        );
        let weighted_error: f64 = s
            .groups
            .iter()
            .map(|g| g.share * r.per_group[&g.id].error_rate)
            .sum();
        assert_eq!(r.accuracy + weighted_error, 1.0);
    }

    #[test]
    fn metric_ids_round_trip_as_strings() {
        for m in MetricId::CATALOG {
            assert_eq!(m.as_str().parse::<MetricId>().unwrap(), m);
        }
        assert!("calibration".parse::<MetricId>().is_err());
        assert_eq!(
            parse_metric_list("demographic_parity, predictive_equality").unwrap(),
            vec![MetricId::DemographicParity, MetricId::PredictiveEquality]
        );
    }

    #[test]
    fn single_group_pairwise_is_zero() {
        let s = scenario(vec![group("A", 1.0, &[(0.0, 1.0, 0.5)])]);
        let p = Policy::common_threshold(&s, 0.0);
        assert_eq!(disparity(MetricId::DemographicParity, &s, &p).unwrap(), 0.0);
    }
}
