//! Populations, score distributions and acceptance policies.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::PROBABILITY_TOLERANCE;

pub type GroupId = String;

/// One point of a group's discrete score distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScoreBin {
    pub score: f64,
    /// Probability that a member of the group falls in this bin.
    pub mass: f64,
    /// Probability that a member of this bin is a true positive.
    pub positive_rate: f64,
    /// Legitimate-condition stratum used by conditional demographic parity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stratum: Option<String>,
}

impl ScoreBin {
    pub fn new(score: f64, mass: f64, positive_rate: f64) -> Self {
        ScoreBin {
            score,
            mass,
            positive_rate,
            stratum: None,
        }
    }

    pub fn in_stratum(mut self, stratum: impl Into<String>) -> Self {
        self.stratum = Some(stratum.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GroupProfile {
    pub id: GroupId,
    #[serde(default)]
    pub label: String,
    /// Fraction of the population in this group.
    pub share: f64,
    /// Marks a low socio-economic status group.
    #[serde(default)]
    pub ses_tag: bool,
    pub bins: Vec<ScoreBin>,
}

impl GroupProfile {
    /// Probability that a member of this group is a true positive.
    pub fn base_rate(&self) -> f64 {
        self.bins.iter().map(|b| b.mass * b.positive_rate).sum()
    }

    pub fn mean_score(&self) -> f64 {
        self.bins.iter().map(|b| b.mass * b.score).sum()
    }

    pub fn min_score(&self) -> Option<f64> {
        self.bins.first().map(|b| b.score)
    }

    pub fn max_score(&self) -> Option<f64> {
        self.bins.last().map(|b| b.score)
    }

    fn validate(&self) -> Result<()> {
        if self.bins.is_empty() {
            return Err(Error::validation(
                "non-empty bins",
                format!("group `{}` has no bins", self.id),
            ));
        }
        if !(self.share > 0.0 && self.share <= 1.0) {
            return Err(Error::validation(
                "share range",
                format!("group `{}` has share {} outside (0, 1]", self.id, self.share),
            ));
        }
        for (i, bin) in self.bins.iter().enumerate() {
            if !bin.score.is_finite() {
                return Err(Error::validation(
                    "finite score",
                    format!("group `{}` bin {} has a non-finite score", self.id, i),
                ));
            }
            if !(0.0..=1.0).contains(&bin.mass) {
                return Err(Error::validation(
                    "mass range",
                    format!("group `{}` bin {} has mass {}", self.id, i, bin.mass),
                ));
            }
            if !(0.0..=1.0).contains(&bin.positive_rate) {
                return Err(Error::validation(
                    "positive rate range",
                    format!(
                        "group `{}` bin {} has positive rate {}",
                        self.id, i, bin.positive_rate
                    ),
                ));
            }
        }
        for (i, pair) in self.bins.windows(2).enumerate() {
            if pair[1].score <= pair[0].score {
                return Err(Error::validation(
                    "ascending scores",
                    format!(
                        "group `{}` bin {} score {} does not exceed the previous score {}",
                        self.id,
                        i + 1,
                        pair[1].score,
                        pair[0].score
                    ),
                ));
            }
        }
        let sum: f64 = self.bins.iter().map(|b| b.mass).sum();
        if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(Error::validation(
                "mass sum",
                format!("group `{}` bin masses sum to {}", self.id, sum),
            ));
        }
        Ok(())
    }
}

/// How one group is decided: a score threshold or per-bin acceptance
/// probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum AcceptanceRule {
    /// Accept iff `score >= threshold`.
    Threshold(f64),
    /// Acceptance probability per bin, in bin order.
    AcceptVector(Vec<f64>),
}

impl AcceptanceRule {
    /// Threshold at the lowest score of `group`.
    pub fn accept_all(group: &GroupProfile) -> Self {
        AcceptanceRule::Threshold(group.min_score().unwrap_or(0.0))
    }

    /// Threshold one unit above the highest score of `group`.
    pub fn reject_all(group: &GroupProfile) -> Self {
        AcceptanceRule::Threshold(group.max_score().unwrap_or(0.0) + 1.0)
    }

    /// Per-bin acceptance probabilities of this rule for `group`.
    pub fn resolve(&self, group: &GroupProfile) -> Result<Vec<f64>> {
        match self {
            AcceptanceRule::Threshold(t) => {
                if t.is_nan() {
                    return Err(Error::validation(
                        "threshold",
                        format!("group `{}` has a NaN threshold", group.id),
                    ));
                }
                Ok(group
                    .bins
                    .iter()
                    .map(|b| if b.score >= *t { 1.0 } else { 0.0 })
                    .collect())
            }
            AcceptanceRule::AcceptVector(taus) => {
                if taus.len() != group.bins.len() {
                    return Err(Error::validation(
                        "accept vector length",
                        format!(
                            "group `{}` has {} bins but the accept vector has {} entries",
                            group.id,
                            group.bins.len(),
                            taus.len()
                        ),
                    ));
                }
                check_taus(&group.id, taus)?;
                Ok(taus.clone())
            }
        }
    }

    fn write_encoding(&self, out: &mut String) {
        match self {
            AcceptanceRule::Threshold(t) => {
                let _ = write!(out, "t:{}", t);
            }
            AcceptanceRule::AcceptVector(taus) => {
                out.push_str("v:");
                for (i, tau) in taus.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    let _ = write!(out, "{}", tau);
                }
            }
        }
    }
}

fn check_taus(group: &str, taus: &[f64]) -> Result<()> {
    if let Some((i, tau)) = taus
        .iter()
        .enumerate()
        .find(|(_, t)| !(0.0..=1.0).contains(*t))
    {
        return Err(Error::validation(
            "acceptance probability range",
            format!("group `{}` bin {} has acceptance probability {}", group, i, tau),
        ));
    }
    Ok(())
}

/// One acceptance rule per group.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Policy {
    pub per_group: BTreeMap<GroupId, AcceptanceRule>,
}

impl Policy {
    pub fn uniform(scenario: &Scenario, rule: AcceptanceRule) -> Self {
        Policy {
            per_group: scenario
                .groups
                .iter()
                .map(|g| (g.id.clone(), rule.clone()))
                .collect(),
        }
    }

    pub fn common_threshold(scenario: &Scenario, threshold: f64) -> Self {
        Self::uniform(scenario, AcceptanceRule::Threshold(threshold))
    }

    pub fn accept_all(scenario: &Scenario) -> Self {
        Policy {
            per_group: scenario
                .groups
                .iter()
                .map(|g| (g.id.clone(), AcceptanceRule::accept_all(g)))
                .collect(),
        }
    }

    pub fn reject_all(scenario: &Scenario) -> Self {
        Policy {
            per_group: scenario
                .groups
                .iter()
                .map(|g| (g.id.clone(), AcceptanceRule::reject_all(g)))
                .collect(),
        }
    }

    pub fn with_rule(mut self, group: impl Into<GroupId>, rule: AcceptanceRule) -> Self {
        self.per_group.insert(group.into(), rule);
        self
    }

    /// Stable textual encoding, used as the policy id and for deterministic
    /// ordering and tie-breaks.
    pub fn encoding(&self) -> String {
        let mut out = String::new();
        for (i, (group, rule)) in self.per_group.iter().enumerate() {
            if i > 0 {
                out.push('|');
            }
            out.push_str(group);
            out.push('=');
            rule.write_encoding(&mut out);
        }
        out
    }

    /// Acceptance probabilities per bin for every group, in scenario group
    /// order. Fails if a group lacks a rule or a rule is malformed.
    pub fn resolve(&self, scenario: &Scenario) -> Result<Vec<Vec<f64>>> {
        scenario
            .groups
            .iter()
            .map(|g| {
                self.per_group
                    .get(&g.id)
                    .ok_or_else(|| {
                        Error::validation(
                            "policy coverage",
                            format!("policy has no rule for group `{}`", g.id),
                        )
                    })?
                    .resolve(g)
            })
            .collect()
    }

    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        self.resolve(scenario)?;
        if let Some(extra) = self
            .per_group
            .keys()
            .find(|id| scenario.group(id).is_none())
        {
            return Err(Error::validation(
                "policy coverage",
                format!("policy names unknown group `{}`", extra),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextClass {
    /// Decisions govern access to offices and positions in society.
    Opportunity,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityParams {
    /// Institution gain per true positive.
    #[serde(rename = "gainTP")]
    pub gain_tp: f64,
    /// Institution loss per false positive, non-negative.
    #[serde(rename = "lossFP")]
    pub loss_fp: f64,
}

/// Welfare units a decision subject receives for each decision outcome.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeWeights {
    #[serde(rename = "wTP")]
    pub w_tp: f64,
    #[serde(rename = "wFP")]
    pub w_fp: f64,
    #[serde(rename = "wFN")]
    pub w_fn: f64,
    #[serde(rename = "wTN")]
    pub w_tn: f64,
}

impl OutcomeWeights {
    pub fn new(w_tp: f64, w_fp: f64, w_fn: f64, w_tn: f64) -> Self {
        OutcomeWeights {
            w_tp,
            w_fp,
            w_fn,
            w_tn,
        }
    }

    fn is_finite(&self) -> bool {
        self.w_tp.is_finite() && self.w_fp.is_finite() && self.w_fn.is_finite() && self.w_tn.is_finite()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        OutcomeWeights::new(f(self.w_tp), f(self.w_fp), f(self.w_fn), f(self.w_tn))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct WelfareParams {
    /// Weights applied to every group without an override.
    #[serde(default)]
    pub global: OutcomeWeights,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_group: BTreeMap<GroupId, OutcomeWeights>,
    /// Score gain of an accepted true positive per step.
    #[serde(default)]
    pub c_plus: f64,
    /// Score loss of an accepted false positive per step.
    #[serde(default)]
    pub c_minus: f64,
    /// Baseline welfare per group. When absent, mean score is the proxy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BTreeMap<GroupId, f64>>,
    /// Treat `sesTag` groups as the worst-off candidates regardless of
    /// baseline.
    #[serde(default)]
    pub ses_override: bool,
}

impl WelfareParams {
    pub fn new(global: OutcomeWeights) -> Self {
        WelfareParams {
            global,
            ..Default::default()
        }
    }

    pub fn weights_for(&self, group: &str) -> &OutcomeWeights {
        self.per_group.get(group).unwrap_or(&self.global)
    }

    /// Applies `f` to every outcome weight, global and per group.
    pub fn map_weights(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        out.global = self.global.map(&f);
        for w in out.per_group.values_mut() {
            *w = w.map(&f);
        }
        out
    }

    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        if !self.global.is_finite() || self.per_group.values().any(|w| !w.is_finite()) {
            return Err(Error::validation("finite welfare weights", "non-finite weight"));
        }
        if !self.c_plus.is_finite() || !self.c_minus.is_finite() || self.c_minus < 0.0 {
            return Err(Error::validation(
                "drift parameters",
                format!("cPlus {} / cMinus {} (cMinus must be >= 0)", self.c_plus, self.c_minus),
            ));
        }
        let known = |id: &GroupId| scenario.group(id).is_some();
        if let Some(id) = self.per_group.keys().find(|id| !known(id)) {
            return Err(Error::validation(
                "welfare group",
                format!("welfare weights name unknown group `{}`", id),
            ));
        }
        if let Some(baseline) = &self.baseline {
            if let Some(g) = scenario.groups.iter().find(|g| !baseline.contains_key(&g.id)) {
                return Err(Error::validation(
                    "welfare baseline",
                    format!("baseline welfare missing for group `{}`", g.id),
                ));
            }
            if baseline.values().any(|v| !v.is_finite()) {
                return Err(Error::validation("welfare baseline", "non-finite baseline"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub context_class: ContextClass,
    pub utility_params: UtilityParams,
    #[serde(default)]
    pub welfare_params: WelfareParams,
    pub groups: Vec<GroupProfile>,
    /// Named candidate policies shipped with the scenario.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub policies: BTreeMap<String, Policy>,
}

impl Scenario {
    pub fn group(&self, id: &str) -> Option<&GroupProfile> {
        self.groups.iter().find(|g| g.id == id)
    }

    pub fn group_index(&self, id: &str) -> Option<usize> {
        self.groups.iter().position(|g| g.id == id)
    }

    /// Share-weighted probability of a true positive.
    pub fn base_rate(&self) -> f64 {
        self.groups.iter().map(|g| g.share * g.base_rate()).sum()
    }

    /// True when every bin carries a stratum tag.
    pub fn has_strata(&self) -> bool {
        self.groups
            .iter()
            .flat_map(|g| g.bins.iter())
            .all(|b| b.stratum.is_some())
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::validation("at least one group", "scenario has no groups"));
        }
        for (i, g) in self.groups.iter().enumerate() {
            if self.groups[..i].iter().any(|h| h.id == g.id) {
                return Err(Error::validation(
                    "unique group ids",
                    format!("group `{}` is declared twice", g.id),
                ));
            }
            g.validate()?;
        }
        let shares: f64 = self.groups.iter().map(|g| g.share).sum();
        if (shares - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(Error::validation(
                "share sum",
                format!("group shares sum to {}", shares),
            ));
        }
        let bins = self.groups.iter().flat_map(|g| g.bins.iter());
        let tagged = bins.clone().filter(|b| b.stratum.is_some()).count();
        if tagged != 0 && tagged != bins.count() {
            return Err(Error::validation(
                "stratum tags",
                "either every bin or no bin carries a stratum",
            ));
        }
        let u = &self.utility_params;
        if !u.gain_tp.is_finite() || !u.loss_fp.is_finite() || u.loss_fp < 0.0 {
            return Err(Error::validation(
                "utility parameters",
                format!("gainTP {} / lossFP {} (lossFP must be >= 0)", u.gain_tp, u.loss_fp),
            ));
        }
        self.welfare_params.validate(self)?;
        for (name, policy) in &self.policies {
            policy.validate(self).map_err(|e| match e {
                Error::Validation { invariant, detail } => Error::Validation {
                    invariant,
                    detail: format!("policy `{}`: {}", name, detail),
                },
                other => other,
            })?;
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use alloc::vec;

    pub fn group(id: &str, share: f64, bins: &[(f64, f64, f64)]) -> GroupProfile {
        GroupProfile {
            id: id.into(),
            label: id.into(),
            share,
            ses_tag: false,
            bins: bins
                .iter()
                .map(|&(s, m, r)| ScoreBin::new(s, m, r))
                .collect(),
        }
    }

    pub fn scenario(groups: Vec<GroupProfile>) -> Scenario {
        Scenario {
            id: "test".into(),
            context_class: ContextClass::General,
            utility_params: UtilityParams {
                gain_tp: 1.0,
                loss_fp: 1.0,
            },
            welfare_params: WelfareParams::new(OutcomeWeights::new(1.0, -1.0, 0.0, 0.0)),
            groups,
            policies: BTreeMap::new(),
        }
    }

    /// Group A of the worked confusion example, and group B sharing its masses.
    pub fn two_group() -> Scenario {
        scenario(vec![
            group("A", 0.5, &[(0.2, 0.5, 0.2), (0.8, 0.5, 0.9)]),
            group("B", 0.5, &[(0.2, 0.5, 0.1), (0.8, 0.5, 0.5)]),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use alloc::vec;

    #[test]
    fn valid_scenario_passes() {
        two_group().validate().unwrap();
    }

    #[test]
    fn mass_sum_violation_is_named() {
        let mut s = two_group();
        s.groups[0].bins[0].mass = 0.4;
        match s.validate() {
            Err(Error::Validation { invariant, .. }) => assert_eq!(invariant, "mass sum"),
            other => panic!("unexpected {:?}", other),
        }
    }

    #[test]
    fn share_sum_violation_is_named() {
        let mut s = two_group();
        s.groups[1].share = 0.4;
        let err = s.validate().unwrap_err();
        assert!(matches!(err, Error::Validation { invariant: "share sum", .. }));
    }

    #[test]
    fn descending_scores_rejected() {
        let s = scenario(vec![group("A", 1.0, &[(0.8, 0.5, 0.2), (0.2, 0.5, 0.9)])]);
        assert!(matches!(
            s.validate(),
            Err(Error::Validation { invariant: "ascending scores", .. })
        ));
    }

    #[test]
    fn tau_out_of_range_rejected() {
        let s = two_group();
        let p = Policy::common_threshold(&s, 0.5)
            .with_rule("A", AcceptanceRule::AcceptVector(vec![0.0, 1.2]));
        assert!(matches!(
            p.validate(&s),
            Err(Error::Validation { invariant: "acceptance probability range", .. })
        ));
    }

    #[test]
    fn named_policies_are_validated() {
        let mut s = two_group();
        let bad = Policy::common_threshold(&s, 0.5)
            .with_rule("B", AcceptanceRule::AcceptVector(vec![1.2, 0.0]));
        s.policies.insert("bad".into(), bad);
        let err = s.validate().unwrap_err();
        assert!(matches!(err, Error::Validation { invariant: "acceptance probability range", .. }));
        assert!(alloc::string::ToString::to_string(&err).contains("policy `bad`"));
    }

    #[test]
    fn missing_rule_rejected() {
        let s = two_group();
        let mut p = Policy::common_threshold(&s, 0.5);
        p.per_group.remove("B");
        assert!(matches!(
            p.validate(&s),
            Err(Error::Validation { invariant: "policy coverage", .. })
        ));
    }

    #[test]
    fn threshold_is_closed_on_the_left() {
        let s = two_group();
        let taus = AcceptanceRule::Threshold(0.8).resolve(&s.groups[0]).unwrap();
        assert_eq!(taus, vec![0.0, 1.0]);
    }

    #[test]
    fn partial_strata_rejected() {
        let mut s = two_group();
        s.groups[0].bins[0].stratum = Some("x".into());
        assert!(matches!(
            s.validate(),
            Err(Error::Validation { invariant: "stratum tags", .. })
        ));
    }

    #[test]
    fn encoding_is_stable() {
        let s = two_group();
        let p = Policy::common_threshold(&s, 0.5)
            .with_rule("B", AcceptanceRule::AcceptVector(vec![0.0, 0.25]));
        assert_eq!(p.encoding(), "A=t:0.5|B=v:0,0.25");
    }
}
