//! Seeded synthetic scenarios.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{
    ContextClass, GroupProfile, Scenario, ScoreBin, UtilityParams, WelfareParams,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SynthGroup {
    pub id: String,
    #[serde(default)]
    pub label: String,
    pub share: f64,
    pub bins: usize,
    pub score_min: f64,
    pub score_max: f64,
    /// Target probability of a true positive.
    pub base_rate: f64,
    #[serde(default)]
    pub ses_tag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SynthSpec {
    pub id: String,
    pub context_class: ContextClass,
    pub utility_params: UtilityParams,
    #[serde(default)]
    pub welfare_params: WelfareParams,
    pub groups: Vec<SynthGroup>,
}

/// Rescales ascending rates so their mass-weighted mean is `target`,
/// keeping them ascending and inside `[0, 1]`.
fn hit_base_rate(rates: &mut [f64], masses: &[f64], target: f64) {
    let current: f64 = rates.iter().zip(masses).map(|(r, m)| r * m).sum();
    if target <= current {
        let k = if current > 0.0 { target / current } else { 0.0 };
        rates.iter_mut().for_each(|r| *r *= k);
    } else {
        let k = if current < 1.0 { (1.0 - target) / (1.0 - current) } else { 0.0 };
        rates.iter_mut().for_each(|r| *r = 1.0 - (1.0 - *r) * k);
    }
    for r in rates.iter_mut() {
        *r = r.clamp(0.0, 1.0);
    }
}

fn synth_group(spec: &SynthGroup, rng: &mut ChaCha8Rng) -> Result<GroupProfile> {
    if !(0.0..=1.0).contains(&spec.base_rate) {
        return Err(Error::Configuration(format!(
            "group `{}` base-rate target {} is outside [0, 1]",
            spec.id, spec.base_rate
        )));
    }
    if spec.bins == 0 {
        return Err(Error::Configuration(format!("group `{}` needs at least one bin", spec.id)));
    }
    if !(spec.score_min.is_finite() && spec.score_max.is_finite())
        || (spec.bins > 1 && spec.score_max <= spec.score_min)
    {
        return Err(Error::Configuration(format!(
            "group `{}` score range [{}, {}] is empty",
            spec.id, spec.score_min, spec.score_max
        )));
    }
    let n = spec.bins;
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let masses: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let mut rates: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    rates.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    hit_base_rate(&mut rates, &masses, spec.base_rate);
    let step = if n > 1 {
        (spec.score_max - spec.score_min) / (n - 1) as f64
    } else {
        0.0
    };
    Ok(GroupProfile {
        id: spec.id.clone(),
        label: if spec.label.is_empty() { spec.id.clone() } else { spec.label.clone() },
        share: spec.share,
        ses_tag: spec.ses_tag,
        bins: (0..n)
            .map(|i| {
                let score = if i + 1 == n && n > 1 {
                    spec.score_max
                } else {
                    spec.score_min + step * i as f64
                };
                ScoreBin::new(score, masses[i], rates[i])
            })
            .collect(),
    })
}

/// Deterministic in `(spec, seed)`. Masses are drawn uniformly and
/// normalised; positive rates are sorted uniform draws rescaled onto the
/// base-rate target.
pub fn synth_scenario(spec: &SynthSpec, seed: u64) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = spec
        .groups
        .iter()
        .map(|g| synth_group(g, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let scenario = Scenario {
        id: spec.id.clone(),
        context_class: spec.context_class,
        utility_params: spec.utility_params,
        welfare_params: spec.welfare_params.clone(),
        groups,
        policies: BTreeMap::new(),
    };
    scenario.validate()?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn spec(base_rate: f64, bins: usize) -> SynthSpec {
        SynthSpec {
            id: "synth".into(),
            context_class: ContextClass::General,
            utility_params: UtilityParams { gain_tp: 1.0, loss_fp: 1.0 },
            welfare_params: WelfareParams::default(),
            groups: vec![SynthGroup {
                id: "A".into(),
                label: String::new(),
                share: 1.0,
                bins,
                score_min: 300.0,
                score_max: 850.0,
                base_rate,
                ses_tag: false,
            }],
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let s = spec(0.4, 8);
        assert_eq!(synth_scenario(&s, 7).unwrap(), synth_scenario(&s, 7).unwrap());
        assert_ne!(synth_scenario(&s, 7).unwrap(), synth_scenario(&s, 8).unwrap());
    }

    #[test]
    fn base_rate_target_is_met() {
        for seed in 0..50 {
            let sc = synth_scenario(&spec(0.5, 10), seed).unwrap();
            let realized = sc.groups[0].base_rate();
            assert!((0.48..=0.52).contains(&realized), "seed {} gave {}", seed, realized);
        }
    }

    #[test]
    fn extreme_targets() {
        let sc = synth_scenario(&spec(0.0, 4), 1).unwrap();
        assert_eq!(sc.groups[0].base_rate(), 0.0);
        let sc = synth_scenario(&spec(1.0, 4), 1).unwrap();
        assert!((sc.groups[0].base_rate() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_target_rejected() {
        assert!(matches!(synth_scenario(&spec(1.3, 10), 0), Err(Error::Configuration(_))));
        assert!(synth_scenario(&spec(-0.1, 10), 0).is_err());
    }

    #[test]
    fn scores_span_range() {
        let sc = synth_scenario(&spec(0.3, 5), 3).unwrap();
        let g = &sc.groups[0];
        assert_eq!(g.min_score(), Some(300.0));
        assert_eq!(g.max_score(), Some(850.0));
        assert!(g.bins.windows(2).all(|w| w[0].positive_rate <= w[1].positive_rate));
    }
}
