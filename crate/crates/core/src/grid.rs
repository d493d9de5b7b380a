//! Finite policy grids: per-group option lists combined by cartesian
//! product, plus explicit and named policy lists.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{AcceptanceRule, GroupId, Policy, Scenario};

/// Default upper bound on the number of policies a grid may expand to.
pub const DEFAULT_GRID_CAP: u64 = 2_000_000;

/// Default step of the per-bin acceptance-probability grid.
pub const DEFAULT_TAU_STEP: f64 = 0.1;

/// Cooperative cancellation for long grid scans.
pub trait Cancel {
    fn is_cancelled(&self) -> bool;
}

/// Never cancels.
impl Cancel for () {
    fn is_cancelled(&self) -> bool {
        false
    }
}

impl Cancel for AtomicBool {
    fn is_cancelled(&self) -> bool {
        self.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum GridKind {
    /// Per-group thresholds; by default every bin score plus one value
    /// above the top score (reject-all).
    Thresholds,
    /// Per-bin acceptance probabilities `0, step, ..., 1` for every bin.
    AcceptVectors,
    /// The scenario's named policies.
    Named,
    /// Policies listed in the grid itself.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PolicyGrid {
    pub kind: GridKind,
    /// Threshold values per group (`thresholds` kind).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<BTreeMap<GroupId, Vec<f64>>>,
    /// Probability step (`acceptVectors` kind).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    /// Subset of named policies (`named` kind); all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policies: Option<Vec<Policy>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
}

impl Default for PolicyGrid {
    fn default() -> Self {
        PolicyGrid::thresholds()
    }
}

impl PolicyGrid {
    fn of(kind: GridKind) -> Self {
        PolicyGrid {
            kind,
            thresholds: None,
            step: None,
            names: None,
            policies: None,
            cap: None,
        }
    }

    pub fn thresholds() -> Self {
        Self::of(GridKind::Thresholds)
    }

    pub fn threshold_values(values: BTreeMap<GroupId, Vec<f64>>) -> Self {
        PolicyGrid {
            thresholds: Some(values),
            ..Self::of(GridKind::Thresholds)
        }
    }

    pub fn accept_vectors(step: f64) -> Self {
        PolicyGrid {
            step: Some(step),
            ..Self::of(GridKind::AcceptVectors)
        }
    }

    pub fn named() -> Self {
        Self::of(GridKind::Named)
    }

    pub fn explicit(policies: Vec<Policy>) -> Self {
        PolicyGrid {
            policies: Some(policies),
            ..Self::of(GridKind::Explicit)
        }
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = Some(cap);
        self
    }

    pub fn cap(&self) -> u64 {
        self.cap.unwrap_or(DEFAULT_GRID_CAP)
    }

    /// Expands the grid against `scenario`, checking the cap before any
    /// policy is built.
    pub fn expand(&self, scenario: &Scenario) -> Result<ExpandedGrid> {
        let expanded = match self.kind {
            GridKind::Thresholds => ExpandedGrid::Product(self.threshold_options(scenario)?),
            GridKind::AcceptVectors => ExpandedGrid::Product(self.tau_options(scenario)?),
            GridKind::Named => {
                let names: Vec<&String> = match &self.names {
                    Some(names) => names.iter().collect(),
                    None => scenario.policies.keys().collect(),
                };
                let mut list = Vec::with_capacity(names.len());
                for name in names {
                    let policy = scenario.policies.get(name).ok_or_else(|| {
                        Error::Configuration(format!("scenario has no policy named `{}`", name))
                    })?;
                    list.push(policy.clone());
                }
                ExpandedGrid::List(list)
            }
            GridKind::Explicit => ExpandedGrid::List(self.policies.clone().unwrap_or_default()),
        };
        let size = expanded.size();
        if size == 0 {
            return Err(Error::Configuration("policy grid is empty".into()));
        }
        if size > self.cap() as u128 {
            return Err(Error::GridTooLarge {
                size,
                cap: self.cap(),
            });
        }
        if let ExpandedGrid::List(list) = &expanded {
            for p in list {
                p.validate(scenario)?;
            }
        }
        Ok(expanded)
    }

    fn threshold_options(&self, scenario: &Scenario) -> Result<Vec<Vec<GroupOption>>> {
        scenario
            .groups
            .iter()
            .map(|g| {
                let values: Vec<f64> = match self.thresholds.as_ref() {
                    Some(map) => map.get(&g.id).cloned().ok_or_else(|| {
                        Error::Configuration(format!("no thresholds given for group `{}`", g.id))
                    })?,
                    None => {
                        let mut v: Vec<f64> = g.bins.iter().map(|b| b.score).collect();
                        v.push(g.max_score().unwrap_or(0.0) + 1.0);
                        v
                    }
                };
                values
                    .into_iter()
                    .map(|t| {
                        let rule = AcceptanceRule::Threshold(t);
                        let taus = rule.resolve(g)?;
                        Ok(GroupOption { rule, taus })
                    })
                    .collect()
            })
            .collect()
    }

    fn tau_options(&self, scenario: &Scenario) -> Result<Vec<Vec<GroupOption>>> {
        let step = self.step.unwrap_or(DEFAULT_TAU_STEP);
        if !(step > 0.0 && step <= 1.0) {
            return Err(Error::Configuration(format!(
                "acceptance-probability step {} outside (0, 1]",
                step
            )));
        }
        let mut levels = Vec::new();
        let mut k = 0u32;
        loop {
            let tau = k as f64 * step;
            if tau >= 1.0 - 1e-12 {
                levels.push(1.0);
                break;
            }
            levels.push(tau);
            k += 1;
        }
        // Cap check must happen before materialising bins^levels vectors.
        let mut size: u128 = 1;
        for g in &scenario.groups {
            for _ in &g.bins {
                size = size.saturating_mul(levels.len() as u128);
            }
        }
        if size > self.cap() as u128 {
            return Err(Error::GridTooLarge {
                size,
                cap: self.cap(),
            });
        }
        Ok(scenario
            .groups
            .iter()
            .map(|g| {
                let n = g.bins.len();
                let mut out = Vec::new();
                let mut idx = vec![0usize; n];
                loop {
                    let taus: Vec<f64> = idx.iter().map(|&i| levels[i]).collect();
                    out.push(GroupOption {
                        rule: AcceptanceRule::AcceptVector(taus.clone()),
                        taus,
                    });
                    if !advance(&mut idx, |_| levels.len()) {
                        break;
                    }
                }
                out
            })
            .collect())
    }
}

/// Odometer increment, last position fastest. Returns false on wrap-around.
fn advance(idx: &mut [usize], radix: impl Fn(usize) -> usize) -> bool {
    for pos in (0..idx.len()).rev() {
        idx[pos] += 1;
        if idx[pos] < radix(pos) {
            return true;
        }
        idx[pos] = 0;
    }
    false
}

#[derive(Debug, Clone)]
pub struct GroupOption {
    pub rule: AcceptanceRule,
    pub taus: Vec<f64>,
}

/// A grid ready for scanning.
#[derive(Debug, Clone)]
pub enum ExpandedGrid {
    /// Cartesian product of per-group options, in scenario group order.
    Product(Vec<Vec<GroupOption>>),
    List(Vec<Policy>),
}

impl ExpandedGrid {
    pub fn size(&self) -> u128 {
        match self {
            ExpandedGrid::Product(options) => options
                .iter()
                .fold(1u128, |acc, o| acc.saturating_mul(o.len() as u128)),
            ExpandedGrid::List(list) => list.len() as u128,
        }
    }

    /// Visits every policy in deterministic order with its resolved
    /// acceptance probabilities. The policy is built lazily through the
    /// supplied closure so scans that keep few policies stay cheap.
    pub fn for_each(
        &self,
        scenario: &Scenario,
        cancel: &dyn Cancel,
        mut visit: impl FnMut(&dyn Fn() -> Policy, &[Vec<f64>]) -> Result<()>,
    ) -> Result<()> {
        match self {
            ExpandedGrid::Product(options) => {
                let mut idx = vec![0usize; options.len()];
                let mut taus: Vec<Vec<f64>> =
                    options.iter().map(|o| o[0].taus.clone()).collect();
                let mut count: u64 = 0;
                loop {
                    count += 1;
                    if count % 4096 == 0 && cancel.is_cancelled() {
                        return Err(Error::Cancelled);
                    }
                    let build = || Policy {
                        per_group: scenario
                            .groups
                            .iter()
                            .zip(&idx)
                            .zip(options)
                            .map(|((g, &i), o)| (g.id.clone(), o[i].rule.clone()))
                            .collect(),
                    };
                    visit(&build, &taus)?;
                    if !advance(&mut idx, |pos| options[pos].len()) {
                        break;
                    }
                    for (pos, &i) in idx.iter().enumerate() {
                        if taus[pos] != options[pos][i].taus {
                            taus[pos].clone_from(&options[pos][i].taus);
                        }
                    }
                }
                Ok(())
            }
            ExpandedGrid::List(list) => {
                for p in list {
                    if cancel.is_cancelled() {
                        return Err(Error::Cancelled);
                    }
                    let taus = p.resolve(scenario)?;
                    visit(&|| p.clone(), &taus)?;
                }
                Ok(())
            }
        }
    }

    pub fn policies(&self, scenario: &Scenario) -> Result<Vec<Policy>> {
        let mut out = Vec::new();
        self.for_each(scenario, &(), |build, _| {
            out.push(build());
            Ok(())
        })?;
        Ok(out)
    }
}
