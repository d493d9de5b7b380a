//! Empirical scenarios from `(group, score, outcome)` records.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{
    ContextClass, GroupProfile, Scenario, ScoreBin, UtilityParams, WelfareParams,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub group: String,
    pub score: f64,
    pub outcome: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum Binning {
    /// One bin per distinct score.
    #[default]
    Distinct,
    /// At most `bins` bins of roughly equal row counts; equal scores always
    /// share a bin. The bin score is the mean of its members.
    Quantile { bins: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOptions {
    pub id: String,
    pub context_class: ContextClass,
    pub utility_params: UtilityParams,
    pub welfare_params: WelfareParams,
    pub binning: Binning,
    /// Groups that must appear; others found in the records are added in
    /// first-seen order.
    pub declared_groups: Vec<String>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            id: "ingested".into(),
            context_class: ContextClass::General,
            utility_params: UtilityParams { gain_tp: 1.0, loss_fp: 1.0 },
            welfare_params: WelfareParams::default(),
            binning: Binning::Distinct,
            declared_groups: Vec::new(),
        }
    }
}

fn bins_for(rows: &mut [(f64, u8)], binning: Binning) -> Result<Vec<ScoreBin>> {
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite scores"));
    let n = rows.len();
    // Runs of equal scores.
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=n {
        if i == n || rows[i].0 != rows[start].0 {
            runs.push((start, i));
            start = i;
        }
    }
    let chunks: Vec<(usize, usize)> = match binning {
        Binning::Distinct => runs,
        Binning::Quantile { bins } => {
            if bins == 0 {
                return Err(Error::Ingestion("quantile binning needs at least one bin".into()));
            }
            let mut out: Vec<(usize, usize)> = Vec::new();
            for (s, e) in runs {
                // Assign a run to the quantile of its first row.
                let q = s * bins / n;
                match out.last_mut() {
                    Some(last) if last.0 * bins / n == q => last.1 = e,
                    _ => out.push((s, e)),
                }
            }
            out
        }
    };
    Ok(chunks
        .into_iter()
        .map(|(s, e)| {
            let count = (e - s) as f64;
            let score = rows[s..e].iter().map(|r| r.0).sum::<f64>() / count;
            let positives = rows[s..e].iter().filter(|r| r.1 == 1).count() as f64;
            ScoreBin::new(score, count / n as f64, positives / count)
        })
        .collect())
}

pub fn ingest_records(records: &[Record], options: &IngestOptions) -> Result<Scenario> {
    let mut order: Vec<String> = options.declared_groups.clone();
    let mut rows: BTreeMap<String, Vec<(f64, u8)>> = BTreeMap::new();
    for (line, r) in records.iter().enumerate() {
        if r.outcome > 1 {
            return Err(Error::Ingestion(format!(
                "record {} has outcome {}; outcomes must be 0 or 1",
                line + 1,
                r.outcome
            )));
        }
        if !r.score.is_finite() {
            return Err(Error::Ingestion(format!("record {} has a non-finite score", line + 1)));
        }
        if !order.contains(&r.group) {
            order.push(r.group.clone());
        }
        rows.entry(r.group.clone()).or_default().push((r.score, r.outcome));
    }
    if order.is_empty() {
        return Err(Error::Ingestion("no records".into()));
    }
    let total = records.len() as f64;
    let mut groups = Vec::with_capacity(order.len());
    for id in order {
        let Some(group_rows) = rows.get_mut(&id) else {
            return Err(Error::Ingestion(format!("declared group `{}` has no rows", id)));
        };
        let share = group_rows.len() as f64 / total;
        groups.push(GroupProfile {
            label: id.clone(),
            id,
            share,
            ses_tag: false,
            bins: bins_for(group_rows, options.binning)?,
        });
    }
    let scenario = Scenario {
        id: options.id.clone(),
        context_class: options.context_class,
        utility_params: options.utility_params,
        welfare_params: options.welfare_params.clone(),
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

    fn rec(group: &str, score: f64, outcome: u8) -> Record {
        Record { group: group.into(), score, outcome }
    }

    #[test]
    fn four_rows_one_group() {
        let rows = vec![rec("g", 1.0, 0), rec("g", 1.0, 1), rec("g", 2.0, 1), rec("g", 2.0, 1)];
        let s = ingest_records(&rows, &IngestOptions::default()).unwrap();
        let b = &s.groups[0].bins;
        assert_eq!(b.len(), 2);
        assert_eq!((b[0].score, b[0].mass, b[0].positive_rate), (1.0, 0.5, 0.5));
        assert_eq!((b[1].score, b[1].mass, b[1].positive_rate), (2.0, 0.5, 1.0));
    }

    #[test]
    fn single_row() {
        let s = ingest_records(&[rec("g", 3.5, 1)], &IngestOptions::default()).unwrap();
        let b = &s.groups[0].bins;
        assert_eq!((b.len(), b[0].mass, b[0].positive_rate), (1, 1.0, 1.0));
    }

    #[test]
    fn non_binary_outcome_rejected() {
        assert!(matches!(
            ingest_records(&[rec("g", 1.0, 2)], &IngestOptions::default()),
            Err(Error::Ingestion(_))
        ));
    }

    #[test]
    fn declared_group_without_rows_rejected() {
        let opts = IngestOptions { declared_groups: vec!["a".into(), "b".into()], ..Default::default() };
        assert!(matches!(ingest_records(&[rec("a", 1.0, 1)], &opts), Err(Error::Ingestion(_))));
    }

    #[test]
    fn quantile_binning_keeps_ties_together() {
        let rows: Vec<Record> = [1.0, 1.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
            .iter()
            .enumerate()
            .map(|(i, &s)| rec("g", s, (i % 2) as u8))
            .collect();
        let opts = IngestOptions { binning: Binning::Quantile { bins: 4 }, ..Default::default() };
        let s = ingest_records(&rows, &opts).unwrap();
        let b = &s.groups[0].bins;
        assert_eq!(b[0].score, 1.0);
        assert_eq!(b[0].mass, 3.0 / 8.0);
        assert!(b.len() <= 4);
        let sum: f64 = b.iter().map(|x| x.mass).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shares_follow_row_counts() {
        let rows = vec![rec("a", 1.0, 1), rec("b", 1.0, 0), rec("b", 2.0, 1), rec("b", 3.0, 1)];
        let s = ingest_records(&rows, &IngestOptions::default()).unwrap();
        assert_eq!(s.groups[0].share, 0.25);
        assert_eq!(s.groups[1].share, 0.75);
    }
}
