//! Scenario, tree and ledger documents; CSV ingestion and export.

use std::io::Read;
use std::path::Path;

use navigator_core::ingest::{ingest_records, IngestOptions, Record};
use navigator_core::pareto::Frontier;
use navigator_core::tree::DecisionTree;
use navigator_core::welfare::{LedgerPair, Trajectory};
use navigator_core::Scenario;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::canonical::{self, format_float};
use crate::error::{AppError, Result};

/// Deserializes JSON, reporting schema violations with the field path.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(de)?;
    Ok(value)
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| AppError::io(format!("reading {}", path.display()), e))
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario = parse_json(text)?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    parse_scenario(&read_text(path)?)
}

pub fn load_tree(path: &Path) -> Result<DecisionTree> {
    let tree: DecisionTree = parse_json(&read_text(path)?)?;
    tree.validate()?;
    Ok(tree)
}

pub fn load_ledger(path: &Path) -> Result<Vec<LedgerPair>> {
    parse_json(&read_text(path)?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Row {
    group: String,
    score: f64,
    outcome: u8,
}

/// Reads `group,score,outcome` records.
pub fn read_records<R: Read>(reader: R) -> Result<Vec<Record>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| AppError::Parse { path: "header".into(), message: e.to_string() })?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["group", "score", "outcome"] {
        return Err(AppError::Parse {
            path: "header".into(),
            message: format!("expected `group,score,outcome`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| AppError::Parse {
            path: format!("row {}", i + 1),
            message: e.to_string(),
        })?;
        out.push(Record { group: row.group, score: row.score, outcome: row.outcome });
    }
    Ok(out)
}

pub fn ingest_csv(path: &Path, options: &IngestOptions) -> Result<Scenario> {
    let file = std::fs::File::open(path).map_err(|e| AppError::io(format!("opening {}", path.display()), e))?;
    Ok(ingest_records(&read_records(file)?, options)?)
}

/// `utility,disparity,worst_off_welfare,policy_json`, one row per frontier
/// point in frontier order.
pub fn frontier_csv(frontier: &Frontier) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| AppError::Request(format!("writing CSV: {}", e));
    w.write_record(["utility", "disparity", "worst_off_welfare", "policy_json"]).map_err(io)?;
    for p in &frontier.points {
        let policy = canonical::to_string(&p.policy).map_err(|e| AppError::Request(e.to_string()))?;
        w.write_record([
            format_float(p.utility),
            format_float(p.disparity),
            format_float(p.worst_off_welfare),
            policy,
        ])
        .map_err(io)?;
    }
    finish(w)
}

/// `step,group,mean_score`, steps ascending, groups in scenario order.
pub fn trajectory_csv(trajectory: &Trajectory) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| AppError::Request(format!("writing CSV: {}", e));
    w.write_record(["step", "group", "mean_score"]).map_err(io)?;
    for (step, row) in trajectory.per_group_mean_score.iter().enumerate() {
        for (group, mean) in trajectory.groups.iter().zip(row) {
            w.write_record([step.to_string(), group.clone(), format_float(*mean)]).map_err(io)?;
        }
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| AppError::Request(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_parse_with_header() {
        let rows = read_records("group,score,outcome\na,1,0\nb, 2.5 ,1\n".as_bytes()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1], Record { group: "b".into(), score: 2.5, outcome: 1 });
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(matches!(read_records("g,s,o\na,1,0\n".as_bytes()), Err(AppError::Parse { .. })));
    }

    #[test]
    fn bad_cell_names_row() {
        match read_records("group,score,outcome\na,x,0\n".as_bytes()) {
            Err(AppError::Parse { path, .. }) => assert_eq!(path, "row 1"),
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn schema_error_names_field() {
        let err = parse_scenario(r#"{"id":"x","contextClass":"general","utilityParams":{"gainTP":1,"lossFP":1},"groups":[{"id":"a","label":"a","share":1,"bins":[{"score":1,"mass":1}]}]}"#)
            .unwrap_err();
        match err {
            AppError::Parse { path, message } => {
                assert_eq!(path, "groups[0].bins[0]");
                assert!(message.contains("positiveRate"), "{}", message);
            }
            other => panic!("{:?}", other),
        }
    }
}
