use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use navigator::files::{load_scenario, parse_scenario};
use navigator_core::pareto::score_policies;
use navigator_core::selector::select;
use navigator_core::{MetricId, PolicyGrid, SustainabilityConstraint};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name).display().to_string()
}

fn navigator(args: &[&str], workspace: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_navigator"))
        .args(args)
        .env("NAVIGATOR_WORKSPACE", workspace)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_accepts_fixtures_and_rejects_broken_ones() {
    let ws = tempfile::tempdir().unwrap();
    for name in ["loan.json", "healthcare_rank.json", "healthcare_maximin.json", "impossibility.json"] {
        let o = navigator(&["validate", "--scenario", &fixture(name)], ws.path());
        assert_eq!(o.status.code(), Some(0), "{}: {}", name, stderr(&o));
        assert!(stdout(&o).starts_with("ok: scenario"));
    }
    let o = navigator(&["validate", "--scenario", &fixture("invalid_mass_sum.json")], ws.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("mass sum"), "{}", stderr(&o));
    let o = navigator(&["validate", "--scenario", &fixture("invalid_tau.json")], ws.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("policy `B`"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_64() {
    let ws = tempfile::tempdir().unwrap();
    let o = navigator(&["select", "--bogus"], ws.path());
    assert_eq!(o.status.code(), Some(64));
    assert!(stderr(&o).contains("--bogus"));
    assert!(!stderr(&o).contains('\u{1b}'), "no terminal escapes");
    assert_eq!(navigator(&["--help"], ws.path()).status.code(), Some(0));
}

#[test]
fn missing_file_exits_1() {
    let ws = tempfile::tempdir().unwrap();
    let o = navigator(&["select", "--scenario", "/nonexistent/scenario.json"], ws.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:"));
}

#[test]
fn tree_prints_leaf_metric() {
    let ws = tempfile::tempdir().unwrap();
    let o = navigator(&["tree", "--answers", "boost_policy=yes,representation=proportional"], ws.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "demographic_parity");

    let o = navigator(&["tree", "--answers", "boost_policy=no"], ws.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("ground_truth:"), "{}", stdout(&o));

    let o = navigator(
        &["tree", "--answers", "boost_policy=yes,representation=proportional", "--scenario", &fixture("loan.json")],
        ws.path(),
    );
    assert!(stdout(&o).contains("cross-check: Discordant"), "{}", stdout(&o));
}

#[test]
fn infeasible_select_and_frontier_exit_2() {
    let ws = tempfile::tempdir().unwrap();
    let o = navigator(&["select", "--scenario", &fixture("loan.json"), "--min-utility", "5"], ws.path());
    assert_eq!(o.status.code(), Some(2));
    let o = navigator(
        &["frontier", "--scenario", &fixture("loan.json"), "--metric", "minmax_error", "--bound", "0"],
        ws.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn frontier_csv_lists_the_frontier() {
    let ws = tempfile::tempdir().unwrap();
    let csv = ws.path().join("frontier.csv");
    let o = navigator(
        &[
            "--json", "frontier", "--scenario", &fixture("loan.json"),
            "--metric", "demographic_parity", "--csv", csv.to_str().unwrap(),
        ],
        ws.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let points = json["frontier"]["points"].as_array().unwrap().len();
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("utility,disparity,worst_off_welfare,policy_json"));
    assert_eq!(lines.count(), points);
}

#[test]
fn drift_trajectory_csv() {
    let ws = tempfile::tempdir().unwrap();
    let csv = ws.path().join("drift.csv");
    let o = navigator(
        &[
            "simulate", "--scenario", &fixture("loan.json"), "--threshold", "600",
            "--horizon", "5", "--trajectory-csv", csv.to_str().unwrap(),
        ],
        ws.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("step,group,mean_score"));
    // Six steps (0..=5) for two groups.
    assert_eq!(text.lines().count(), 1 + 6 * 2);
}

#[test]
fn ledger_summary_flags_stated_delta() {
    let ws = tempfile::tempdir().unwrap();
    let o = navigator(&["simulate", "--ledger", &fixture("ledger.json")], ws.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("$1,219,598,160.00 -> $2,046,767,080.00 (delta $827,168,920.00)"), "{}", out);
    assert!(out.contains("does not match"));
}

#[test]
fn csv_ingestion_saves_to_workspace_from_env() {
    let ws = tempfile::tempdir().unwrap();
    let csv = ws.path().join("records.csv");
    std::fs::write(&csv, "group,score,outcome\na,1,1\na,2,0\nb,1,0\nb,3,1\n").unwrap();
    let o = navigator(&["validate", "--csv", csv.to_str().unwrap(), "--id", "records", "--save"], ws.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(ws.path().join("scenarios").join("records.json").exists());
    // Saving the same id twice is refused rather than overwritten.
    let o = navigator(&["validate", "--csv", csv.to_str().unwrap(), "--id", "records", "--save"], ws.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn report_round_trip_through_workspace() {
    let ws = tempfile::tempdir().unwrap();
    let root = ws.path().join("explicit");
    let o = navigator(
        &["--json", "--workspace", root.to_str().unwrap(), "report", "--scenario", &fixture("loan.json")],
        ws.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let written = stdout(&o);
    let report: serde_json::Value = serde_json::from_str(&written).unwrap();
    let id = report["id"].as_str().unwrap();
    // The explicit flag wins over the environment.
    assert!(root.join("reports").join(format!("{}.json", id)).exists());
    let shown = navigator(&["--workspace", root.to_str().unwrap(), "report", "--show", id], ws.path());
    assert_eq!(stdout(&shown), written);

    // The chosen policy is a grid policy at its reported frontier values.
    let s = load_scenario(Path::new(&fixture("loan.json"))).unwrap();
    let chosen = &report["selection"]["chosenPolicy"];
    let grid = score_policies(&s, MetricId::PredictiveEquality, &PolicyGrid::thresholds(), &s.welfare_params).unwrap();
    assert!(grid.iter().any(|p| serde_json::to_value(&p.policy).unwrap() == *chosen));
}

const DIVERGENCE: &str = r#"{
  "id": "divergence",
  "contextClass": "general",
  "utilityParams": {"gainTP": 1.0, "lossFP": 0.5},
  "welfareParams": {"global": {"wTP": 1.0, "wFP": 0.0, "wFN": 0.0, "wTN": 0.0}},
  "groups": [
    {"id": "a", "share": 0.5, "bins": [
      {"score": 0, "mass": 0.5, "positiveRate": 0.1},
      {"score": 1, "mass": 0.5, "positiveRate": 0.9}]},
    {"id": "b", "share": 0.5, "bins": [
      {"score": 0, "mass": 0.7, "positiveRate": 0.2},
      {"score": 1, "mass": 0.3, "positiveRate": 0.8}]}
  ]
}"#;

#[test]
fn minimum_error_and_maximin_diverge() {
    // Acceptance only ever helps applicants here, so the worst-off group is
    // best served by accepting everyone, while the lowest worst-group error
    // comes from separating on score.
    let s = parse_scenario(DIVERGENCE).unwrap();
    let grid = PolicyGrid::thresholds();
    let points = score_policies(&s, MetricId::MinmaxError, &grid, &s.welfare_params).unwrap();
    let min_error = points
        .iter()
        .min_by(|a, b| a.disparity.total_cmp(&b.disparity).then(a.policy.encoding().cmp(&b.policy.encoding())))
        .unwrap();
    assert!((min_error.disparity - 0.2).abs() < 1e-12);
    assert_eq!(min_error.policy.encoding(), "a=t:1|b=t:1");
    let sel = select(&s, &s.welfare_params, &SustainabilityConstraint::default(), &grid).unwrap();
    let r = sel.selected().unwrap();
    assert_eq!(r.worst_off_group, "b");
    assert_ne!(min_error.policy, r.chosen_policy);
    // 0.7 * 0.2 + 0.3 * 0.8 against 0.3 * 0.8.
    assert!((r.worst_off_welfare - 0.38).abs() < 1e-12);
    assert!((min_error.worst_off_welfare - 0.24).abs() < 1e-12);
}
