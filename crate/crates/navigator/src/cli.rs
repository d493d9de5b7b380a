//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input (parse, validation, configuration
//! or I/O), 2 infeasible (no policy meets the constraints), 64 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use navigator_core::grid::DEFAULT_TAU_STEP;
use navigator_core::impossibility::DEFAULT_EPSILON;
use navigator_core::ingest::{Binning, IngestOptions};
use navigator_core::metrics::parse_metric_list;
use navigator_core::pareto::Optimum;
use navigator_core::selector::DEFAULT_DISPARITY_BOUND;
use navigator_core::tree::{default_tree, parse_answers, TreeOutcome};
use navigator_core::{ContextClass, MetricId, PolicyGrid, Scenario, Selection};
use serde::Serialize;

use crate::api::{
    self, FrontierRequest, ImpossibilityRequest, MetricsRequest, PolicyRef, SelectRequest, SimulateRequest,
};
use crate::canonical::{self, format_float};
use crate::error::{AppError, Result};
use crate::files::{self, parse_json};
use crate::workspace::{new_report_id, now_unix_ms, Workspace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "navigator", version, about = "Fairness metric selection and welfare analysis")]
pub struct Cli {
    /// Workspace directory (default: $NAVIGATOR_WORKSPACE or ./navigator-workspace).
    #[arg(long, global = true)]
    workspace: Option<PathBuf>,
    /// Print canonical JSON instead of a summary.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a scenario file, or build one from a `group,score,outcome` CSV.
    Validate(ValidateArgs),
    /// Confusion statistics, disparities, accuracy and utility of one policy.
    Metrics {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        policy: PolicyOpts,
    },
    /// Utility/disparity Pareto frontier over a policy grid.
    Frontier {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        metric: MetricId,
        #[command(flatten)]
        grid: GridOpts,
        /// Also find the utility-maximal policy within this disparity.
        #[arg(long)]
        bound: Option<f64>,
        /// Write the frontier as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Search a grid for policies meeting several parity metrics at once.
    Impossibility {
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated metric ids.
        #[arg(long)]
        metrics: String,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[command(flatten)]
        grid: GridOpts,
    },
    /// Welfare of a policy, score drift, and loan-ledger comparisons.
    Simulate {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[command(flatten)]
        policy: PolicyOpts,
        /// Drift rounds to simulate.
        #[arg(long, default_value_t = 0)]
        horizon: u32,
        /// Write the drift trajectory as CSV.
        #[arg(long)]
        trajectory_csv: Option<PathBuf>,
        /// Ledger document to compare.
        #[arg(long)]
        ledger: Option<PathBuf>,
    },
    /// Rawlsian choice of metric and operating point.
    Select {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        select: SelectOpts,
    },
    /// Walk the metric decision tree.
    Tree {
        /// `node=token` pairs, comma separated.
        #[arg(long, default_value = "")]
        answers: String,
        /// Tree document replacing the built-in tree.
        #[arg(long)]
        tree: Option<PathBuf>,
        /// Cross-check the leaf against the selector on this scenario.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[command(flatten)]
        select: SelectOpts,
    },
    /// Run a selection and store the full report in the workspace, or
    /// print a stored report.
    Report {
        #[arg(long, required_unless_present = "show", conflicts_with = "show")]
        scenario: Option<PathBuf>,
        /// Id of a stored report to print.
        #[arg(long)]
        show: Option<String>,
        #[command(flatten)]
        select: SelectOpts,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: std::net::SocketAddr,
    },
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long, required_unless_present = "csv", conflicts_with = "csv")]
    scenario: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Scenario id for CSV ingestion.
    #[arg(long, default_value = "ingested")]
    id: String,
    #[arg(long, value_enum, default_value_t = Context::General)]
    context: Context,
    /// Quantile binning with at most this many bins per group.
    #[arg(long)]
    quantile_bins: Option<usize>,
    /// Store the scenario in the workspace.
    #[arg(long)]
    save: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Context {
    General,
    Opportunity,
}

#[derive(Args, Debug)]
struct PolicyOpts {
    /// Name of a policy declared in the scenario.
    #[arg(long, conflicts_with_all = ["threshold", "policy_file"])]
    policy: Option<String>,
    /// Threshold applied to every group.
    #[arg(long, allow_negative_numbers = true, conflicts_with = "policy_file")]
    threshold: Option<f64>,
    /// Policy document.
    #[arg(long)]
    policy_file: Option<PathBuf>,
}

impl PolicyOpts {
    fn to_ref(&self) -> Result<Option<PolicyRef>> {
        Ok(match (&self.policy, self.threshold, &self.policy_file) {
            (Some(name), _, _) => Some(PolicyRef::Named(name.clone())),
            (_, Some(t), _) => Some(PolicyRef::Threshold(t)),
            (_, _, Some(path)) => Some(PolicyRef::Inline(parse_json(&files::read_text(path)?)?)),
            _ => None,
        })
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GridChoice {
    Thresholds,
    AcceptVectors,
    Named,
}

#[derive(Args, Debug)]
struct GridOpts {
    #[arg(long, value_enum, default_value_t = GridChoice::Thresholds)]
    grid: GridChoice,
    /// Probability step of the accept-vector grid.
    #[arg(long, default_value_t = DEFAULT_TAU_STEP)]
    step: f64,
    /// Grid document; overrides --grid.
    #[arg(long)]
    grid_file: Option<PathBuf>,
    /// Maximum number of grid policies.
    #[arg(long)]
    grid_cap: Option<u64>,
}

impl GridOpts {
    fn build(&self) -> Result<PolicyGrid> {
        let mut grid = match &self.grid_file {
            Some(path) => parse_json(&files::read_text(path)?)?,
            None => match self.grid {
                GridChoice::Thresholds => PolicyGrid::thresholds(),
                GridChoice::AcceptVectors => PolicyGrid::accept_vectors(self.step),
                GridChoice::Named => PolicyGrid::named(),
            },
        };
        if let Some(cap) = self.grid_cap {
            grid = grid.with_cap(cap);
        }
        Ok(grid)
    }
}

#[derive(Args, Debug)]
struct SelectOpts {
    /// Sustainability floor on institution utility.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    min_utility: f64,
    /// Disparity bound for constrained optima.
    #[arg(long, default_value_t = DEFAULT_DISPARITY_BOUND)]
    bound: f64,
    /// Comma-separated candidate metrics.
    #[arg(long)]
    candidates: Option<String>,
    /// Measure welfare as mean-score drift over this many rounds.
    #[arg(long)]
    welfare_horizon: Option<u32>,
    #[command(flatten)]
    grid: GridOpts,
}

impl SelectOpts {
    fn request(&self) -> Result<SelectRequest> {
        Ok(SelectRequest {
            min_utility: self.min_utility,
            bound: self.bound,
            candidates: self.candidates.as_deref().map(parse_metric_list).transpose()?,
            grid: self.grid.build()?,
            welfare_horizon: self.welfare_horizon,
            welfare_params: None,
        })
    }
}

struct Io<'a> {
    out: &'a mut dyn Write,
    json: bool,
}

impl Io<'_> {
    fn emit<T: Serialize>(&mut self, value: &T, human: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
        let res = if self.json {
            let body = canonical::to_string(value).map_err(|e| AppError::Request(e.to_string()))?;
            writeln!(self.out, "{}", body)
        } else {
            human(self.out)
        };
        res.map_err(|e| AppError::io("writing output", e))
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| AppError::io(format!("writing {}", path.display()), e))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let text = e.render();
            let _ = if code == EXIT_OK { write!(out, "{}", text) } else { write!(err, "{}", text) };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e);
            EXIT_INVALID
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    let workspace_root = Workspace::resolve_root(cli.workspace.as_deref());
    let mut io = Io { out, json: cli.json };
    match cli.command {
        Command::Validate(args) => validate(&mut io, args, &workspace_root),
        Command::Metrics { scenario, policy } => {
            let s = files::load_scenario(&scenario)?;
            let report = api::metrics(&s, &MetricsRequest { policy: policy.to_ref()? })?;
            io.emit(&report, |w| {
                writeln!(w, "group            accept   tpr      fpr      ppv      error")?;
                for (g, st) in &report.per_group {
                    writeln!(
                        w,
                        "{:<16} {:.4}   {:.4}   {:.4}   {:.4}   {:.4}",
                        g, st.acceptance_rate, st.true_positive_rate, st.false_positive_rate,
                        st.positive_predictive_value, st.error_rate
                    )?;
                }
                for (m, d) in &report.disparities {
                    writeln!(w, "{:<32} {:.6}", m.as_str(), d)?;
                }
                writeln!(w, "accuracy {:.6}  utility {:.6}", report.accuracy, report.utility)
            })?;
            Ok(EXIT_OK)
        }
        Command::Frontier { scenario, metric, grid, bound, csv } => {
            let s = files::load_scenario(&scenario)?;
            let req = FrontierRequest { metric, grid: grid.build()?, bound, welfare_params: None };
            let report = api::frontier(&s, &req, &())?;
            if let Some(path) = csv {
                write_file(&path, &files::frontier_csv(&report.frontier)?)?;
            }
            io.emit(&report, |w| {
                writeln!(w, "{} frontier: {} points", metric, report.frontier.points.len())?;
                for p in &report.frontier.points {
                    writeln!(
                        w,
                        "  utility {:>12}  disparity {}  worst-off welfare {:>12}  {}",
                        format_float(p.utility), format_float(p.disparity),
                        format_float(p.worst_off_welfare), p.policy.encoding()
                    )?;
                }
                match &report.optimum {
                    Some(Optimum::Found { point }) => writeln!(
                        w, "optimum within {}: utility {} at {}",
                        format_float(bound.unwrap_or_default()), format_float(point.utility), point.policy.encoding()
                    ),
                    Some(Optimum::Infeasible { bound, min_disparity }) => writeln!(
                        w, "infeasible: no policy within {}; smallest disparity {}",
                        format_float(*bound), format_float(*min_disparity)
                    ),
                    None => Ok(()),
                }
            })?;
            Ok(if report.is_infeasible() { EXIT_INFEASIBLE } else { EXIT_OK })
        }
        Command::Impossibility { scenario, metrics, epsilon, grid } => {
            let s = files::load_scenario(&scenario)?;
            let req = ImpossibilityRequest { metrics: parse_metric_list(&metrics)?, epsilon, grid: grid.build()? };
            let report = api::impossibility(&s, &req, &())?;
            io.emit(&report, |w| {
                writeln!(
                    w,
                    "{} of {} policies satisfy {} within {}; {} non-degenerate{}",
                    report.witnesses.len(), report.evaluated,
                    report.metrics.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(", "),
                    epsilon, report.non_degenerate_count,
                    if report.degenerate_only { " (only accept-all / reject-all)" } else { "" }
                )
            })?;
            Ok(EXIT_OK)
        }
        Command::Simulate { scenario, policy, horizon, trajectory_csv, ledger } => {
            let s = scenario.as_deref().map(files::load_scenario).transpose()?;
            let req = SimulateRequest {
                policy: policy.to_ref()?,
                horizon,
                welfare_params: None,
                ledger: ledger.as_deref().map(files::load_ledger).transpose()?,
            };
            let report = api::simulate(s.as_ref(), &req)?;
            if let (Some(path), Some(t)) = (trajectory_csv, &report.trajectory) {
                write_file(&path, &files::trajectory_csv(t)?)?;
            }
            io.emit(&report, |w| {
                if let Some(wo) = &report.welfare {
                    for (g, d) in &wo.per_group_delta {
                        writeln!(w, "{:<16} welfare delta {}", g, format_float(*d))?;
                    }
                    writeln!(
                        w, "worst-off `{}`: {}; institution utility {}",
                        wo.worst_off_group, format_float(wo.worst_off_welfare), format_float(wo.institution_utility)
                    )?;
                }
                if let Some(t) = &report.trajectory {
                    let last = t.per_group_mean_score.len() - 1;
                    for g in &t.groups {
                        writeln!(
                            w, "{:<16} mean score {} -> {} after {} rounds",
                            g, format_float(t.mean_score(0, g).unwrap_or_default()),
                            format_float(t.mean_score(last, g).unwrap_or_default()), t.horizon
                        )?;
                    }
                }
                if let Some(l) = &report.ledger {
                    for r in &l.rows {
                        writeln!(
                            w, "{:<16} {} -> {} (delta {}){}",
                            r.group, dollars(r.baseline_total_cents), dollars(r.fairness_aware_total_cents),
                            dollars(r.delta_cents),
                            match (r.stated_matches, r.stated_delta_cents) {
                                (Some(false), Some(stated)) => format!("; stated {} does not match", dollars(stated)),
                                (Some(true), _) => "; stated delta matches".to_string(),
                                _ => String::new(),
                            }
                        )?;
                    }
                }
                Ok(())
            })?;
            Ok(EXIT_OK)
        }
        Command::Select { scenario, select } => {
            let s = files::load_scenario(&scenario)?;
            let selection = api::select(&s, &select.request()?, &())?;
            io.emit(&selection, |w| describe_selection(w, &selection))?;
            Ok(selection_code(&selection))
        }
        Command::Tree { answers, tree, scenario, select } => {
            let tree = match tree {
                Some(path) => files::load_tree(&path)?,
                None => default_tree(),
            };
            let answers = parse_answers(&answers)?;
            let s = scenario.as_deref().map(files::load_scenario).transpose()?;
            let req = select.request()?;
            let report = api::traverse(&tree, &answers, s.as_ref().map(|s| (s, &req)))?;
            io.emit(&report, |w| {
                match &report.outcome {
                    TreeOutcome::Leaf { metric, .. } => writeln!(w, "{}", metric)?,
                    TreeOutcome::Pending { remaining, .. } => {
                        for q in remaining {
                            writeln!(w, "{}: {} [{}]", q.node, q.question, q.tokens.join("|"))?;
                        }
                    }
                }
                if let Some(c) = &report.cross_check {
                    writeln!(w, "cross-check: {:?}; {}", c.concordance, c.note)?;
                }
                Ok(())
            })?;
            Ok(EXIT_OK)
        }
        Command::Report { scenario, show, select } => {
            let ws = Workspace::open(&workspace_root)?;
            if let Some(id) = show {
                let body = ws.get_report(&id)?;
                writeln!(io.out, "{}", body).map_err(|e| AppError::io("writing output", e))?;
                return Ok(EXIT_OK);
            }
            let s = files::load_scenario(scenario.as_deref().expect("required by clap"))?;
            let report = api::run_report(&s, &select.request()?, new_report_id(), now_unix_ms())?;
            let path = ws.put_report(&report)?;
            io.emit(&report, |w| {
                writeln!(w, "report {} written to {}", report.id, path.display())?;
                describe_selection(w, &report.selection)
            })?;
            Ok(selection_code(&report.selection))
        }
        Command::Serve { addr } => {
            let ws = Workspace::open(&workspace_root)?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| AppError::io("starting runtime", e))?;
            writeln!(io.out, "listening on http://{} (workspace {})", addr, ws.root().display())
                .map_err(|e| AppError::io("writing output", e))?;
            rt.block_on(crate::service::serve(addr, ws))?;
            Ok(EXIT_OK)
        }
    }
}

fn validate(io: &mut Io<'_>, args: ValidateArgs, workspace_root: &Path) -> Result<i32> {
    let scenario: Scenario = match (&args.scenario, &args.csv) {
        (Some(path), _) => files::load_scenario(path)?,
        (None, Some(path)) => {
            let options = IngestOptions {
                id: args.id.clone(),
                context_class: match args.context {
                    Context::General => ContextClass::General,
                    Context::Opportunity => ContextClass::Opportunity,
                },
                binning: match args.quantile_bins {
                    Some(bins) => Binning::Quantile { bins },
                    None => Binning::Distinct,
                },
                ..IngestOptions::default()
            };
            files::ingest_csv(path, &options)?
        }
        (None, None) => unreachable!("clap requires one source"),
    };
    if args.save {
        Workspace::open(workspace_root)?.put_scenario(&scenario)?;
    }
    io.emit(&scenario, |w| {
        writeln!(
            w,
            "ok: scenario `{}` with {} group(s), {} bin(s)",
            scenario.id,
            scenario.groups.len(),
            scenario.groups.iter().map(|g| g.bins.len()).sum::<usize>()
        )
    })?;
    Ok(EXIT_OK)
}

fn selection_code(selection: &Selection) -> i32 {
    match selection {
        Selection::Selected(_) => EXIT_OK,
        Selection::Infeasible(_) => EXIT_INFEASIBLE,
    }
}

fn describe_selection(w: &mut dyn Write, selection: &Selection) -> std::io::Result<()> {
    for (i, r) in selection.justification().iter().enumerate() {
        writeln!(w, "{:>2}. [{}] {}", i + 1, serde_json::to_value(r.rule).unwrap_or_default().as_str().unwrap_or(""), r.text)?;
    }
    match selection {
        Selection::Selected(r) => writeln!(
            w,
            "selected {} with policy {} (utility {}, worst-off `{}` welfare {})",
            r.chosen_metric, r.chosen_policy.encoding(), format_float(r.chosen_utility),
            r.worst_off_group, format_float(r.worst_off_welfare)
        ),
        Selection::Infeasible(i) => writeln!(w, "infeasible: {:?} constraint binds", i.binding_constraint),
    }
}

fn dollars(cents: i128) -> String {
    let sign = if cents < 0 { "-" } else { "" };
    let abs = cents.unsigned_abs();
    let whole = (abs / 100).to_string();
    let mut grouped = String::new();
    for (i, c) in whole.chars().enumerate() {
        if i > 0 && (whole.len() - i) % 3 == 0 {
            grouped.push(',');
        }
        grouped.push(c);
    }
    format!("{}${}.{:02}", sign, grouped, abs % 100)
}
