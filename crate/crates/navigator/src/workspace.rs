//! File-backed store for scenarios and run reports.
//!
//! Layout: `<root>/scenarios/<id>.json` and `<root>/reports/<id>.json`, each
//! holding canonical JSON. Every write goes to a temporary file in the same
//! directory and is renamed into place, so readers never see a partial
//! document. Stored documents are never overwritten.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use navigator_core::Scenario;

use crate::api::RunReport;
use crate::canonical;
use crate::error::{AppError, Result};
use crate::files::parse_scenario;

pub const WORKSPACE_ENV: &str = "NAVIGATOR_WORKSPACE";
pub const DEFAULT_WORKSPACE: &str = "navigator-workspace";

#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

/// Ids become file names, so they are restricted to a safe alphabet.
pub fn check_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(AppError::InvalidId(id.to_string()))
    }
}

impl Workspace {
    /// Opens (creating if needed) a workspace and checks it is writable.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let ws = Workspace { root: root.into() };
        for dir in [ws.scenario_dir(), ws.report_dir()] {
            fs::create_dir_all(&dir).map_err(|e| AppError::io(format!("creating {}", dir.display()), e))?;
        }
        let probe = ws.root.join(format!(".probe-{}", uuid::Uuid::new_v4()));
        fs::write(&probe, b"")
            .and_then(|_| fs::remove_file(&probe))
            .map_err(|e| AppError::io(format!("workspace {} is not writable", ws.root.display()), e))?;
        Ok(ws)
    }

    /// An explicit root wins, then `NAVIGATOR_WORKSPACE`, then
    /// `./navigator-workspace`.
    pub fn resolve_root(explicit: Option<&Path>) -> PathBuf {
        explicit
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(WORKSPACE_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_WORKSPACE))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn scenario_dir(&self) -> PathBuf {
        self.root.join("scenarios")
    }

    fn report_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    fn write_new(&self, dir: &Path, id: &str, what: &str, body: &str) -> Result<PathBuf> {
        check_id(id)?;
        let target = dir.join(format!("{}.json", id));
        if target.exists() {
            return Err(AppError::Conflict(format!("{} `{}`", what, id)));
        }
        let tmp = dir.join(format!(".{}.{}.tmp", id, uuid::Uuid::new_v4()));
        let write = || -> std::io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(body.as_bytes())?;
            f.sync_all()?;
            fs::rename(&tmp, &target)
        };
        write().map_err(|e| {
            let _ = fs::remove_file(&tmp);
            AppError::io(format!("writing {}", target.display()), e)
        })?;
        Ok(target)
    }

    fn read(&self, dir: &Path, id: &str, what: &str) -> Result<String> {
        check_id(id)?;
        let path = dir.join(format!("{}.json", id));
        match fs::read_to_string(&path) {
            Ok(text) => Ok(text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Err(AppError::NotFound(format!("{} `{}`", what, id)))
            }
            Err(e) => Err(AppError::io(format!("reading {}", path.display()), e)),
        }
    }

    /// Stores a validated scenario under its own id.
    pub fn put_scenario(&self, scenario: &Scenario) -> Result<PathBuf> {
        scenario.validate()?;
        let body = canonical::to_string(scenario).map_err(|e| AppError::Request(e.to_string()))?;
        self.write_new(&self.scenario_dir(), &scenario.id, "scenario", &body)
    }

    pub fn get_scenario(&self, id: &str) -> Result<Scenario> {
        parse_scenario(&self.read(&self.scenario_dir(), id, "scenario")?)
    }

    pub fn put_report(&self, report: &RunReport) -> Result<PathBuf> {
        let body = canonical::to_string(report).map_err(|e| AppError::Request(e.to_string()))?;
        self.write_new(&self.report_dir(), &report.id, "report", &body)
    }

    /// Canonical JSON of a stored report, exactly as written.
    pub fn get_report(&self, id: &str) -> Result<String> {
        self.read(&self.report_dir(), id, "report")
    }
}

pub fn new_report_id() -> String {
    uuid::Uuid::new_v4().to_string()
}

pub fn now_unix_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}
