//! File formats, report emitters and input checks for the `posture` tool.

pub mod case_json;
pub mod error;
pub mod matpower;
pub mod report;
pub mod schedule_json;

use std::path::Path;

use posture_core::grid::{CaseData, GridCase};
use posture_core::schedule::HurricaneSchedule;

pub use error::{Error, Result};

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn is_matpower(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("m"))
}

/// Case name and unvalidated contents. Files ending in `.m` are read as
/// MATPOWER cases, everything else as JSON.
pub fn read_case_data(path: &Path) -> Result<(String, CaseData)> {
    let text = read_text(path)?;
    let (name, data) = if is_matpower(path) {
        let mp = matpower::parse_matpower(&text)?;
        (mp.name.clone(), mp.to_data()?)
    } else {
        let file = case_json::parse_case_file(&text, path)?;
        (file.name.clone(), file.to_data())
    };
    let name = if name.is_empty() { file_stem(path) } else { name };
    Ok((name, data))
}

/// Case name and validated network.
pub fn read_case(path: &Path) -> Result<(String, GridCase)> {
    let (name, data) = read_case_data(path)?;
    let case = GridCase::new(data).map_err(|source| Error::Case {
        path: path.to_path_buf(),
        source,
    })?;
    Ok((name, case))
}

pub fn read_schedule(path: &Path) -> Result<(String, HurricaneSchedule)> {
    let text = read_text(path)?;
    let file = schedule_json::parse_schedule_file(&text, path)?;
    let schedule = file.to_schedule().map_err(|e| match e {
        Error::Schedule(source) => Error::ScheduleFile {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })?;
    let name = if file.name.is_empty() { file_stem(path) } else { file.name };
    Ok((name, schedule))
}

/// Every problem found in a case and, optionally, a schedule against it.
/// Unreadable or malformed files become a single finding.
pub fn validate_inputs(case_path: &Path, schedule_path: Option<&Path>) -> Vec<String> {
    let mut findings = Vec::new();
    let case = match read_case_data(case_path) {
        Ok((_, data)) => {
            let diagnostics = data.diagnostics();
            findings.extend(diagnostics.iter().map(|d| format!("{}: {d}", case_path.display())));
            if diagnostics.is_empty() {
                GridCase::new(data).ok()
            } else {
                None
            }
        }
        Err(e) => {
            findings.push(e.to_string());
            None
        }
    };
    if let Some(path) = schedule_path {
        match read_schedule(path) {
            Ok((_, schedule)) => {
                if let Some(case) = &case {
                    let unknown = schedule.unknown_elements(case);
                    findings.extend(unknown.iter().map(|e| format!("{}: {e}", path.display())));
                }
            }
            Err(e) => findings.push(e.to_string()),
        }
    }
    findings
}
