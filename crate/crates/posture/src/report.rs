//! CSV and JSON emitters for cascade runs, single steps and sweeps.
//!
//! Costs are written in dollars with two decimals and `--` when absent;
//! flows and shed load in MW with three decimals. Residuals and gaps are
//! written in shortest round-trip form. CSV output depends only on the
//! report, so identical runs give identical bytes.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use posture_core::cascade::{CascadeReport, FlowRecord, StepReport, SweepReport};
use posture_core::grid::Dispatch;
use serde::Serialize;

use crate::error::{Error, Result};

pub const ABSENT_COST: &str = "--";

pub const CASCADE_HEADER: [&str; 9] = [
    "batch",
    "lost_buses",
    "lost_branches",
    "lost_generators",
    "status",
    "operation_cost",
    "shed_load_mw",
    "rank1_residual",
    "gap_percent",
];

pub const FLOWS_HEADER: [&str; 5] = ["branch", "pre_mitigation_mw", "post_mitigation_mw", "limit_mw", "effective_limit_mw"];

pub const SWEEP_HEADER: [&str; 4] = ["fraction", "status", "operation_cost", "frontier"];

pub fn format_cost(cost: Option<f64>) -> String {
    cost.map_or_else(|| ABSENT_COST.to_string(), |c| format!("{c:.2}"))
}

pub fn format_mw(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.3}")
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn format_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn to_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// One row per step.
pub fn cascade_csv(report: &CascadeReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CASCADE_HEADER)?;
    for s in &report.steps {
        w.write_record([
            s.step.to_string(),
            s.lost_buses.to_string(),
            s.lost_branches.to_string(),
            s.lost_generators.to_string(),
            s.status.to_string(),
            format_cost(s.operation_cost),
            format_mw(s.shed_load_mw),
            format_opt(s.rank1_residual),
            format_opt(s.gap_percent),
        ])?;
    }
    to_string(w)
}

/// Base-case flows of a step before and after derating. The pre column is
/// blank when the underated solve was not run or failed.
pub fn flows_csv(step: &StepReport) -> Result<String> {
    let pre: BTreeMap<_, _> = step
        .unmitigated_flows
        .iter()
        .flatten()
        .map(|f| (f.branch, f.flow))
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(FLOWS_HEADER)?;
    for f in &step.flows {
        w.write_record([
            f.branch.0.to_string(),
            pre.get(&f.branch).map(|&v| format_mw(v)).unwrap_or_default(),
            format_mw(f.flow),
            format_mw(f.limit),
            format_mw(f.effective_limit),
        ])?;
    }
    to_string(w)
}

/// Last-period flows of each security case after the base case.
pub fn contingency_flows_csv(step: &StepReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["case", "branch", "flow_mw", "limit_mw", "effective_limit_mw"])?;
    for (i, flows) in step.contingency_flows.iter().enumerate() {
        for f in flows {
            w.write_record([
                (i + 1).to_string(),
                f.branch.0.to_string(),
                format_mw(f.flow),
                format_mw(f.limit),
                format_mw(f.effective_limit),
            ])?;
        }
    }
    to_string(w)
}

pub fn sweep_csv(report: &SweepReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_HEADER)?;
    for p in &report.points {
        let frontier = report.frontier == Some(p.fraction);
        w.write_record([
            p.fraction.to_string(),
            p.status.to_string(),
            format_cost(p.cost),
            if frontier { "true" } else { "false" }.to_string(),
        ])?;
    }
    to_string(w)
}

/// What produced a set of outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: BTreeMap<String, PathBuf>,
    pub overrides: BTreeMap<String, String>,
    pub output_dir: PathBuf,
    pub timestamp: String,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: &str, output_dir: &Path) -> Self {
        Self {
            command: command.to_string(),
            inputs: BTreeMap::new(),
            overrides: BTreeMap::new(),
            output_dir: output_dir.to_path_buf(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Serialize)]
struct FlowJson {
    branch: u32,
    flow_mw: f64,
    limit_mw: Option<f64>,
    effective_limit_mw: Option<f64>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn flows_json(flows: &[FlowRecord]) -> Vec<FlowJson> {
    flows
        .iter()
        .map(|f| FlowJson {
            branch: f.branch.0,
            flow_mw: f.flow,
            limit_mw: finite(f.limit),
            effective_limit_mw: finite(f.effective_limit),
        })
        .collect()
}

fn dispatch_json(d: &Dispatch) -> BTreeMap<u32, f64> {
    d.iter().map(|(g, &p)| (g.0, p)).collect()
}

#[derive(Serialize)]
struct StepJson {
    step: usize,
    lost_buses: usize,
    lost_branches: usize,
    lost_generators: usize,
    status: String,
    operation_cost: Option<f64>,
    shed_load_mw: f64,
    rank1_residual: Option<f64>,
    gap_percent: Option<f64>,
    gap_percent_printed: Option<f64>,
    polished: bool,
    solve_time_s: f64,
    iterations: usize,
    derate_targets: Vec<u32>,
    initial_dispatch_mw: BTreeMap<u32, f64>,
    dispatch_mw: Option<BTreeMap<u32, f64>>,
    flows: Vec<FlowJson>,
    unmitigated_flows: Option<Vec<FlowJson>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    contingency_flows: Vec<Vec<FlowJson>>,
    message: Option<String>,
}

fn step_json(s: &StepReport) -> StepJson {
    StepJson {
        step: s.step,
        lost_buses: s.lost_buses,
        lost_branches: s.lost_branches,
        lost_generators: s.lost_generators,
        status: s.status.to_string(),
        operation_cost: s.operation_cost,
        shed_load_mw: s.shed_load_mw,
        rank1_residual: s.rank1_residual,
        gap_percent: s.gap_percent,
        gap_percent_printed: s.gap_percent_printed,
        polished: s.polished,
        solve_time_s: s.solve_time,
        iterations: s.iterations,
        derate_targets: s.derate_targets.iter().map(|b| b.0).collect(),
        initial_dispatch_mw: dispatch_json(&s.initial_dispatch),
        dispatch_mw: s.dispatch.as_ref().map(dispatch_json),
        flows: flows_json(&s.flows),
        unmitigated_flows: s.unmitigated_flows.as_deref().map(flows_json),
        contingency_flows: s.contingency_flows.iter().map(|f| flows_json(f)).collect(),
        message: s.message.clone(),
    }
}

#[derive(Serialize)]
struct ConfigJson {
    derate_fraction: f64,
    mode: &'static str,
    stop_on_infeasible: bool,
    periods: Option<usize>,
    prune_dead_islands: bool,
    feasibility_tol_mw: f64,
    rank_tol: f64,
    eps: f64,
    max_iters: usize,
}

#[derive(Serialize)]
struct CascadeJson<'a> {
    manifest: &'a RunManifest,
    case_id: &'a str,
    schedule_id: &'a str,
    config: ConfigJson,
    steps: Vec<StepJson>,
}

pub fn cascade_json(report: &CascadeReport, manifest: &RunManifest) -> String {
    let c = &report.config;
    let doc = CascadeJson {
        manifest,
        case_id: &report.provenance.case_id,
        schedule_id: &report.provenance.schedule_id,
        config: ConfigJson {
            derate_fraction: c.derate_fraction,
            mode: c.relax_mode.name(),
            stop_on_infeasible: c.stop_on_infeasible,
            periods: c.build.periods,
            prune_dead_islands: c.build.prune_dead_islands,
            feasibility_tol_mw: c.build.feasibility_tol,
            rank_tol: c.rank_tol,
            eps: c.solver.eps_primal,
            max_iters: c.solver.max_iters,
        },
        steps: report.steps.iter().map(step_json).collect(),
    };
    serde_json::to_string_pretty(&doc).expect("report serializes")
}

#[derive(Serialize)]
struct SweepPointJson {
    fraction: f64,
    status: String,
    operation_cost: Option<f64>,
    iterations: usize,
    flows: Vec<FlowJson>,
    message: Option<String>,
}

#[derive(Serialize)]
struct SweepJson<'a> {
    manifest: &'a RunManifest,
    step: usize,
    frontier: Option<f64>,
    points: Vec<SweepPointJson>,
}

pub fn sweep_json(report: &SweepReport, manifest: &RunManifest) -> String {
    let doc = SweepJson {
        manifest,
        step: report.step,
        frontier: report.frontier,
        points: report
            .points
            .iter()
            .map(|p| SweepPointJson {
                fraction: p.fraction,
                status: p.status.to_string(),
                operation_cost: p.cost,
                iterations: p.iterations,
                flows: flows_json(&p.flows),
                message: p.message.clone(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("report serializes")
}

pub fn manifest_json(manifest: &RunManifest) -> String {
    serde_json::to_string_pretty(manifest).expect("manifest serializes")
}

/// Writes `contents` to `dir/name` through a temporary file in `dir` and a
/// rename, so readers never see a partial file.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| Error::io(&target, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(&target, e))?;
    tmp.persist(&target).map_err(|e| Error::io(&target, e.error))?;
    Ok(target)
}

/// Writes `cascade.csv`, one `flows_<k>.csv` per step (plus
/// `flows_<k>_contingencies.csv` when contingency flows were kept),
/// `report.json` and `manifest.json`.
pub fn write_cascade(dir: &Path, report: &CascadeReport, manifest: &RunManifest) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = vec![write_atomic(dir, "cascade.csv", &cascade_csv(report)?)?];
    for s in &report.steps {
        written.push(write_atomic(dir, &format!("flows_{}.csv", s.step), &flows_csv(s)?)?);
        if !s.contingency_flows.is_empty() {
            let name = format!("flows_{}_contingencies.csv", s.step);
            written.push(write_atomic(dir, &name, &contingency_flows_csv(s)?)?);
        }
    }
    written.push(write_atomic(dir, "report.json", &cascade_json(report, manifest))?);
    written.push(write_atomic(dir, "manifest.json", &manifest_json(manifest))?);
    Ok(written)
}

pub fn write_sweep(dir: &Path, report: &SweepReport, manifest: &RunManifest) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(vec![
        write_atomic(dir, "sweep.csv", &sweep_csv(report)?)?,
        write_atomic(dir, "sweep.json", &sweep_json(report, manifest))?,
        write_atomic(dir, "manifest.json", &manifest_json(manifest))?,
    ])
}

/// Plain-text table of a cascade for the terminal.
pub fn cascade_table(report: &CascadeReport) -> String {
    let mut out = format!(
        "{:>5} {:>6} {:>8} {:>5} {:>10} {:>16} {:>10}\n",
        "batch", "buses", "branches", "gens", "status", "cost ($)", "shed (MW)"
    );
    for s in &report.steps {
        out.push_str(&format!(
            "{:>5} {:>6} {:>8} {:>5} {:>10} {:>16} {:>10}\n",
            s.step,
            s.lost_buses,
            s.lost_branches,
            s.lost_generators,
            s.status,
            format_cost(s.operation_cost),
            format_mw(s.shed_load_mw)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use posture_core::cascade::{CascadeConfig, Provenance, StepStatus, SweepPoint};
    use posture_core::grid::BranchId;

    fn step(k: usize, cost: Option<f64>) -> StepReport {
        StepReport {
            step: k,
            lost_buses: 0,
            lost_branches: k,
            lost_generators: 0,
            status: if cost.is_some() { StepStatus::Feasible } else { StepStatus::Infeasible },
            operation_cost: cost,
            shed_load_mw: 12.5,
            flows: vec![FlowRecord {
                branch: BranchId(3),
                flow: -41.23456,
                limit: 100.0,
                effective_limit: 70.0,
            }],
            contingency_flows: Vec::new(),
            unmitigated_flows: Some(vec![FlowRecord {
                branch: BranchId(3),
                flow: -80.0,
                limit: 100.0,
                effective_limit: 100.0,
            }]),
            rank1_residual: Some(2.5e-9),
            gap_percent: Some(0.0),
            gap_percent_printed: Some(-0.0),
            polished: true,
            solve_time: 0.1,
            iterations: 40,
            derate_targets: vec![BranchId(3)],
            initial_dispatch: Dispatch::new(),
            dispatch: None,
            message: None,
        }
    }

    #[test]
    fn cascade_rows() {
        let report = CascadeReport {
            provenance: Provenance::default(),
            config: CascadeConfig::default(),
            steps: vec![step(1, Some(1234.5678)), step(2, None)],
        };
        let csv = cascade_csv(&report).unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], CASCADE_HEADER.join(","));
        assert_eq!(lines[1], "1,0,1,0,feasible,1234.57,12.500,0.0000000025,0");
        assert_eq!(lines[2], "2,0,2,0,infeasible,--,12.500,0.0000000025,0");
    }

    #[test]
    fn flow_rows() {
        let csv = flows_csv(&step(1, Some(1.0))).unwrap();
        assert_eq!(csv.lines().nth(1).unwrap(), "3,-80.000,-41.235,100.000,70.000");
        let mut s = step(1, Some(1.0));
        s.unmitigated_flows = None;
        s.flows[0].limit = f64::INFINITY;
        let csv = flows_csv(&s).unwrap();
        assert_eq!(csv.lines().nth(1).unwrap(), "3,,-41.235,inf,70.000");
    }

    #[test]
    fn sweep_flags_frontier() {
        let point = |fraction, feasible: bool| SweepPoint {
            fraction,
            status: if feasible { StepStatus::Feasible } else { StepStatus::Infeasible },
            cost: feasible.then_some(10.0),
            flows: Vec::new(),
            iterations: 1,
            message: None,
        };
        let report = SweepReport {
            step: 2,
            points: vec![point(1.0, true), point(0.5, true), point(0.25, false)],
            frontier: Some(0.5),
        };
        let csv = sweep_csv(&report).unwrap();
        assert_eq!(csv, "fraction,status,operation_cost,frontier\n1,feasible,10.00,false\n0.5,feasible,10.00,true\n0.25,infeasible,--,false\n");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(dir.path(), "a.txt", "one").unwrap();
        write_atomic(dir.path(), "a.txt", "two").unwrap();
        assert_eq!(std::fs::read_to_string(dir.path().join("a.txt")).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
