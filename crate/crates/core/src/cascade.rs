//! Step-by-step proactive re-dispatch along a hurricane schedule.
//!
//! Step `k` chooses an operating point on the network that survived batch
//! `k − 1`, secure against the elements batch `k` takes out, with the
//! branches batch `k + 1` will take derated. Its base-case dispatch becomes
//! the starting dispatch of step `k + 1`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::conic::{solve, solve_warm, SolverResult, SolverSettings, SolverStatus, WarmStart};
use crate::grid::{build_snapshot, prune_dead_islands, BranchId, DeratingSet, Dispatch, GridCase};
use crate::relax::{lift_to_conic_with, recover_and_gap, LiftConfig, DEFAULT_RANK_TOL};
use crate::schedule::{resolve_step, HurricaneSchedule, ScheduleError, StepResolution};
use crate::scopf::{build_scopf_with_dispatch, check_solution, polish, to_qp, BuildConfig, PolishSettings, ScopfError, ScopfProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RelaxMode {
    /// Lifted conic relaxation; the recovered dispatch is checked against
    /// the original constraints.
    #[default]
    Sdp,
    /// The exact convex program.
    Qp,
    /// Both, with the exact program as the reference optimum.
    Both,
}

impl RelaxMode {
    pub fn name(self) -> &'static str {
        match self {
            RelaxMode::Sdp => "sdp",
            RelaxMode::Qp => "qp",
            RelaxMode::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeConfig {
    pub derate_fraction: f64,
    pub relax_mode: RelaxMode,
    pub stop_on_infeasible: bool,
    pub build: BuildConfig,
    pub lift: LiftConfig,
    pub solver: SolverSettings,
    pub rank_tol: f64,
    /// Also solve each step without derating to report flows before mitigation.
    pub report_unmitigated: bool,
    /// Keep last-period flows of every security case, not only the base case.
    pub report_contingency_flows: bool,
    /// Refine the solver's point on its active constraints; `None` keeps it as is.
    pub polish: Option<PolishSettings>,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            derate_fraction: crate::schedule::DEFAULT_DERATE_FRACTION,
            relax_mode: RelaxMode::default(),
            stop_on_infeasible: false,
            build: BuildConfig::default(),
            lift: LiftConfig::default(),
            solver: SolverSettings::default(),
            rank_tol: DEFAULT_RANK_TOL,
            report_unmitigated: true,
            report_contingency_flows: false,
            polish: Some(PolishSettings::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CascadeError {
    #[error("derate fraction {0} outside (0, 1]")]
    DerateFraction(f64),
    #[error("invalid solver settings")]
    SolverSettings,
    #[error("sweep fractions must be strictly descending within (0, 1]")]
    SweepFractions,
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Scopf(#[from] ScopfError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Feasible,
    Infeasible,
    Error,
}

impl fmt::Display for StepStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepStatus::Feasible => "feasible",
            StepStatus::Infeasible => "infeasible",
            StepStatus::Error => "error",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowRecord {
    pub branch: BranchId,
    /// MW.
    pub flow: f64,
    pub limit: f64,
    pub effective_limit: f64,
}

/// Outcome of one solve of a step's problem.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSolution {
    pub status: StepStatus,
    /// Objective of the original problem at the solution, $.
    pub cost: Option<f64>,
    /// Base-case dispatch of the last period, MW.
    pub dispatch: Option<Dispatch>,
    /// Base-case flows of the last period.
    pub flows: Vec<FlowRecord>,
    /// Last-period flows of security cases `1..`, when requested.
    pub contingency_flows: Vec<Vec<FlowRecord>>,
    pub rank1_residual: Option<f64>,
    pub gap_percent: Option<f64>,
    pub gap_percent_printed: Option<f64>,
    pub relaxed_objective: Option<f64>,
    pub exact_objective: Option<f64>,
    pub max_violation_mw: Option<f64>,
    /// Whether the reported point came out of active-set refinement.
    pub polished: bool,
    pub iterations: usize,
    pub solve_time: f64,
    pub message: Option<String>,
    /// Primal-dual point of the solve that decided the status, for warm starts.
    pub warm: Option<WarmStart>,
}

impl StepSolution {
    fn failed(message: String) -> Self {
        Self {
            status: StepStatus::Error,
            cost: None,
            dispatch: None,
            flows: Vec::new(),
            contingency_flows: Vec::new(),
            rank1_residual: None,
            gap_percent: None,
            gap_percent_printed: None,
            relaxed_objective: None,
            exact_objective: None,
            max_violation_mw: None,
            polished: false,
            iterations: 0,
            solve_time: 0.0,
            message: Some(message),
            warm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub step: usize,
    pub lost_buses: usize,
    pub lost_branches: usize,
    pub lost_generators: usize,
    pub status: StepStatus,
    pub operation_cost: Option<f64>,
    /// Demand in generator-free islands once the step's batch lands, MW.
    pub shed_load_mw: f64,
    pub flows: Vec<FlowRecord>,
    /// Last-period flows of security cases `1..`, when requested.
    pub contingency_flows: Vec<Vec<FlowRecord>>,
    /// Flows of the same step solved without derating, when requested.
    pub unmitigated_flows: Option<Vec<FlowRecord>>,
    pub rank1_residual: Option<f64>,
    pub gap_percent: Option<f64>,
    pub gap_percent_printed: Option<f64>,
    pub polished: bool,
    pub solve_time: f64,
    pub iterations: usize,
    pub derate_targets: Vec<BranchId>,
    pub initial_dispatch: Dispatch,
    pub dispatch: Option<Dispatch>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    pub case_id: String,
    pub schedule_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeReport {
    pub provenance: Provenance,
    pub config: CascadeConfig,
    pub steps: Vec<StepReport>,
}

impl CascadeReport {
    pub fn any_infeasible(&self) -> bool {
        self.steps.iter().any(|s| s.status == StepStatus::Infeasible)
    }
    pub fn any_error(&self) -> bool {
        self.steps.iter().any(|s| s.status == StepStatus::Error)
    }
}

fn validate(config: &CascadeConfig) -> Result<(), CascadeError> {
    if !(config.derate_fraction > 0.0 && config.derate_fraction <= 1.0) {
        return Err(CascadeError::DerateFraction(config.derate_fraction));
    }
    if !config.solver.is_valid() {
        return Err(CascadeError::SolverSettings);
    }
    Ok(())
}

/// Runs every step of `schedule` in order, carrying the base-case dispatch
/// of each feasible step into the next.
pub fn run_cascade(
    case: &GridCase,
    schedule: &HurricaneSchedule,
    config: &CascadeConfig,
) -> Result<CascadeReport, CascadeError> {
    validate(config)?;
    if let Some(e) = schedule.unknown_elements(case).into_iter().next() {
        return Err(e.into());
    }
    let mut dispatch = case.initial_dispatch();
    let mut steps = Vec::with_capacity(schedule.len());
    for k in 1..=schedule.len() {
        let report = solve_step(case, schedule, k, &dispatch, config)?;
        let stop = report.status != StepStatus::Feasible && config.stop_on_infeasible;
        if let Some(d) = &report.dispatch {
            dispatch = d.clone();
        }
        steps.push(report);
        if stop {
            break;
        }
    }
    Ok(CascadeReport {
        provenance: Provenance::default(),
        config: *config,
        steps,
    })
}

/// Builds and solves step `k` starting from `initial` (MW).
pub fn solve_step(
    case: &GridCase,
    schedule: &HurricaneSchedule,
    k: usize,
    initial: &Dispatch,
    config: &CascadeConfig,
) -> Result<StepReport, CascadeError> {
    validate(config)?;
    let step = resolve_step(schedule, case, k)?.with_derate_fraction(config.derate_fraction);
    let mitigated = match solve_resolution(case, &step, initial, config, None) {
        Err(CascadeError::Scopf(e)) => StepSolution::failed(e.to_string()),
        other => other?,
    };

    let unmitigated_flows = if !config.report_unmitigated {
        None
    } else if step.derate_targets.is_empty() || config.derate_fraction == 1.0 {
        Some(mitigated.flows.clone())
    } else {
        let plain = solve_resolution(case, &step.with_derate_fraction(1.0), initial, config, None).ok();
        plain.filter(|p| p.status == StepStatus::Feasible).map(|p| p.flows)
    };

    let last = config.build.periods.unwrap_or(case.period_count()).max(1) - 1;
    let after = build_snapshot(case, &step.applied_outages, &DeratingSet::new(), last);
    let (_, shed_load_mw) = prune_dead_islands(&after);

    let lost = &step.applied_outages;
    Ok(StepReport {
        step: k,
        lost_buses: lost.buses.len(),
        lost_branches: lost.branches.len(),
        lost_generators: lost.generators.len(),
        status: mitigated.status,
        operation_cost: mitigated.cost,
        shed_load_mw,
        flows: mitigated.flows,
        contingency_flows: mitigated.contingency_flows,
        unmitigated_flows,
        rank1_residual: mitigated.rank1_residual,
        gap_percent: mitigated.gap_percent,
        gap_percent_printed: mitigated.gap_percent_printed,
        polished: mitigated.polished,
        solve_time: mitigated.solve_time,
        iterations: mitigated.iterations,
        derate_targets: step.derate_targets.keys().copied().collect(),
        initial_dispatch: initial.clone(),
        dispatch: mitigated.dispatch,
        message: mitigated.message,
    })
}

/// Builds and solves the problem of one resolved step.
pub fn solve_resolution(
    case: &GridCase,
    step: &StepResolution,
    initial: &Dispatch,
    config: &CascadeConfig,
    warm: Option<&WarmStart>,
) -> Result<StepSolution, CascadeError> {
    let problem = build_scopf_with_dispatch(case, step, &config.build, initial)?;
    Ok(solve_problem(&problem, config, warm))
}

fn status_of(res: &SolverResult) -> (StepStatus, Option<String>) {
    match res.status {
        SolverStatus::Optimal => (StepStatus::Feasible, None),
        SolverStatus::PrimalInfeasible => (StepStatus::Infeasible, None),
        SolverStatus::DualInfeasible => (StepStatus::Error, Some("objective unbounded below".to_string())),
        SolverStatus::MaxIterations => (
            StepStatus::Error,
            Some(alloc::format!(
                "iteration limit {} reached (primal {:.2e}, dual {:.2e}, gap {:.2e})",
                res.iterations,
                res.residuals.primal,
                res.residuals.dual,
                res.residuals.gap
            )),
        ),
    }
}

fn flow_records(problem: &ScopfProblem, x: &[f64], c: usize) -> Vec<FlowRecord> {
    let t = problem.periods() - 1;
    let snap = &problem.snapshots[t][c];
    let base = problem.base_mva;
    problem
        .flows(x, t, c)
        .into_iter()
        .zip(&snap.branches)
        .map(|((branch, flow), br)| FlowRecord {
            branch,
            flow,
            limit: br.flow_limit * base,
            effective_limit: br.effective_limit * base,
        })
        .collect()
}

/// Solves an assembled problem in the configured mode.
pub fn solve_problem(problem: &ScopfProblem, config: &CascadeConfig, warm: Option<&WarmStart>) -> StepSolution {
    let tol = config.build.feasibility_tol;
    let mut out = StepSolution::failed(String::new());
    out.message = None;
    let n = problem.layout.len();
    let last = problem.periods() - 1;

    let exact = match config.relax_mode {
        RelaxMode::Qp | RelaxMode::Both => {
            let program = to_qp(problem);
            let res = solve_warm(&program, &config.solver, warm);
            out.iterations += res.iterations;
            out.solve_time += res.solve_time;
            Some((program, res))
        }
        RelaxMode::Sdp => None,
    };
    let relaxed = match config.relax_mode {
        RelaxMode::Sdp | RelaxMode::Both => {
            let (lifted, program) = lift_to_conic_with(problem.clone(), &config.lift);
            let res = match (config.relax_mode, warm) {
                (RelaxMode::Sdp, Some(w)) => solve_warm(&program, &config.solver, Some(w)),
                _ => solve(&program, &config.solver),
            };
            out.iterations += res.iterations;
            out.solve_time += res.solve_time;
            Some((lifted, program, res))
        }
        RelaxMode::Qp => None,
    };

    // The exact program decides the status when it was solved.
    let (program, decisive) = exact
        .as_ref()
        .map(|(p, r)| (p, r))
        .or(relaxed.as_ref().map(|(_, p, r)| (p, r)))
        .expect("at least one solve");
    let (status, message) = status_of(decisive);
    out.status = status;
    out.message = message;
    out.warm = Some(decisive.warm_start());
    if status != StepStatus::Feasible {
        return out;
    }

    let mut point: Vec<f64> = decisive.x[..n].to_vec();
    if let Some(settings) = &config.polish {
        let duals = problem.linear_row_duals(program, &decisive.y);
        match polish(problem, &point, Some(&duals), settings) {
            Ok(p) => {
                point = p.x;
                out.polished = true;
            }
            Err(e) => out.message = Some(alloc::format!("kept unrefined point: {e}")),
        }
    }
    if exact.is_some() || out.polished {
        out.exact_objective = Some(problem.objective.evaluate(&point));
    }
    if let Some((lifted, _, res)) = &relaxed {
        if res.is_optimal() {
            let f_opt = out
                .exact_objective
                .unwrap_or_else(|| problem.objective.evaluate(&res.x[..n]));
            match recover_and_gap(lifted, &res.x, Some(f_opt), config.rank_tol, tol) {
                Ok(r) => {
                    out.rank1_residual = Some(r.max_residual);
                    out.gap_percent = r.gap_percent;
                    out.gap_percent_printed = r.gap_percent_printed;
                    out.relaxed_objective = Some(r.relaxed_objective);
                }
                Err(e) => out.message = Some(e.to_string()),
            }
        } else if out.message.is_none() {
            let (s, m) = status_of(res);
            out.message = Some(m.unwrap_or_else(|| alloc::format!("relaxation finished {s}")));
        }
    }

    let check = match check_solution(problem, &point, tol) {
        Ok(c) => c,
        Err(e) => {
            out.status = StepStatus::Error;
            out.message = Some(e.to_string());
            return out;
        }
    };
    out.max_violation_mw = Some(check.max_violation());
    if !check.is_feasible() {
        out.status = StepStatus::Error;
        let worst = check.violated().map(|(f, v)| alloc::format!("{f} {v:.3e}")).collect::<Vec<_>>();
        out.message = Some(alloc::format!("solution violates {}", worst.join(", ")));
        return out;
    }
    out.cost = Some(check.objective);
    out.dispatch = Some(problem.dispatch(&point, last, 0));
    out.flows = flow_records(problem, &point, 0);
    if config.report_contingency_flows {
        out.contingency_flows = (1..problem.cases(last)).map(|c| flow_records(problem, &point, c)).collect();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub fraction: f64,
    pub status: StepStatus,
    pub cost: Option<f64>,
    pub flows: Vec<FlowRecord>,
    pub iterations: usize,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub step: usize,
    pub points: Vec<SweepPoint>,
    /// Smallest feasible fraction in the list.
    pub frontier: Option<f64>,
}

/// Solves step `k` at each derate fraction, warm-starting each solve from
/// the previous one.
pub fn derate_sweep(
    case: &GridCase,
    schedule: &HurricaneSchedule,
    k: usize,
    fractions: &[f64],
    initial: &Dispatch,
    config: &CascadeConfig,
) -> Result<SweepReport, CascadeError> {
    validate(config)?;
    let descending = fractions.windows(2).all(|w| w[0] > w[1]);
    let in_range = fractions.iter().all(|&f| f > 0.0 && f <= 1.0);
    if fractions.is_empty() || !descending || !in_range {
        return Err(CascadeError::SweepFractions);
    }
    let base = resolve_step(schedule, case, k)?;
    let mut points = Vec::with_capacity(fractions.len());
    let mut warm: Option<WarmStart> = None;
    for &fraction in fractions {
        let step = base.with_derate_fraction(fraction);
        let sol = match solve_resolution(case, &step, initial, config, warm.as_ref()) {
            Err(CascadeError::Scopf(e)) => StepSolution::failed(e.to_string()),
            other => other?,
        };
        if sol.status == StepStatus::Feasible {
            warm = sol.warm.clone();
        }
        points.push(SweepPoint {
            fraction,
            status: sol.status,
            cost: sol.cost,
            flows: sol.flows,
            iterations: sol.iterations,
            message: sol.message,
        });
    }
    let frontier = points
        .iter()
        .filter(|p| p.status == StepStatus::Feasible)
        .map(|p| p.fraction)
        .fold(None, |acc: Option<f64>, f| Some(acc.map_or(f, |a| a.min(f))));
    Ok(SweepReport { step: k, points, frontier })
}
