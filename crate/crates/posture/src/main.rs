use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use posture::report::{self, RunManifest};
use posture::{read_case, read_schedule, validate_inputs, Error};
use posture_core::cascade::{derate_sweep, run_cascade, solve_step, CascadeConfig, CascadeReport, Provenance, RelaxMode};
use posture_core::grid::GridCase;
use posture_core::schedule::{Granularity, HurricaneSchedule};

/// Proactive security-constrained dispatch along a hurricane outage schedule.
#[derive(Parser)]
#[command(name = "posture", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every step of a schedule and write the cascade report.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Solve one step from the case's initial dispatch.
    SolveStep {
        #[command(flatten)]
        common: Common,
        /// 1-based step number.
        #[arg(long)]
        step: usize,
    },
    /// Solve one step at a descending list of derate fractions.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        step: usize,
        /// Comma-separated, strictly descending, within (0, 1].
        #[arg(long, value_delimiter = ',', default_value = "1.0,0.9,0.8,0.7,0.6,0.5,0.4,0.3,0.2,0.1")]
        fractions: Vec<f64>,
    },
    /// Check a case, and optionally a schedule against it.
    Validate {
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Sdp,
    Qp,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum GranularityArg {
    PerElement,
    Grouped,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    case: PathBuf,
    #[arg(long)]
    schedule: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "posture-out")]
    out: PathBuf,
    /// Derate fraction for next-step lines; defaults to the schedule's.
    #[arg(long)]
    derate: Option<f64>,
    #[arg(long, value_enum, default_value = "sdp")]
    mode: ModeArg,
    /// Overrides the schedule's granularity.
    #[arg(long, value_enum)]
    granularity: Option<GranularityArg>,
    /// Periods per step; defaults to the case's period count.
    #[arg(long)]
    periods: Option<usize>,
    /// Solver convergence tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Keep generator-free islands instead of shedding their load.
    #[arg(long)]
    no_prune: bool,
    #[arg(long)]
    stop_on_infeasible: bool,
    /// Also write last-period flows of every security case.
    #[arg(long)]
    verbose_flows: bool,
}

struct Inputs {
    case: GridCase,
    schedule: HurricaneSchedule,
    config: CascadeConfig,
    provenance: Provenance,
    manifest: RunManifest,
}

impl Common {
    fn load(&self, command: &str) -> Result<Inputs, Error> {
        let (case_id, case) = read_case(&self.case)?;
        let (schedule_id, mut schedule) = read_schedule(&self.schedule)?;
        let mut manifest = RunManifest::new(command, &self.out);
        manifest.inputs.insert("case".into(), self.case.clone());
        manifest.inputs.insert("schedule".into(), self.schedule.clone());

        let mut config = CascadeConfig {
            derate_fraction: self.derate.unwrap_or(schedule.derate_fraction()),
            relax_mode: match self.mode {
                ModeArg::Sdp => RelaxMode::Sdp,
                ModeArg::Qp => RelaxMode::Qp,
                ModeArg::Both => RelaxMode::Both,
            },
            stop_on_infeasible: self.stop_on_infeasible,
            report_contingency_flows: self.verbose_flows,
            ..CascadeConfig::default()
        };
        config.build.periods = self.periods;
        config.build.prune_dead_islands = !self.no_prune;
        if let Some(tol) = self.tol {
            config.solver.eps_primal = tol;
            config.solver.eps_dual = tol;
            config.solver.eps_gap = tol;
        }
        if let Some(g) = self.granularity {
            schedule = schedule.with_granularity(match g {
                GranularityArg::PerElement => Granularity::PerElement,
                GranularityArg::Grouped => Granularity::Grouped,
            });
        }

        let o = &mut manifest.overrides;
        if let Some(d) = self.derate {
            o.insert("derate".into(), d.to_string());
        }
        o.insert("mode".into(), config.relax_mode.name().into());
        if let Some(g) = self.granularity {
            let name = match g {
                GranularityArg::PerElement => "per-element",
                GranularityArg::Grouped => "grouped",
            };
            o.insert("granularity".into(), name.into());
        }
        if let Some(p) = self.periods {
            o.insert("periods".into(), p.to_string());
        }
        if let Some(t) = self.tol {
            o.insert("tol".into(), t.to_string());
        }
        for (flag, on) in [
            ("no_prune", self.no_prune),
            ("stop_on_infeasible", self.stop_on_infeasible),
            ("verbose_flows", self.verbose_flows),
        ] {
            if on {
                o.insert(flag.into(), "true".into());
            }
        }

        Ok(Inputs {
            case,
            schedule,
            config,
            provenance: Provenance { case_id, schedule_id },
            manifest,
        })
    }
}

fn finish_cascade(report: &CascadeReport, manifest: &RunManifest, out: &Path) -> Result<ExitCode, Error> {
    let written = report::write_cascade(out, report, manifest)?;
    print!("{}", report::cascade_table(report));
    for p in &written {
        info!("wrote {}", p.display());
    }
    for s in report.steps.iter().filter(|s| s.message.is_some()) {
        warn!("step {}: {}", s.step, s.message.as_deref().unwrap_or_default());
    }
    Ok(if report.any_error() {
        ExitCode::from(1)
    } else if report.any_infeasible() {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn execute(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Run { common } => {
            let inputs = common.load("run")?;
            let mut report = run_cascade(&inputs.case, &inputs.schedule, &inputs.config)?;
            report.provenance = inputs.provenance;
            finish_cascade(&report, &inputs.manifest, &common.out)
        }
        Command::SolveStep { common, step } => {
            let mut inputs = common.load("solve-step")?;
            inputs.manifest.overrides.insert("step".into(), step.to_string());
            if let Some(e) = inputs.schedule.unknown_elements(&inputs.case).into_iter().next() {
                return Err(e.into());
            }
            let initial = inputs.case.initial_dispatch();
            let step = solve_step(&inputs.case, &inputs.schedule, step, &initial, &inputs.config)?;
            let report = CascadeReport {
                provenance: inputs.provenance,
                config: inputs.config,
                steps: vec![step],
            };
            finish_cascade(&report, &inputs.manifest, &common.out)
        }
        Command::Sweep { common, step, fractions } => {
            let mut inputs = common.load("sweep")?;
            let o = &mut inputs.manifest.overrides;
            o.insert("step".into(), step.to_string());
            let list: Vec<String> = fractions.iter().map(f64::to_string).collect();
            o.insert("fractions".into(), list.join(","));
            if let Some(e) = inputs.schedule.unknown_elements(&inputs.case).into_iter().next() {
                return Err(e.into());
            }
            let initial = inputs.case.initial_dispatch();
            let sweep = derate_sweep(&inputs.case, &inputs.schedule, step, &fractions, &initial, &inputs.config)?;
            let written = report::write_sweep(&common.out, &sweep, &inputs.manifest)?;
            print!("{}", report::sweep_csv(&sweep)?);
            for p in &written {
                info!("wrote {}", p.display());
            }
            match sweep.frontier {
                Some(f) => {
                    println!("frontier: {f}");
                    Ok(ExitCode::SUCCESS)
                }
                None => {
                    println!("frontier: none");
                    Ok(ExitCode::from(2))
                }
            }
        }
        Command::Validate { case, schedule } => {
            let findings = validate_inputs(&case, schedule.as_deref());
            for f in &findings {
                println!("FAIL {f}");
            }
            if findings.is_empty() {
                println!("PASS {}", case.display());
                if let Some(s) = &schedule {
                    println!("PASS {}", s.display());
                }
                Ok(ExitCode::SUCCESS)
            } else {
                println!("{} finding(s)", findings.len());
                Ok(ExitCode::from(1))
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("POSTURE_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
