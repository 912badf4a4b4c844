//! Multi-period proactive security-constrained DC optimal power flow.
//!
//! Variables are per unit on the case base. For every period `t` and security
//! case `c` (0 is the base case) the problem carries dispatch `p_tgc` and bus
//! angles `θ_tc`; per period it carries contingency reserves `r±_tg` and
//! load-following reserves `w±_tg`. The objective is in dollars:
//!
//! ```text
//!   Σ_t Σ_c Σ_g (α_sqr p² + α_lin p + ζ)
//! + Σ_t Σ_g κ (p_tg0 − p_(t−1)g0)²          p_0g0 is the carried-in dispatch
//! + Σ_t Σ_g (η⁺ r⁺ + η⁻ r⁻ + μ⁺ w⁺ + μ⁻ w⁻)
//! ```

mod build;
mod check;
mod polish;
mod qp;

use alloc::vec::Vec;
use core::fmt;

use crate::conic::{Affine, Cone, ConicBuilder, ConicProgram};
use crate::grid::{BranchId, BusId, DeratingSet, Dispatch, GenId, NetworkSnapshot};

pub use build::{build_scopf, build_scopf_with_dispatch};
pub use check::{check_solution, SolutionCheckReport};
pub use polish::{polish, PolishFailure, PolishSettings, Polished};
pub use qp::to_qp;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildConfig {
    /// Horizon length; defaults to the case's period count.
    pub periods: Option<usize>,
    /// Price contingency and load-following reserves in the objective.
    pub include_reserve_pricing: bool,
    /// Remove generator-free islands from every snapshot before assembly.
    pub prune_dead_islands: bool,
    /// Feasibility tolerance for solution checks, MW (radians for angles).
    pub feasibility_tol: f64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            periods: None,
            include_reserve_pricing: true,
            prune_dead_islands: true,
            feasibility_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScopfError {
    #[error("horizon must contain at least one period")]
    NoPeriods,
    #[error("horizon of {periods} periods exceeds the {available} periods of the demand profiles")]
    PeriodsExceedProfile { periods: usize, available: usize },
    #[error("no bus survives in the base case of period {period}")]
    EmptyNetwork { period: usize },
    #[error("point has {found} entries, layout has {expected}")]
    Dimension { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarKind {
    Dispatch,
    Angle,
    ReserveUp,
    ReserveDown,
    RampUp,
    RampDown,
}

/// Identifies one column of the problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarKey {
    pub kind: VarKind,
    /// 0-based period.
    pub period: usize,
    /// Security case, 0 for the base case and for per-period reserves.
    pub case: usize,
    /// Generator or bus id.
    pub element: u32,
}

/// Column order: for each period, for each case, dispatch then angles (by
/// id); then that period's `r⁺`, `r⁻`, `w⁺`, `w⁻` blocks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VariableLayout {
    keys: Vec<VarKey>,
    index: alloc::collections::BTreeMap<VarKey, usize>,
}

impl VariableLayout {
    fn push(&mut self, key: VarKey) -> usize {
        let i = self.keys.len();
        self.keys.push(key);
        let fresh = self.index.insert(key, i).is_none();
        debug_assert!(fresh, "duplicate layout key {key:?}");
        i
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }
    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
    pub fn keys(&self) -> &[VarKey] {
        &self.keys
    }
    pub fn key(&self, i: usize) -> VarKey {
        self.keys[i]
    }
    pub fn index(&self, key: &VarKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn dispatch(&self, period: usize, case: usize, g: GenId) -> Option<usize> {
        self.index(&VarKey { kind: VarKind::Dispatch, period, case, element: g.0 })
    }
    pub fn angle(&self, period: usize, case: usize, b: BusId) -> Option<usize> {
        self.index(&VarKey { kind: VarKind::Angle, period, case, element: b.0 })
    }
    pub fn reserve(&self, kind: VarKind, period: usize, g: GenId) -> Option<usize> {
        self.index(&VarKey { kind, period, case: 0, element: g.0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstraintFamily {
    PowerBalance,
    AngleReference,
    Thermal,
    Capacity,
    LoadFollowingLimit,
    RampLink,
    ContingencyReserveLimit,
    ContingencyReserveLink,
    Transition,
}

impl ConstraintFamily {
    pub const ALL: [ConstraintFamily; 9] = [
        ConstraintFamily::PowerBalance,
        ConstraintFamily::AngleReference,
        ConstraintFamily::Thermal,
        ConstraintFamily::Capacity,
        ConstraintFamily::LoadFollowingLimit,
        ConstraintFamily::RampLink,
        ConstraintFamily::ContingencyReserveLimit,
        ConstraintFamily::ContingencyReserveLink,
        ConstraintFamily::Transition,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConstraintFamily::PowerBalance => "power_balance",
            ConstraintFamily::AngleReference => "angle_reference",
            ConstraintFamily::Thermal => "thermal",
            ConstraintFamily::Capacity => "capacity",
            ConstraintFamily::LoadFollowingLimit => "load_following_limit",
            ConstraintFamily::RampLink => "ramp_link",
            ConstraintFamily::ContingencyReserveLimit => "contingency_reserve_limit",
            ConstraintFamily::ContingencyReserveLink => "contingency_reserve_link",
            ConstraintFamily::Transition => "transition",
        }
    }

    /// Multiplier from row units to reported units (MW, or radians for angles).
    pub fn unit(self, base_mva: f64) -> f64 {
        match self {
            ConstraintFamily::AngleReference => 1.0,
            _ => base_mva,
        }
    }
}

impl fmt::Display for ConstraintFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `lower ≤ Σ coef·x ≤ upper`; equal bounds make an equality.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub family: ConstraintFamily,
    pub terms: Vec<(usize, f64)>,
    pub lower: f64,
    pub upper: f64,
}

impl LinearConstraint {
    pub fn is_equality(&self) -> bool {
        self.lower == self.upper
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, v)| v * x[i]).sum()
    }

    pub fn violation(&self, x: &[f64]) -> f64 {
        let v = self.value(x);
        (self.lower - v).max(v - self.upper).max(0.0)
    }
}

/// Operating cost of one dispatch variable, coefficients per unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispatchTerm {
    pub var: usize,
    pub generator: GenId,
    pub alpha_sqr: f64,
    pub alpha_lin: f64,
    pub zeta: f64,
    pub p_min: f64,
    pub p_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WearAnchor {
    /// Base-case dispatch of the previous period.
    Variable(usize),
    /// Carried-in dispatch before the first period, per unit.
    Fixed(f64),
}

/// `κ (p_current − previous)²`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WearTerm {
    pub generator: GenId,
    pub previous: WearAnchor,
    pub current: usize,
    pub kappa: f64,
}

impl WearTerm {
    /// `current − previous` as an affine expression.
    pub fn difference(&self) -> Affine {
        match self.previous {
            WearAnchor::Variable(prev) => Affine::new(alloc::vec![(self.current, 1.0), (prev, -1.0)], 0.0),
            WearAnchor::Fixed(p0) => Affine::new(alloc::vec![(self.current, 1.0)], -p0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScopfObjective {
    pub dispatch: Vec<DispatchTerm>,
    pub wear: Vec<WearTerm>,
    /// Linear reserve prices, $ per unit.
    pub reserve: Vec<(usize, f64)>,
}

impl ScopfObjective {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let op: f64 = self
            .dispatch
            .iter()
            .map(|d| {
                let p = x[d.var];
                d.alpha_sqr * p * p + d.alpha_lin * p + d.zeta
            })
            .sum();
        let wear: f64 = self
            .wear
            .iter()
            .map(|w| {
                let diff = w.difference().eval(x);
                w.kappa * diff * diff
            })
            .sum();
        let reserve: f64 = self.reserve.iter().map(|&(i, c)| c * x[i]).sum();
        op + wear + reserve
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScopfProblem {
    pub layout: VariableLayout,
    pub objective: ScopfObjective,
    pub constraints: Vec<LinearConstraint>,
    /// `snapshots[t][c]`, after island pruning when enabled.
    pub snapshots: Vec<Vec<NetworkSnapshot>>,
    /// Demand dropped with dead islands, `[t][c]`, MW.
    pub shed_load_mw: Vec<Vec<f64>>,
    /// Dispatch in effect before the first period, MW.
    pub initial_dispatch: Dispatch,
    pub step: usize,
    pub derate_targets: DeratingSet,
    pub base_mva: f64,
}

impl ScopfProblem {
    pub fn periods(&self) -> usize {
        self.snapshots.len()
    }

    pub fn cases(&self, period: usize) -> usize {
        self.snapshots[period].len()
    }

    /// Dispatch of case `c` in period `t`, MW.
    pub fn dispatch(&self, x: &[f64], t: usize, c: usize) -> Dispatch {
        self.snapshots[t][c]
            .generator_ids()
            .filter_map(|g| self.layout.dispatch(t, c, g).map(|i| (g, x[i] * self.base_mva)))
            .collect()
    }

    /// Angles of case `c` in period `t`, ordered like the snapshot's buses.
    pub fn angles(&self, x: &[f64], t: usize, c: usize) -> Vec<f64> {
        self.snapshots[t][c]
            .bus_ids
            .iter()
            .map(|&b| x[self.layout.angle(t, c, b).expect("every snapshot bus has an angle")])
            .collect()
    }

    /// Branch flows of case `c` in period `t`, MW.
    pub fn flows(&self, x: &[f64], t: usize, c: usize) -> Vec<(BranchId, f64)> {
        let snap = &self.snapshots[t][c];
        let f = snap.flows(&self.angles(x, t, c));
        snap.branch_ids().zip(f).map(|(id, v)| (id, v * self.base_mva)).collect()
    }

    /// Adds every linear constraint to a conic builder whose first columns
    /// are this problem's variables.
    pub fn add_linear_rows(&self, builder: &mut ConicBuilder) {
        for row in &self.constraints {
            if row.is_equality() {
                builder.zero(Affine::new(row.terms.clone(), -row.lower));
                continue;
            }
            if row.upper.is_finite() {
                let neg = row.terms.iter().map(|&(i, v)| (i, -v)).collect();
                builder.nonneg(Affine::new(neg, row.upper));
            }
            if row.lower.is_finite() {
                builder.nonneg(Affine::new(row.terms.clone(), -row.lower));
            }
        }
    }

    /// Multipliers of the rows [`add_linear_rows`](Self::add_linear_rows)
    /// put first into `program`, read from the dual point `y`: per
    /// constraint, the multiplier of its upper side and of its lower side,
    /// zero where a side is absent. Equalities report theirs as the upper
    /// side.
    pub fn linear_row_duals(&self, program: &ConicProgram, y: &[f64]) -> Vec<(f64, f64)> {
        let zeros = match program.cones().first() {
            Some(Cone::Zero(k)) => *k,
            _ => 0,
        };
        let (mut z, mut nn) = (0, zeros);
        self.constraints
            .iter()
            .map(|row| {
                if row.is_equality() {
                    z += 1;
                    return (y[z - 1], 0.0);
                }
                let mut side = |finite: bool| {
                    if finite {
                        nn += 1;
                        y[nn - 1]
                    } else {
                        0.0
                    }
                };
                let up = side(row.upper.is_finite());
                let lo = side(row.lower.is_finite());
                (up, lo)
            })
            .collect()
    }

    /// The objective's linear part and constant on a builder.
    pub fn add_linear_objective(&self, builder: &mut ConicBuilder) {
        for d in &self.objective.dispatch {
            builder.add_cost(d.var, d.alpha_lin);
            builder.add_offset(d.zeta);
        }
        for &(i, c) in &self.objective.reserve {
            builder.add_cost(i, c);
        }
    }
}
