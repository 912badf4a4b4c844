use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use super::{
    BuildConfig, ConstraintFamily, DispatchTerm, LinearConstraint, ScopfError, ScopfObjective, ScopfProblem,
    VarKey, VarKind, VariableLayout, WearAnchor, WearTerm,
};
use crate::grid::{build_snapshot, prune_dead_islands, Dispatch, GenId, GridCase, NetworkSnapshot};
use crate::schedule::StepResolution;

/// Assembles the problem for one cascade step, starting from the case's
/// initial dispatch.
pub fn build_scopf(case: &GridCase, step: &StepResolution, config: &BuildConfig) -> Result<ScopfProblem, ScopfError> {
    build_scopf_with_dispatch(case, step, config, &case.initial_dispatch())
}

/// Assembles the problem for one cascade step with `initial` (MW) as the
/// dispatch carried into the first period. Generators missing from `initial`
/// fall back to their case value.
pub fn build_scopf_with_dispatch(
    case: &GridCase,
    step: &StepResolution,
    config: &BuildConfig,
    initial: &Dispatch,
) -> Result<ScopfProblem, ScopfError> {
    let periods = config.periods.unwrap_or(case.period_count());
    if periods == 0 {
        return Err(ScopfError::NoPeriods);
    }
    let available = case
        .buses()
        .iter()
        .filter_map(|b| b.demand_profile.as_ref().map(Vec::len))
        .min();
    if let Some(available) = available {
        if periods > available {
            return Err(ScopfError::PeriodsExceedProfile { periods, available });
        }
    }

    let cases = step.case_count();
    let outages: Vec<_> = (0..cases).map(|c| step.case_outages(c)).collect();
    let mut snapshots = Vec::with_capacity(periods);
    let mut shed = Vec::with_capacity(periods);
    for t in 0..periods {
        let mut row = Vec::with_capacity(cases);
        let mut shed_row = Vec::with_capacity(cases);
        for out in &outages {
            let snap = build_snapshot(case, out, &step.derate_targets, t);
            let (snap, lost) = if config.prune_dead_islands {
                prune_dead_islands(&snap)
            } else {
                (snap, 0.0)
            };
            row.push(snap);
            shed_row.push(lost);
        }
        if row[0].is_empty() {
            return Err(ScopfError::EmptyNetwork { period: t });
        }
        snapshots.push(row);
        shed.push(shed_row);
    }

    let base = case.base_mva();
    let mut b = Builder {
        layout: VariableLayout::default(),
        constraints: Vec::new(),
        objective: ScopfObjective::default(),
    };

    for (t, row) in snapshots.iter().enumerate() {
        for (c, snap) in row.iter().enumerate() {
            for g in snap.generator_ids() {
                b.layout.push(VarKey { kind: VarKind::Dispatch, period: t, case: c, element: g.0 });
            }
            for bus in &snap.bus_ids {
                b.layout.push(VarKey { kind: VarKind::Angle, period: t, case: c, element: bus.0 });
            }
        }
        let fleet = period_fleet(row);
        for kind in [VarKind::ReserveUp, VarKind::ReserveDown, VarKind::RampUp, VarKind::RampDown] {
            for g in &fleet {
                b.layout.push(VarKey { kind, period: t, case: 0, element: g.0 });
            }
        }
    }

    for (t, row) in snapshots.iter().enumerate() {
        for (c, snap) in row.iter().enumerate() {
            b.network_rows(snap, t, c);
            for g in snap.generator_ids() {
                let gen = case.generator(g).expect("snapshot generator exists in case");
                let p = b.layout.dispatch(t, c, g).expect("dispatch column");
                b.row(ConstraintFamily::Capacity, vec![(p, 1.0)], gen.p_min / base, gen.p_max / base);
                b.objective.dispatch.push(DispatchTerm {
                    var: p,
                    generator: g,
                    alpha_sqr: gen.cost.alpha_sqr * base * base,
                    alpha_lin: gen.cost.alpha_lin * base,
                    zeta: gen.cost.zeta,
                    p_min: gen.p_min / base,
                    p_max: gen.p_max / base,
                });
            }
        }

        for g in period_fleet(row) {
            let gen = case.generator(g).expect("fleet generator exists in case");
            let ix = |kind| b.layout.reserve(kind, t, g).expect("reserve column");
            let (ru, rd, wu, wd) = (ix(VarKind::ReserveUp), ix(VarKind::ReserveDown), ix(VarKind::RampUp), ix(VarKind::RampDown));
            b.row(ConstraintFamily::ContingencyReserveLimit, vec![(ru, 1.0)], 0.0, gen.reserve_up / base);
            b.row(ConstraintFamily::ContingencyReserveLimit, vec![(rd, 1.0)], 0.0, gen.reserve_down / base);
            b.row(ConstraintFamily::LoadFollowingLimit, vec![(wu, 1.0)], 0.0, gen.ramp_up / base);
            b.row(ConstraintFamily::LoadFollowingLimit, vec![(wd, 1.0)], 0.0, gen.ramp_down / base);
            if config.include_reserve_pricing {
                for (i, price) in [(ru, gen.cost.eta_up), (rd, gen.cost.eta_down), (wu, gen.cost.mu_up), (wd, gen.cost.mu_down)] {
                    if price != 0.0 {
                        b.objective.reserve.push((i, price * base));
                    }
                }
            }

            if let Some(p) = b.layout.dispatch(t, 0, g) {
                let previous = if t == 0 {
                    let p0 = initial.get(&g).copied().unwrap_or(gen.initial_dispatch);
                    Some(WearAnchor::Fixed(p0 / base))
                } else {
                    b.layout.dispatch(t - 1, 0, g).map(WearAnchor::Variable)
                };
                if let Some(previous) = previous {
                    let (mut up, mut down, constant) = match previous {
                        WearAnchor::Variable(q) => (vec![(p, 1.0), (q, -1.0)], vec![(q, 1.0), (p, -1.0)], 0.0),
                        WearAnchor::Fixed(p0) => (vec![(p, 1.0)], vec![(p, -1.0)], p0),
                    };
                    up.push((wu, -1.0));
                    down.push((wd, -1.0));
                    b.row(ConstraintFamily::RampLink, up, f64::NEG_INFINITY, constant);
                    b.row(ConstraintFamily::RampLink, down, f64::NEG_INFINITY, -constant);
                    b.objective.wear.push(WearTerm {
                        generator: g,
                        previous,
                        current: p,
                        kappa: gen.cost.kappa * base * base,
                    });
                }
            }

            let Some(p_base) = b.layout.dispatch(t, 0, g) else {
                continue;
            };
            for c in 1..row.len() {
                let Some(p) = b.layout.dispatch(t, c, g) else {
                    continue;
                };
                b.row(
                    ConstraintFamily::Transition,
                    vec![(p, 1.0), (p_base, -1.0)],
                    -gen.delta_min / base,
                    gen.delta_max / base,
                );
                b.row(ConstraintFamily::ContingencyReserveLink, vec![(p, 1.0), (p_base, -1.0), (ru, -1.0)], f64::NEG_INFINITY, 0.0);
                b.row(ConstraintFamily::ContingencyReserveLink, vec![(p_base, 1.0), (p, -1.0), (rd, -1.0)], f64::NEG_INFINITY, 0.0);
            }
        }
    }

    Ok(ScopfProblem {
        layout: b.layout,
        objective: b.objective,
        constraints: b.constraints,
        snapshots,
        shed_load_mw: shed.into_iter().map(|r| r.into_iter().map(|s| s * base).collect()).collect(),
        initial_dispatch: initial.clone(),
        step: step.step,
        derate_targets: step.derate_targets.clone(),
        base_mva: base,
    })
}

/// Generators in service in at least one case of the period.
fn period_fleet(row: &[NetworkSnapshot]) -> BTreeSet<GenId> {
    row.iter().flat_map(|s| s.generator_ids()).collect()
}

struct Builder {
    layout: VariableLayout,
    constraints: Vec<LinearConstraint>,
    objective: ScopfObjective,
}

impl Builder {
    fn row(&mut self, family: ConstraintFamily, terms: Vec<(usize, f64)>, lower: f64, upper: f64) {
        self.constraints.push(LinearConstraint { family, terms, lower, upper });
    }

    fn network_rows(&mut self, snap: &NetworkSnapshot, t: usize, c: usize) {
        let theta: Vec<usize> = snap
            .bus_ids
            .iter()
            .map(|&id| self.layout.angle(t, c, id).expect("angle column"))
            .collect();

        // B θ − Cᵀ p = −d − Aᵀ f_shift
        let mut rhs: Vec<f64> = snap.demand.iter().map(|d| -d).collect();
        snap.incidence.gemv_t(-1.0, &snap.shift_offsets, &mut rhs);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); snap.bus_ids.len()];
        for (j, col) in theta.iter().enumerate() {
            for (i, v) in snap.bus_susceptance.column(j) {
                rows[i].push((*col, v));
            }
        }
        for g in &snap.generators {
            let p = self.layout.dispatch(t, c, g.id).expect("dispatch column");
            rows[g.bus].push((p, -1.0));
        }
        for (terms, r) in rows.into_iter().zip(rhs) {
            self.row(ConstraintFamily::PowerBalance, terms, r, r);
        }

        for island in &snap.islands {
            self.row(ConstraintFamily::AngleReference, vec![(theta[island.reference], 1.0)], 0.0, 0.0);
        }

        for (br, &shift) in snap.branches.iter().zip(&snap.shift_offsets) {
            if !br.effective_limit.is_finite() {
                continue;
            }
            let terms = vec![(theta[br.from], br.susceptance), (theta[br.to], -br.susceptance)];
            self.row(ConstraintFamily::Thermal, terms, -br.effective_limit - shift, br.effective_limit - shift);
        }
    }
}
