//! Randomized small SCOPF instances.

use posture_core::conic::{solve, SolverSettings};
use posture_core::grid::{Branch, Bus, CaseData, CostModel, DeratingSet, ElementRef, Generator, GridCase, OutageSet};
use posture_core::grid::{BranchId, GenId};
use posture_core::schedule::StepResolution;
use posture_core::scopf::{build_scopf, to_qp, BuildConfig, ScopfProblem};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub case: GridCase,
    pub step: StepResolution,
    pub problem: ScopfProblem,
}

pub fn random_case(rng: &mut ChaCha8Rng, periods: usize) -> GridCase {
    let nb: u32 = rng.gen_range(3..=10);
    let ng: u32 = rng.gen_range(2..=4);

    let mut buses = Vec::new();
    for i in 1..=nb {
        let d = if rng.gen_bool(0.7) { rng.gen_range(5.0..30.0) } else { 0.0 };
        let mut bus = Bus::new(i, d);
        if periods > 1 {
            bus.demand_profile = Some((0..periods).map(|_| d * rng.gen_range(0.9..1.1)).collect());
        }
        buses.push(bus);
    }

    let mut pairs = Vec::new();
    for i in 2..=nb {
        pairs.push((rng.gen_range(1..i), i));
    }
    for _ in 0..rng.gen_range(0..=nb / 2) {
        let a = rng.gen_range(1..=nb);
        let b = rng.gen_range(1..=nb);
        if a != b {
            pairs.push((a.min(b), a.max(b)));
        }
    }
    let branches = pairs
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| Branch::new(k as u32 + 1, a, b, rng.gen_range(5.0..20.0), rng.gen_range(30.0..120.0)))
        .collect();

    let generators = (1..=ng)
        .map(|g| {
            let cost = CostModel {
                alpha_sqr: rng.gen_range(0.002..0.02),
                alpha_lin: rng.gen_range(10.0..40.0),
                zeta: rng.gen_range(0.0..50.0),
                kappa: rng.gen_range(0.01..0.2),
                eta_up: rng.gen_range(0.5..3.0),
                eta_down: rng.gen_range(0.5..3.0),
                mu_up: rng.gen_range(0.5..3.0),
                mu_down: rng.gen_range(0.5..3.0),
            };
            let p_min = rng.gen_range(0.0..20.0);
            let p_max = rng.gen_range(80.0..150.0);
            let mut gen = Generator::new(g, rng.gen_range(1..=nb), p_min, p_max, cost);
            gen.ramp_up = rng.gen_range(20.0..60.0);
            gen.ramp_down = rng.gen_range(20.0..60.0);
            gen.reserve_up = rng.gen_range(20.0..60.0);
            gen.reserve_down = rng.gen_range(20.0..60.0);
            gen.delta_min = rng.gen_range(20.0..60.0);
            gen.delta_max = rng.gen_range(20.0..60.0);
            gen.initial_dispatch = p_min + rng.gen_range(0.0..0.5) * (p_max - p_min);
            gen
        })
        .collect();

    let mut data = CaseData::new(100.0, buses, branches, generators);
    data.period_count = periods;
    GridCase::new(data).expect("generated case is valid")
}

pub fn random_step(rng: &mut ChaCha8Rng, case: &GridCase, max_contingencies: usize) -> StepResolution {
    let mut pool: Vec<ElementRef> = case.branches().iter().map(|b| ElementRef::Branch(b.id)).collect();
    if case.generators().len() >= 3 {
        pool.extend(case.generators().iter().map(|g| ElementRef::Generator(g.id)));
    }
    let k = rng.gen_range(1..=max_contingencies).min(pool.len());
    let chosen: Vec<_> = pool.choose_multiple(rng, k).copied().collect();
    StepResolution {
        step: 1,
        basecase_outages: OutageSet::new(),
        applied_outages: chosen.iter().copied().collect(),
        security_contingencies: chosen.into_iter().map(OutageSet::single).collect(),
        derate_targets: DeratingSet::new(),
    }
}

/// A random instance whose exact QP solves to optimality; `seed` indexes a
/// deterministic stream and infeasible draws are skipped.
pub fn feasible_instance(rng: &mut ChaCha8Rng, periods: usize, max_contingencies: usize) -> Instance {
    loop {
        let case = random_case(rng, periods);
        let step = random_step(rng, &case, max_contingencies);
        let problem = match build_scopf(&case, &step, &BuildConfig::default()) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let res = solve(&to_qp(&problem), &SolverSettings::default());
        if res.is_optimal() {
            return Instance { case, step, problem };
        }
    }
}

#[allow(dead_code)]
pub fn ids(case: &GridCase) -> (Vec<BranchId>, Vec<GenId>) {
    (
        case.branches().iter().map(|b| b.id).collect(),
        case.generators().iter().map(|g| g.id).collect(),
    )
}
