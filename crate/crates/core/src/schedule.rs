//! Hurricane progression as an ordered list of cumulative outage batches.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::grid::{BranchId, DeratingSet, ElementRef, GridCase, OutageSet};

/// How the newly failed elements of a batch become security contingencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum Granularity {
    /// One single-outage case per newly failed element.
    #[default]
    PerElement,
    /// The whole set of new failures as one case.
    Grouped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyBatch {
    /// 1-based step number.
    pub index: usize,
    /// Everything lost up to and including this step.
    pub outages: OutageSet,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScheduleError {
    #[error("schedule has no batches")]
    Empty,
    #[error("derate fraction {0} outside (0, 1]")]
    DerateFraction(f64),
    #[error("batch {batch} drops {element} listed in batch {previous}")]
    NotCumulative { batch: usize, previous: usize, element: ElementRef },
    #[error("step {step} outside 1..={count}")]
    StepOutOfRange { step: usize, count: usize },
    #[error("batch {batch} references unknown {element}")]
    UnknownElement { batch: usize, element: ElementRef },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HurricaneSchedule {
    batches: Vec<ContingencyBatch>,
    derate_fraction: f64,
    granularity: Granularity,
}

pub const DEFAULT_DERATE_FRACTION: f64 = 0.7;

impl HurricaneSchedule {
    /// Builds a schedule from cumulative batches; each batch must contain the
    /// previous one.
    pub fn new(batches: Vec<OutageSet>, derate_fraction: f64, granularity: Granularity) -> Result<Self, ScheduleError> {
        if batches.is_empty() {
            return Err(ScheduleError::Empty);
        }
        if !(derate_fraction > 0.0 && derate_fraction <= 1.0) {
            return Err(ScheduleError::DerateFraction(derate_fraction));
        }
        for k in 1..batches.len() {
            if let Some(element) = batches[k - 1].difference(&batches[k]).elements().next() {
                return Err(ScheduleError::NotCumulative {
                    batch: k + 1,
                    previous: k,
                    element,
                });
            }
        }
        Ok(Self {
            batches: batches
                .into_iter()
                .enumerate()
                .map(|(i, outages)| ContingencyBatch { index: i + 1, outages })
                .collect(),
            derate_fraction,
            granularity,
        })
    }

    /// Builds a schedule from per-step increments by accumulating them.
    pub fn from_increments(
        increments: Vec<OutageSet>,
        derate_fraction: f64,
        granularity: Granularity,
    ) -> Result<Self, ScheduleError> {
        let mut acc = OutageSet::new();
        let cumulative = increments
            .iter()
            .map(|inc| {
                acc.extend(inc);
                acc.clone()
            })
            .collect();
        Self::new(cumulative, derate_fraction, granularity)
    }

    pub fn batches(&self) -> &[ContingencyBatch] {
        &self.batches
    }
    pub fn len(&self) -> usize {
        self.batches.len()
    }
    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }
    pub fn derate_fraction(&self) -> f64 {
        self.derate_fraction
    }
    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn with_derate_fraction(mut self, fraction: f64) -> Result<Self, ScheduleError> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(ScheduleError::DerateFraction(fraction));
        }
        self.derate_fraction = fraction;
        Ok(self)
    }

    pub fn with_granularity(mut self, granularity: Granularity) -> Self {
        self.granularity = granularity;
        self
    }

    /// Cumulative outages after step `k` (`k = 0` is the intact network).
    pub fn outages_after(&self, k: usize) -> OutageSet {
        if k == 0 {
            OutageSet::new()
        } else {
            self.batches[k - 1].outages.clone()
        }
    }

    /// Elements first lost at step `k`.
    pub fn new_elements(&self, k: usize) -> OutageSet {
        self.outages_after(k).difference(&self.outages_after(k - 1))
    }

    /// Every reference to an element the case does not contain.
    pub fn unknown_elements(&self, case: &GridCase) -> Vec<ScheduleError> {
        let mut seen = BTreeMap::new();
        for b in &self.batches {
            for e in b.outages.elements() {
                if !case.contains(e) {
                    seen.entry(e).or_insert(b.index);
                }
            }
        }
        let mut out: Vec<_> = seen
            .into_iter()
            .map(|(element, batch)| ScheduleError::UnknownElement { batch, element })
            .collect();
        out.sort_by_key(|e| match e {
            ScheduleError::UnknownElement { batch, element } => (*batch, *element),
            _ => unreachable!(),
        });
        out
    }
}

/// What step `k` of the cascade optimizes against.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResolution {
    pub step: usize,
    /// Outages in effect when the step's operating point is chosen: the
    /// surviving network handed over by the previous step.
    pub basecase_outages: OutageSet,
    /// Cumulative outages of batch `k`, in effect once the step's batch lands.
    pub applied_outages: OutageSet,
    /// Security contingencies, each the set of elements failing in that case.
    pub security_contingencies: Vec<OutageSet>,
    /// Branches lost in batch `k + 1`, mapped to their rating multiplier.
    pub derate_targets: DeratingSet,
}

impl StepResolution {
    /// Outages of security case `c` (0 is the base case).
    pub fn case_outages(&self, c: usize) -> OutageSet {
        if c == 0 {
            self.basecase_outages.clone()
        } else {
            self.basecase_outages.union(&self.security_contingencies[c - 1])
        }
    }

    /// Number of cases including the base case.
    pub fn case_count(&self) -> usize {
        1 + self.security_contingencies.len()
    }

    /// Same step with every derate target set to `fraction`.
    pub fn with_derate_fraction(&self, fraction: f64) -> Self {
        let mut out = self.clone();
        out.derate_targets.values_mut().for_each(|f| *f = fraction);
        out
    }
}

/// Resolves step `k` (1-based): base case on the network surviving batch
/// `k − 1`, one security contingency per newly failed element of batch `k`
/// (or one grouped case), and derating of the branches batch `k + 1` will take.
pub fn resolve_step(schedule: &HurricaneSchedule, case: &GridCase, k: usize) -> Result<StepResolution, ScheduleError> {
    let count = schedule.len();
    if k < 1 || k > count {
        return Err(ScheduleError::StepOutOfRange { step: k, count });
    }
    for b in &schedule.batches[..k.min(count - 1) + 1] {
        if let Some(element) = b.outages.elements().find(|&e| !case.contains(e)) {
            return Err(ScheduleError::UnknownElement { batch: b.index, element });
        }
    }

    let basecase_outages = schedule.outages_after(k - 1);
    let applied_outages = schedule.outages_after(k);
    let fresh = schedule.new_elements(k);
    let security_contingencies = if fresh.is_empty() {
        Vec::new()
    } else {
        match schedule.granularity() {
            Granularity::PerElement => fresh.elements().map(OutageSet::single).collect(),
            Granularity::Grouped => alloc::vec![fresh],
        }
    };

    let mut derate_targets = DeratingSet::new();
    if k < count {
        let next = schedule.new_elements(k + 1);
        for &id in &next.branches {
            if survives(case, &applied_outages, id) {
                derate_targets.insert(id, schedule.derate_fraction());
            }
        }
    }

    Ok(StepResolution {
        step: k,
        basecase_outages,
        applied_outages,
        security_contingencies,
        derate_targets,
    })
}

fn survives(case: &GridCase, outages: &OutageSet, id: BranchId) -> bool {
    let Some(br) = case.branch(id) else {
        return false;
    };
    !outages.branches.contains(&id) && !outages.buses.contains(&br.from_bus) && !outages.buses.contains(&br.to_bus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Branch, Bus, BusId, CaseData, CostModel, GenId, Generator};
    use alloc::vec;

    fn ring(n: u32) -> GridCase {
        let buses = (1..=n).map(|i| Bus::new(i, 10.0)).collect();
        let branches = (1..=n).map(|i| Branch::new(i, i, i % n + 1, 10.0, 100.0)).collect();
        let gens = vec![Generator::new(1, 1, 0.0, 500.0, CostModel::default())];
        GridCase::new(CaseData::new(100.0, buses, branches, gens)).unwrap()
    }

    fn branches(ids: &[u32]) -> OutageSet {
        ids.iter().map(|&i| ElementRef::Branch(BranchId(i))).collect()
    }

    #[test]
    fn non_cumulative_rejected() {
        let err = HurricaneSchedule::new(vec![branches(&[]), branches(&[3]), branches(&[4])], 0.7, Granularity::PerElement);
        assert_eq!(
            err,
            Err(ScheduleError::NotCumulative { batch: 3, previous: 2, element: ElementRef::Branch(BranchId(3)) })
        );
    }

    #[test]
    fn increments_accumulate() {
        let s = HurricaneSchedule::from_increments(vec![branches(&[1]), branches(&[2])], 0.7, Granularity::PerElement).unwrap();
        assert_eq!(s.batches()[1].outages, branches(&[1, 2]));
    }

    #[test]
    fn fraction_validated() {
        assert_eq!(
            HurricaneSchedule::new(vec![OutageSet::new()], 0.0, Granularity::PerElement),
            Err(ScheduleError::DerateFraction(0.0))
        );
        assert!(HurricaneSchedule::new(vec![OutageSet::new()], 1.0, Granularity::PerElement).is_ok());
    }

    #[test]
    fn step_with_one_new_branch() {
        let case = ring(6);
        let s = HurricaneSchedule::new(vec![branches(&[]), branches(&[2]), branches(&[2, 4, 5])], 0.7, Granularity::PerElement)
            .unwrap();
        let r = resolve_step(&s, &case, 2).unwrap();
        assert_eq!(r.security_contingencies, vec![branches(&[2])]);
        assert_eq!(r.applied_outages, branches(&[2]));
        assert!(r.basecase_outages.is_empty());
        assert_eq!(r.derate_targets, DeratingSet::from([(BranchId(4), 0.7), (BranchId(5), 0.7)]));
    }

    #[test]
    fn first_step_derates_next_batch() {
        let case = ring(10);
        let s = HurricaneSchedule::new(vec![branches(&[]), branches(&[7, 9])], 0.7, Granularity::PerElement).unwrap();
        let r = resolve_step(&s, &case, 1).unwrap();
        assert!(r.security_contingencies.is_empty());
        assert_eq!(r.derate_targets.keys().copied().collect::<Vec<_>>(), vec![BranchId(7), BranchId(9)]);
        assert!(r.derate_targets.values().all(|&f| f == 0.7));
        let last = resolve_step(&s, &case, 2).unwrap();
        assert!(last.derate_targets.is_empty());
    }

    #[test]
    fn grouped_makes_one_case() {
        let case = ring(6);
        let s = HurricaneSchedule::new(vec![branches(&[1, 3])], 0.7, Granularity::Grouped).unwrap();
        let r = resolve_step(&s, &case, 1).unwrap();
        assert_eq!(r.security_contingencies, vec![branches(&[1, 3])]);
        assert_eq!(r.case_outages(1), branches(&[1, 3]));
    }

    #[test]
    fn unknown_ids_reported() {
        let case = ring(4);
        let mut bad = branches(&[999]);
        bad.insert(ElementRef::Generator(GenId(1)));
        let s = HurricaneSchedule::new(vec![OutageSet::new(), bad], 0.7, Granularity::PerElement).unwrap();
        assert_eq!(
            s.unknown_elements(&case),
            vec![ScheduleError::UnknownElement { batch: 2, element: ElementRef::Branch(BranchId(999)) }]
        );
        assert!(resolve_step(&s, &case, 1).is_err());
        assert!(matches!(resolve_step(&s, &case, 3), Err(ScheduleError::StepOutOfRange { .. })));
    }

    #[test]
    fn derate_skips_branches_of_lost_buses() {
        let case = ring(6);
        let mut b2 = branches(&[]);
        b2.insert(ElementRef::Bus(BusId(3)));
        let s = HurricaneSchedule::new(vec![b2.clone(), { let mut b = b2.clone(); b.extend(&branches(&[2, 5])); b }], 0.7, Granularity::PerElement).unwrap();
        let r = resolve_step(&s, &case, 1).unwrap();
        // branch 2 joins buses 2-3 and bus 3 is already gone
        assert_eq!(r.derate_targets.keys().copied().collect::<Vec<_>>(), vec![BranchId(5)]);
    }
}
