//! Network data model: buses, branches, generators and validated cases.

mod snapshot;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

pub use snapshot::{build_snapshot, prune_dead_islands, Island, NetworkSnapshot, SnapshotBranch, SnapshotGenerator};

macro_rules! id_type {
    ($name:ident, $tag:literal) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($tag, " {}"), self.0)
            }
        }
    };
}

id_type!(BusId, "bus");
id_type!(BranchId, "branch");
id_type!(GenId, "generator");

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: BusId,
    /// MW, used for every period without a profile.
    pub demand: f64,
    /// Optional per-period demand in MW.
    pub demand_profile: Option<Vec<f64>>,
}

impl Bus {
    pub fn new(id: u32, demand: f64) -> Self {
        Self {
            id: BusId(id),
            demand,
            demand_profile: None,
        }
    }

    pub fn demand_at(&self, period: usize) -> f64 {
        match &self.demand_profile {
            Some(p) => p[period],
            None => self.demand,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub id: BranchId,
    pub from_bus: BusId,
    pub to_bus: BusId,
    /// Per unit on the case base.
    pub susceptance: f64,
    /// MW; `f64::INFINITY` means unrated.
    pub flow_limit: f64,
    /// Radians.
    pub angle_shift: f64,
}

impl Branch {
    pub fn new(id: u32, from: u32, to: u32, susceptance: f64, flow_limit: f64) -> Self {
        Self {
            id: BranchId(id),
            from_bus: BusId(from),
            to_bus: BusId(to),
            susceptance,
            flow_limit,
            angle_shift: 0.0,
        }
    }
}

/// Generator cost coefficients, all in dollars per period.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostModel {
    /// $/MW²
    pub alpha_sqr: f64,
    /// $/MW
    pub alpha_lin: f64,
    /// $ fixed
    pub zeta: f64,
    /// $/MW² on the change of base-case dispatch between periods
    pub kappa: f64,
    /// $/MW contingency reserve prices
    pub eta_up: f64,
    pub eta_down: f64,
    /// $/MW load-following reserve prices
    pub mu_up: f64,
    pub mu_down: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub id: GenId,
    pub bus: BusId,
    pub p_min: f64,
    pub p_max: f64,
    pub cost: CostModel,
    /// Load-following reserve caps, MW per period.
    pub ramp_up: f64,
    pub ramp_down: f64,
    /// Contingency reserve caps, MW.
    pub reserve_up: f64,
    pub reserve_down: f64,
    /// Base-to-contingency transition bounds, MW.
    pub delta_min: f64,
    pub delta_max: f64,
    /// Dispatch in effect before the first period, MW.
    pub initial_dispatch: f64,
}

impl Generator {
    /// A generator whose reserve, ramp and transition limits equal its range.
    pub fn new(id: u32, bus: u32, p_min: f64, p_max: f64, cost: CostModel) -> Self {
        let range = p_max - p_min;
        Self {
            id: GenId(id),
            bus: BusId(bus),
            p_min,
            p_max,
            cost,
            ramp_up: range,
            ramp_down: range,
            reserve_up: range,
            reserve_down: range,
            delta_min: range,
            delta_max: range,
            initial_dispatch: p_min,
        }
    }
}

/// Raw case contents, before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseData {
    pub base_mva: f64,
    pub period_count: usize,
    pub period_minutes: u32,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
}

impl CaseData {
    pub fn new(base_mva: f64, buses: Vec<Bus>, branches: Vec<Branch>, generators: Vec<Generator>) -> Self {
        Self {
            base_mva,
            period_count: 1,
            period_minutes: 15,
            buses,
            branches,
            generators,
        }
    }

    /// Every invariant violation in the data, in a stable order.
    pub fn diagnostics(&self) -> Vec<GridError> {
        let mut out = Vec::new();
        if !(self.base_mva > 0.0 && self.base_mva.is_finite()) {
            out.push(GridError::BaseMva(self.base_mva));
        }
        if self.period_count < 1 {
            out.push(GridError::PeriodCount);
        }

        let mut bus_ids = BTreeSet::new();
        for bus in &self.buses {
            if !bus_ids.insert(bus.id) {
                out.push(GridError::DuplicateBus(bus.id));
            }
            if !bus.demand.is_finite() {
                out.push(GridError::NonFinite { element: ElementRef::Bus(bus.id), field: "demand" });
            }
            if let Some(p) = &bus.demand_profile {
                if p.len() != self.period_count {
                    out.push(GridError::DemandProfileLength {
                        bus: bus.id,
                        expected: self.period_count,
                        found: p.len(),
                    });
                }
                if p.iter().any(|d| !d.is_finite()) {
                    out.push(GridError::NonFinite { element: ElementRef::Bus(bus.id), field: "demand_profile" });
                }
            }
        }

        let mut branch_ids = BTreeSet::new();
        for br in &self.branches {
            if !branch_ids.insert(br.id) {
                out.push(GridError::DuplicateBranch(br.id));
            }
            for end in [br.from_bus, br.to_bus] {
                if !bus_ids.contains(&end) {
                    out.push(GridError::DanglingReference { element: ElementRef::Branch(br.id), bus: end });
                }
            }
            if br.from_bus == br.to_bus {
                out.push(GridError::SelfLoop(br.id));
            }
            if !(br.susceptance > 0.0 && br.susceptance.is_finite()) {
                out.push(GridError::NonPositive { element: ElementRef::Branch(br.id), field: "susceptance", value: br.susceptance });
            }
            if !(br.flow_limit > 0.0) {
                out.push(GridError::NonPositive { element: ElementRef::Branch(br.id), field: "flow_limit", value: br.flow_limit });
            }
            if !br.angle_shift.is_finite() {
                out.push(GridError::NonFinite { element: ElementRef::Branch(br.id), field: "angle_shift" });
            }
        }

        let mut gen_ids = BTreeSet::new();
        for g in &self.generators {
            let me = ElementRef::Generator(g.id);
            if !gen_ids.insert(g.id) {
                out.push(GridError::DuplicateGenerator(g.id));
            }
            if !bus_ids.contains(&g.bus) {
                out.push(GridError::DanglingReference { element: me, bus: g.bus });
            }
            let finite = [
                ("p_min", g.p_min),
                ("p_max", g.p_max),
                ("ramp_up", g.ramp_up),
                ("ramp_down", g.ramp_down),
                ("reserve_up", g.reserve_up),
                ("reserve_down", g.reserve_down),
                ("delta_min", g.delta_min),
                ("delta_max", g.delta_max),
                ("initial_dispatch", g.initial_dispatch),
                ("alpha_sqr", g.cost.alpha_sqr),
                ("alpha_lin", g.cost.alpha_lin),
                ("zeta", g.cost.zeta),
                ("kappa", g.cost.kappa),
                ("eta_up", g.cost.eta_up),
                ("eta_down", g.cost.eta_down),
                ("mu_up", g.cost.mu_up),
                ("mu_down", g.cost.mu_down),
            ];
            for (field, v) in finite {
                if !v.is_finite() {
                    out.push(GridError::NonFinite { element: me, field });
                }
            }
            if g.p_min > g.p_max {
                out.push(GridError::CapacityRange { generator: g.id, p_min: g.p_min, p_max: g.p_max });
            } else if !(g.p_min <= g.initial_dispatch && g.initial_dispatch <= g.p_max) {
                out.push(GridError::InitialDispatch { generator: g.id, value: g.initial_dispatch });
            }
            for (field, v) in [
                ("ramp_up", g.ramp_up),
                ("ramp_down", g.ramp_down),
                ("reserve_up", g.reserve_up),
                ("reserve_down", g.reserve_down),
                ("delta_min", g.delta_min),
                ("delta_max", g.delta_max),
                ("alpha_sqr", g.cost.alpha_sqr),
                ("kappa", g.cost.kappa),
            ] {
                if v < 0.0 {
                    out.push(GridError::Negative { element: me, field, value: v });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElementRef {
    Bus(BusId),
    Branch(BranchId),
    Generator(GenId),
}

impl fmt::Display for ElementRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElementRef::Bus(id) => id.fmt(f),
            ElementRef::Branch(id) => id.fmt(f),
            ElementRef::Generator(id) => id.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("base_mva must be positive, got {0}")]
    BaseMva(f64),
    #[error("period_count must be at least 1")]
    PeriodCount,
    #[error("duplicate {0}")]
    DuplicateBus(BusId),
    #[error("duplicate {0}")]
    DuplicateBranch(BranchId),
    #[error("duplicate {0}")]
    DuplicateGenerator(GenId),
    #[error("{element} references unknown {bus}")]
    DanglingReference { element: ElementRef, bus: BusId },
    #[error("{0} connects a bus to itself")]
    SelfLoop(BranchId),
    #[error("{element}: {field} must be positive, got {value}")]
    NonPositive { element: ElementRef, field: &'static str, value: f64 },
    #[error("{element}: {field} must be non-negative, got {value}")]
    Negative { element: ElementRef, field: &'static str, value: f64 },
    #[error("{element}: {field} is not finite")]
    NonFinite { element: ElementRef, field: &'static str },
    #[error("{generator}: p_min {p_min} exceeds p_max {p_max}")]
    CapacityRange { generator: GenId, p_min: f64, p_max: f64 },
    #[error("{generator}: initial_dispatch {value} outside [p_min, p_max]")]
    InitialDispatch { generator: GenId, value: f64 },
    #[error("{bus}: demand profile has {found} periods, expected {expected}")]
    DemandProfileLength { bus: BusId, expected: usize, found: usize },
}

/// A validated network. Elements are kept sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCase {
    data: CaseData,
    bus_pos: BTreeMap<BusId, usize>,
    branch_pos: BTreeMap<BranchId, usize>,
    gen_pos: BTreeMap<GenId, usize>,
}

impl GridCase {
    pub fn new(mut data: CaseData) -> Result<Self, GridError> {
        if let Some(e) = data.diagnostics().into_iter().next() {
            return Err(e);
        }
        data.buses.sort_by_key(|b| b.id);
        data.branches.sort_by_key(|b| b.id);
        data.generators.sort_by_key(|g| g.id);
        let bus_pos = data.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
        let branch_pos = data.branches.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
        let gen_pos = data.generators.iter().enumerate().map(|(i, g)| (g.id, i)).collect();
        Ok(Self {
            data,
            bus_pos,
            branch_pos,
            gen_pos,
        })
    }

    pub fn data(&self) -> &CaseData {
        &self.data
    }
    pub fn into_data(self) -> CaseData {
        self.data
    }
    pub fn base_mva(&self) -> f64 {
        self.data.base_mva
    }
    pub fn period_count(&self) -> usize {
        self.data.period_count
    }
    pub fn period_minutes(&self) -> u32 {
        self.data.period_minutes
    }
    pub fn buses(&self) -> &[Bus] {
        &self.data.buses
    }
    pub fn branches(&self) -> &[Branch] {
        &self.data.branches
    }
    pub fn generators(&self) -> &[Generator] {
        &self.data.generators
    }
    pub fn bus(&self, id: BusId) -> Option<&Bus> {
        self.bus_pos.get(&id).map(|&i| &self.data.buses[i])
    }
    pub fn branch(&self, id: BranchId) -> Option<&Branch> {
        self.branch_pos.get(&id).map(|&i| &self.data.branches[i])
    }
    pub fn generator(&self, id: GenId) -> Option<&Generator> {
        self.gen_pos.get(&id).map(|&i| &self.data.generators[i])
    }

    pub fn contains(&self, element: ElementRef) -> bool {
        match element {
            ElementRef::Bus(id) => self.bus_pos.contains_key(&id),
            ElementRef::Branch(id) => self.branch_pos.contains_key(&id),
            ElementRef::Generator(id) => self.gen_pos.contains_key(&id),
        }
    }

    /// Initial dispatch of every generator, MW.
    pub fn initial_dispatch(&self) -> Dispatch {
        self.generators().iter().map(|g| (g.id, g.initial_dispatch)).collect()
    }
}

/// Dispatch per generator, MW.
pub type Dispatch = BTreeMap<GenId, f64>;

/// Elements removed from service.
#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct OutageSet {
    pub buses: BTreeSet<BusId>,
    pub branches: BTreeSet<BranchId>,
    pub generators: BTreeSet<GenId>,
}

impl OutageSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(element: ElementRef) -> Self {
        let mut s = Self::default();
        s.insert(element);
        s
    }

    pub fn insert(&mut self, element: ElementRef) -> bool {
        match element {
            ElementRef::Bus(id) => self.buses.insert(id),
            ElementRef::Branch(id) => self.branches.insert(id),
            ElementRef::Generator(id) => self.generators.insert(id),
        }
    }

    pub fn contains(&self, element: ElementRef) -> bool {
        match element {
            ElementRef::Bus(id) => self.buses.contains(&id),
            ElementRef::Branch(id) => self.branches.contains(&id),
            ElementRef::Generator(id) => self.generators.contains(&id),
        }
    }

    pub fn len(&self) -> usize {
        self.buses.len() + self.branches.len() + self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn elements(&self) -> impl Iterator<Item = ElementRef> + '_ {
        self.buses
            .iter()
            .map(|&b| ElementRef::Bus(b))
            .chain(self.branches.iter().map(|&b| ElementRef::Branch(b)))
            .chain(self.generators.iter().map(|&g| ElementRef::Generator(g)))
    }

    pub fn union(&self, other: &OutageSet) -> OutageSet {
        let mut out = self.clone();
        out.extend(other);
        out
    }

    pub fn extend(&mut self, other: &OutageSet) {
        self.buses.extend(other.buses.iter().copied());
        self.branches.extend(other.branches.iter().copied());
        self.generators.extend(other.generators.iter().copied());
    }

    /// Elements of `self` not in `other`.
    pub fn difference(&self, other: &OutageSet) -> OutageSet {
        OutageSet {
            buses: self.buses.difference(&other.buses).copied().collect(),
            branches: self.branches.difference(&other.branches).copied().collect(),
            generators: self.generators.difference(&other.generators).copied().collect(),
        }
    }

    pub fn is_superset(&self, other: &OutageSet) -> bool {
        self.buses.is_superset(&other.buses)
            && self.branches.is_superset(&other.branches)
            && self.generators.is_superset(&other.generators)
    }
}

impl FromIterator<ElementRef> for OutageSet {
    fn from_iter<T: IntoIterator<Item = ElementRef>>(iter: T) -> Self {
        let mut s = OutageSet::default();
        for e in iter {
            s.insert(e);
        }
        s
    }
}

/// Branch rating multipliers in (0, 1].
pub type DeratingSet = BTreeMap<BranchId, f64>;

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn two_bus() -> CaseData {
        let mut g = Generator::new(1, 1, 0.0, 200.0, CostModel::default());
        g.initial_dispatch = 50.0;
        CaseData::new(
            100.0,
            vec![Bus::new(1, 0.0), Bus::new(2, 50.0)],
            vec![Branch::new(1, 1, 2, 10.0, 100.0)],
            vec![g],
        )
    }

    #[test]
    fn valid_case_builds() {
        let case = GridCase::new(two_bus()).unwrap();
        assert_eq!((case.buses().len(), case.branches().len(), case.generators().len()), (2, 1, 1));
        assert_eq!(case.bus(BusId(2)).unwrap().demand, 50.0);
    }

    #[test]
    fn duplicate_bus_rejected() {
        let mut d = two_bus();
        d.buses.push(Bus::new(2, 1.0));
        assert_eq!(GridCase::new(d), Err(GridError::DuplicateBus(BusId(2))));
    }

    #[test]
    fn dangling_and_nonpositive_reported() {
        let mut d = two_bus();
        d.branches.push(Branch::new(2, 1, 9, 0.0, 10.0));
        let diags = d.diagnostics();
        assert!(diags.contains(&GridError::DanglingReference { element: ElementRef::Branch(BranchId(2)), bus: BusId(9) }));
        assert!(diags.iter().any(|e| matches!(e, GridError::NonPositive { field: "susceptance", .. })));
    }

    #[test]
    fn generator_range_names_generator() {
        let mut d = two_bus();
        d.generators[0].p_min = 300.0;
        let err = GridCase::new(d).unwrap_err();
        assert_eq!(err, GridError::CapacityRange { generator: GenId(1), p_min: 300.0, p_max: 200.0 });
        assert!(alloc::format!("{err}").contains("generator 1"));
    }

    #[test]
    fn profile_length_checked() {
        let mut d = two_bus();
        d.period_count = 2;
        d.buses[1].demand_profile = Some(vec![1.0, 2.0, 3.0]);
        assert!(matches!(GridCase::new(d), Err(GridError::DemandProfileLength { expected: 2, found: 3, .. })));
    }

    #[test]
    fn outage_set_algebra() {
        let a: OutageSet = [ElementRef::Branch(BranchId(1)), ElementRef::Bus(BusId(3))].into_iter().collect();
        let b = OutageSet::single(ElementRef::Branch(BranchId(1)));
        assert!(a.is_superset(&b));
        assert_eq!(a.difference(&b), OutageSet::single(ElementRef::Bus(BusId(3))));
        assert_eq!(a.union(&b).len(), 2);
    }
}
