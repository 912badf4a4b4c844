use alloc::vec;
use alloc::vec::Vec;

use super::{BranchId, BusId, DeratingSet, GenId, GridCase, OutageSet};
use crate::linalg::CscMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotBranch {
    pub id: BranchId,
    /// Positions in the snapshot's bus list.
    pub from: usize,
    pub to: usize,
    pub susceptance: f64,
    pub angle_shift: f64,
    /// Nominal and derated limits, per unit.
    pub flow_limit: f64,
    pub effective_limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotGenerator {
    pub id: GenId,
    pub bus: usize,
}

/// Connected component of the surviving network.
#[derive(Debug, Clone, PartialEq)]
pub struct Island {
    /// Bus positions, ascending.
    pub buses: Vec<usize>,
    /// Position of the angle reference bus (lowest id in the island).
    pub reference: usize,
    pub generator_count: usize,
}

/// DC network for one period and one outage pattern, in per unit.
///
/// Power balance reads `d + B θ + Aᵀ f_shift = Cᵀ p` and branch flows are
/// `B⃗ θ + f_shift`, where `A` is the signed branch-bus incidence.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSnapshot {
    pub period: usize,
    pub base_mva: f64,
    pub bus_ids: Vec<BusId>,
    pub branches: Vec<SnapshotBranch>,
    pub generators: Vec<SnapshotGenerator>,
    pub demand: Vec<f64>,
    /// `|V|×|V|` weighted Laplacian.
    pub bus_susceptance: CscMatrix,
    /// `|E|×|V|`, row `ℓ = (i, j)` holds `b_ℓ` at `i` and `−b_ℓ` at `j`.
    pub branch_flow: CscMatrix,
    /// `|E|×|V|` signed incidence.
    pub incidence: CscMatrix,
    /// `|G|×|V|`
    pub gen_incidence: CscMatrix,
    pub effective_limits: Vec<f64>,
    /// `−b·shift` per branch.
    pub shift_offsets: Vec<f64>,
    pub islands: Vec<Island>,
}

impl NetworkSnapshot {
    fn assemble(
        period: usize,
        base_mva: f64,
        bus_ids: Vec<BusId>,
        demand: Vec<f64>,
        branches: Vec<SnapshotBranch>,
        generators: Vec<SnapshotGenerator>,
    ) -> Self {
        let nb = bus_ids.len();
        let ne = branches.len();
        let mut lap = Vec::with_capacity(4 * ne);
        let mut flow = Vec::with_capacity(2 * ne);
        let mut inc = Vec::with_capacity(2 * ne);
        for (l, br) in branches.iter().enumerate() {
            let b = br.susceptance;
            lap.extend_from_slice(&[(br.from, br.from, b), (br.to, br.to, b), (br.from, br.to, -b), (br.to, br.from, -b)]);
            flow.extend_from_slice(&[(l, br.from, b), (l, br.to, -b)]);
            inc.extend_from_slice(&[(l, br.from, 1.0), (l, br.to, -1.0)]);
        }
        let gen_inc: Vec<_> = generators.iter().enumerate().map(|(g, gen)| (g, gen.bus, 1.0)).collect();

        let islands = find_islands(nb, &branches, &generators);
        Self {
            period,
            base_mva,
            demand,
            bus_susceptance: CscMatrix::from_triplets(nb, nb, &lap),
            branch_flow: CscMatrix::from_triplets(ne, nb, &flow),
            incidence: CscMatrix::from_triplets(ne, nb, &inc),
            gen_incidence: CscMatrix::from_triplets(generators.len(), nb, &gen_inc),
            effective_limits: branches.iter().map(|b| b.effective_limit).collect(),
            shift_offsets: branches.iter().map(|b| -b.susceptance * b.angle_shift).collect(),
            bus_ids,
            branches,
            generators,
            islands,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.bus_ids.is_empty()
    }

    pub fn branch_ids(&self) -> impl Iterator<Item = BranchId> + '_ {
        self.branches.iter().map(|b| b.id)
    }

    pub fn generator_ids(&self) -> impl Iterator<Item = GenId> + '_ {
        self.generators.iter().map(|g| g.id)
    }

    pub fn bus_index(&self, id: BusId) -> Option<usize> {
        self.bus_ids.binary_search(&id).ok()
    }

    pub fn total_demand(&self) -> f64 {
        self.demand.iter().sum()
    }

    /// Branch flows for bus angles `theta`, per unit.
    pub fn flows(&self, theta: &[f64]) -> Vec<f64> {
        let mut f = self.shift_offsets.clone();
        self.branch_flow.gemv(1.0, theta, &mut f);
        f
    }

    /// Net injection `Cᵀp − d` required at every bus by angles `theta`.
    pub fn injections(&self, theta: &[f64]) -> Vec<f64> {
        let mut inj = self.bus_susceptance.mul_vec(theta);
        self.incidence.gemv_t(1.0, &self.shift_offsets, &mut inj);
        inj
    }
}

fn find_islands(nb: usize, branches: &[SnapshotBranch], generators: &[SnapshotGenerator]) -> Vec<Island> {
    let mut parent: Vec<usize> = (0..nb).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for br in branches {
        let (a, b) = (root(&mut parent, br.from), root(&mut parent, br.to));
        if a != b {
            // keep the smaller position as the root so roots are island minima
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            parent[hi] = lo;
        }
    }
    let mut slot = vec![usize::MAX; nb];
    let mut islands: Vec<Island> = Vec::new();
    for i in 0..nb {
        let r = root(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = islands.len();
            islands.push(Island {
                buses: Vec::new(),
                reference: i,
                generator_count: 0,
            });
        }
        islands[slot[r]].buses.push(i);
    }
    for g in generators {
        let r = root(&mut parent, g.bus);
        islands[slot[r]].generator_count += 1;
    }
    islands
}

/// Builds the snapshot for period `t` with `outages` removed and `derates`
/// applied to branch ratings.
///
/// Generators at outaged buses and branches touching outaged buses are
/// treated as out of service. An outaged bus takes its demand with it.
pub fn build_snapshot(case: &GridCase, outages: &OutageSet, derates: &DeratingSet, t: usize) -> NetworkSnapshot {
    let base = case.base_mva();
    let mut bus_ids = Vec::new();
    let mut demand = Vec::new();
    for bus in case.buses() {
        if !outages.buses.contains(&bus.id) {
            bus_ids.push(bus.id);
            demand.push(bus.demand_at(t) / base);
        }
    }
    let pos = |id: BusId| bus_ids.binary_search(&id).ok();

    let mut branches = Vec::new();
    for br in case.branches() {
        if outages.branches.contains(&br.id) {
            continue;
        }
        let (Some(from), Some(to)) = (pos(br.from_bus), pos(br.to_bus)) else {
            continue;
        };
        let limit = br.flow_limit / base;
        let fraction = derates.get(&br.id).copied().unwrap_or(1.0);
        branches.push(SnapshotBranch {
            id: br.id,
            from,
            to,
            susceptance: br.susceptance,
            angle_shift: br.angle_shift,
            flow_limit: limit,
            effective_limit: fraction * limit,
        });
    }

    let generators = case
        .generators()
        .iter()
        .filter(|g| !outages.generators.contains(&g.id))
        .filter_map(|g| pos(g.bus).map(|bus| SnapshotGenerator { id: g.id, bus }))
        .collect();

    NetworkSnapshot::assemble(t, base, bus_ids, demand, branches, generators)
}

/// Drops islands without generation. Returns the reduced snapshot and the
/// demand it no longer serves, in MW.
pub fn prune_dead_islands(snapshot: &NetworkSnapshot) -> (NetworkSnapshot, f64) {
    let nb = snapshot.bus_ids.len();
    let mut keep = vec![true; nb];
    let mut shed = 0.0;
    for island in snapshot.islands.iter().filter(|i| i.generator_count == 0) {
        for &b in &island.buses {
            keep[b] = false;
            shed += snapshot.demand[b];
        }
    }
    if keep.iter().all(|&k| k) {
        return (snapshot.clone(), 0.0);
    }

    let mut new_pos = vec![usize::MAX; nb];
    let mut bus_ids = Vec::new();
    let mut demand = Vec::new();
    for i in (0..nb).filter(|&i| keep[i]) {
        new_pos[i] = bus_ids.len();
        bus_ids.push(snapshot.bus_ids[i]);
        demand.push(snapshot.demand[i]);
    }
    let branches = snapshot
        .branches
        .iter()
        .filter(|b| keep[b.from])
        .map(|b| SnapshotBranch {
            from: new_pos[b.from],
            to: new_pos[b.to],
            ..b.clone()
        })
        .collect();
    let generators = snapshot
        .generators
        .iter()
        .map(|g| SnapshotGenerator {
            id: g.id,
            bus: new_pos[g.bus],
        })
        .collect();
    let pruned = NetworkSnapshot::assemble(snapshot.period, snapshot.base_mva, bus_ids, demand, branches, generators);
    (pruned, shed * snapshot.base_mva)
}
