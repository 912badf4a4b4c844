//! Native JSON case format. Quantities are MW and $ on the case base;
//! susceptances are per unit and phase shifts radians. A missing
//! `flow_limit` means the branch is unconstrained.

use std::path::Path;

use posture_core::grid::{Branch, Bus, CaseData, CostModel, Generator, GridCase};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn one() -> usize {
    1
}
fn fifteen() -> u32 {
    15
}
fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    #[serde(default)]
    pub name: String,
    pub base_mva: f64,
    #[serde(default = "one")]
    pub period_count: usize,
    #[serde(default = "fifteen")]
    pub period_minutes: u32,
    pub buses: Vec<BusRecord>,
    pub branches: Vec<BranchRecord>,
    pub generators: Vec<GeneratorRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusRecord {
    pub id: u32,
    #[serde(default)]
    pub demand: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand_profile: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchRecord {
    pub id: u32,
    pub from: u32,
    pub to: u32,
    pub susceptance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow_limit: Option<f64>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub angle_shift: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostRecord {
    pub alpha_sqr: f64,
    pub alpha_lin: f64,
    pub zeta: f64,
    pub kappa: f64,
    pub eta_up: f64,
    pub eta_down: f64,
    pub mu_up: f64,
    pub mu_down: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorRecord {
    pub id: u32,
    pub bus: u32,
    pub p_min: f64,
    pub p_max: f64,
    #[serde(default)]
    pub cost: CostRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp_up: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp_down: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reserve_up: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reserve_down: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_dispatch: Option<f64>,
}

impl CaseFile {
    /// Unvalidated case contents; see [`CaseData::diagnostics`].
    pub fn to_data(&self) -> CaseData {
        let buses = self
            .buses
            .iter()
            .map(|b| {
                let mut bus = Bus::new(b.id, b.demand);
                bus.demand_profile = b.demand_profile.clone();
                bus
            })
            .collect();
        let branches = self
            .branches
            .iter()
            .map(|b| {
                let mut br = Branch::new(b.id, b.from, b.to, b.susceptance, b.flow_limit.unwrap_or(f64::INFINITY));
                br.angle_shift = b.angle_shift;
                br
            })
            .collect();
        let generators = self
            .generators
            .iter()
            .map(|g| {
                let c = &g.cost;
                let cost = CostModel {
                    alpha_sqr: c.alpha_sqr,
                    alpha_lin: c.alpha_lin,
                    zeta: c.zeta,
                    kappa: c.kappa,
                    eta_up: c.eta_up,
                    eta_down: c.eta_down,
                    mu_up: c.mu_up,
                    mu_down: c.mu_down,
                };
                let mut gen = Generator::new(g.id, g.bus, g.p_min, g.p_max, cost);
                let range = g.p_max - g.p_min;
                gen.ramp_up = g.ramp_up.unwrap_or(range);
                gen.ramp_down = g.ramp_down.unwrap_or(range);
                gen.reserve_up = g.reserve_up.unwrap_or(range);
                gen.reserve_down = g.reserve_down.unwrap_or(range);
                gen.delta_min = g.delta_min.unwrap_or(range);
                gen.delta_max = g.delta_max.unwrap_or(range);
                gen.initial_dispatch = g.initial_dispatch.unwrap_or(g.p_min);
                gen
            })
            .collect();
        let mut data = CaseData::new(self.base_mva, buses, branches, generators);
        data.period_count = self.period_count;
        data.period_minutes = self.period_minutes;
        data
    }

    pub fn from_case(name: &str, case: &GridCase) -> Self {
        let opt = |v: f64| Some(v);
        Self {
            name: name.to_string(),
            base_mva: case.base_mva(),
            period_count: case.period_count(),
            period_minutes: case.period_minutes(),
            buses: case
                .buses()
                .iter()
                .map(|b| BusRecord {
                    id: b.id.0,
                    demand: b.demand,
                    demand_profile: b.demand_profile.clone(),
                })
                .collect(),
            branches: case
                .branches()
                .iter()
                .map(|b| BranchRecord {
                    id: b.id.0,
                    from: b.from_bus.0,
                    to: b.to_bus.0,
                    susceptance: b.susceptance,
                    flow_limit: b.flow_limit.is_finite().then_some(b.flow_limit),
                    angle_shift: b.angle_shift,
                })
                .collect(),
            generators: case
                .generators()
                .iter()
                .map(|g| GeneratorRecord {
                    id: g.id.0,
                    bus: g.bus.0,
                    p_min: g.p_min,
                    p_max: g.p_max,
                    cost: CostRecord {
                        alpha_sqr: g.cost.alpha_sqr,
                        alpha_lin: g.cost.alpha_lin,
                        zeta: g.cost.zeta,
                        kappa: g.cost.kappa,
                        eta_up: g.cost.eta_up,
                        eta_down: g.cost.eta_down,
                        mu_up: g.cost.mu_up,
                        mu_down: g.cost.mu_down,
                    },
                    ramp_up: opt(g.ramp_up),
                    ramp_down: opt(g.ramp_down),
                    reserve_up: opt(g.reserve_up),
                    reserve_down: opt(g.reserve_down),
                    delta_min: opt(g.delta_min),
                    delta_max: opt(g.delta_max),
                    initial_dispatch: opt(g.initial_dispatch),
                })
                .collect(),
        }
    }
}

pub fn parse_case_file(text: &str, path: &Path) -> Result<CaseFile> {
    serde_json::from_str(text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn to_json(file: &CaseFile) -> String {
    let mut s = serde_json::to_string_pretty(file).expect("case records serialize");
    s.push('\n');
    s
}
