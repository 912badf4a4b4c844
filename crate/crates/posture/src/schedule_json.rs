//! JSON hurricane schedules: one entry per batch listing bus, branch and
//! generator ids. Batches are cumulative unless `"cumulative": false`, in
//! which case each entry lists only the elements newly lost.

use std::path::Path;

use posture_core::grid::{BranchId, BusId, GenId, OutageSet};
use posture_core::schedule::{Granularity, HurricaneSchedule, DEFAULT_DERATE_FRACTION};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_fraction() -> f64 {
    DEFAULT_DERATE_FRACTION
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GranularityRecord {
    #[default]
    PerElement,
    Grouped,
}

impl From<GranularityRecord> for Granularity {
    fn from(g: GranularityRecord) -> Self {
        match g {
            GranularityRecord::PerElement => Granularity::PerElement,
            GranularityRecord::Grouped => Granularity::Grouped,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatchRecord {
    pub buses: Vec<u32>,
    pub branches: Vec<u32>,
    pub generators: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleFile {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_fraction")]
    pub derate_fraction: f64,
    #[serde(default)]
    pub granularity: GranularityRecord,
    #[serde(default = "yes")]
    pub cumulative: bool,
    pub batches: Vec<BatchRecord>,
}

impl ScheduleFile {
    pub fn to_schedule(&self) -> Result<HurricaneSchedule> {
        let sets: Vec<OutageSet> = self
            .batches
            .iter()
            .map(|b| OutageSet {
                buses: b.buses.iter().map(|&i| BusId(i)).collect(),
                branches: b.branches.iter().map(|&i| BranchId(i)).collect(),
                generators: b.generators.iter().map(|&i| GenId(i)).collect(),
            })
            .collect();
        let g = self.granularity.into();
        let schedule = if self.cumulative {
            HurricaneSchedule::new(sets, self.derate_fraction, g)?
        } else {
            HurricaneSchedule::from_increments(sets, self.derate_fraction, g)?
        };
        Ok(schedule)
    }
}

pub fn parse_schedule_file(text: &str, path: &Path) -> Result<ScheduleFile> {
    serde_json::from_str(text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}
