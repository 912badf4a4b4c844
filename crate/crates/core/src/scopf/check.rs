use alloc::collections::BTreeMap;

use super::{ConstraintFamily, ScopfError, ScopfProblem};

/// Largest violation of each constraint family at a point, in MW (radians
/// for angle references).
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionCheckReport {
    pub violations: BTreeMap<ConstraintFamily, f64>,
    pub objective: f64,
    pub tolerance: f64,
}

impl SolutionCheckReport {
    pub fn max_violation(&self) -> f64 {
        self.violations.values().copied().fold(0.0, f64::max)
    }

    pub fn is_feasible(&self) -> bool {
        self.max_violation() <= self.tolerance
    }

    /// Families violated beyond the tolerance.
    pub fn violated(&self) -> impl Iterator<Item = (ConstraintFamily, f64)> + '_ {
        self.violations
            .iter()
            .filter(move |(_, &v)| v > self.tolerance)
            .map(|(&f, &v)| (f, v))
    }
}

/// Evaluates every constraint and the objective at `x`.
pub fn check_solution(problem: &ScopfProblem, x: &[f64], tolerance: f64) -> Result<SolutionCheckReport, ScopfError> {
    if x.len() != problem.layout.len() {
        return Err(ScopfError::Dimension {
            expected: problem.layout.len(),
            found: x.len(),
        });
    }
    let mut violations: BTreeMap<_, _> = ConstraintFamily::ALL.iter().map(|&f| (f, 0.0)).collect();
    for row in &problem.constraints {
        let v = row.violation(x) * row.family.unit(problem.base_mva);
        let slot = violations.get_mut(&row.family).expect("all families present");
        if !(v <= *slot) {
            *slot = v;
        }
    }
    Ok(SolutionCheckReport {
        violations,
        objective: problem.objective.evaluate(x),
        tolerance,
    })
}
