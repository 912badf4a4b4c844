use alloc::vec;

use super::ScopfProblem;
use crate::conic::{Affine, ConicBuilder, ConicProgram};

/// Exact convex form of the problem: each squared term `w·u²` gets an
/// epigraph `s ≥ u²` through the rotated cone `‖(s − 1, 2u)‖ ≤ s + 1`.
///
/// The first `layout.len()` columns of the program are the problem's
/// variables; epigraph columns follow.
pub fn to_qp(problem: &ScopfProblem) -> ConicProgram {
    let mut b = ConicBuilder::with_vars(problem.layout.len());
    problem.add_linear_rows(&mut b);
    problem.add_linear_objective(&mut b);
    for d in &problem.objective.dispatch {
        if d.alpha_sqr > 0.0 {
            epigraph(&mut b, d.alpha_sqr, Affine::var(d.var, 1.0));
        }
    }
    for w in &problem.objective.wear {
        if w.kappa > 0.0 {
            epigraph(&mut b, w.kappa, w.difference());
        }
    }
    b.build()
}

fn epigraph(b: &mut ConicBuilder, weight: f64, u: Affine) {
    let s = b.add_var(weight);
    b.soc(vec![
        Affine::new(vec![(s, 1.0)], 1.0),
        Affine::new(vec![(s, 1.0)], -1.0),
        u.scaled(2.0),
    ]);
}
