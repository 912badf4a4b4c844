//! Reference computations that share no code with the solver under test.

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, Variable};
use nalgebra::{DMatrix, DVector};
use posture_core::scopf::{LinearConstraint, ScopfProblem};

/// Total violation below which a phase-1 optimum counts as feasible, per unit.
pub const PHASE1_TOL: f64 = 1e-7;

fn add_row(lp: &mut Problem, row: &LinearConstraint, x: &[Variable], extra: &[(Variable, f64)]) {
    let expr = || {
        let mut e: LinearExpr = row.terms.iter().map(|&(i, v)| (x[i], v)).collect();
        e.extend(extra.iter().copied());
        e
    };
    if row.is_equality() {
        lp.add_constraint(expr(), ComparisonOp::Eq, row.lower);
        return;
    }
    if row.lower.is_finite() {
        lp.add_constraint(expr(), ComparisonOp::Ge, row.lower);
    }
    if row.upper.is_finite() {
        lp.add_constraint(expr(), ComparisonOp::Le, row.upper);
    }
}

/// Smallest total constraint violation over all points: every row gets a
/// nonnegative slack on each side and their sum is minimized.
pub fn phase1_violation(problem: &ScopfProblem) -> f64 {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let x: Vec<Variable> = (0..problem.layout.len())
        .map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    for row in &problem.constraints {
        let up = lp.add_var(1.0, (0.0, f64::INFINITY));
        let down = lp.add_var(1.0, (0.0, f64::INFINITY));
        add_row(&mut lp, row, &x, &[(up, 1.0), (down, -1.0)]);
    }
    lp.solve().expect("phase-1 program is always feasible and bounded").objective()
}

pub fn lp_feasible(problem: &ScopfProblem) -> bool {
    phase1_violation(problem) <= PHASE1_TOL
}

/// The point of the feasible set nearest to `z` in the 1-norm.
pub fn project_l1(problem: &ScopfProblem, z: &[f64]) -> Option<Vec<f64>> {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let x: Vec<Variable> = (0..problem.layout.len())
        .map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    for (&xi, &zi) in x.iter().zip(z) {
        let u = lp.add_var(1.0, (0.0, f64::INFINITY));
        lp.add_constraint([(u, 1.0), (xi, -1.0)], ComparisonOp::Ge, -zi);
        lp.add_constraint([(u, 1.0), (xi, 1.0)], ComparisonOp::Ge, zi);
    }
    for row in &problem.constraints {
        add_row(&mut lp, row, &x, &[]);
    }
    let sol = lp.solve().ok()?;
    Some(x.iter().map(|&v| sol[v]).collect())
}

/// Minimizes `½ xᵀPx + qᵀx` subject to `Gx ≤ h` with a dense primal-dual
/// interior-point method (Mehrotra predictor-corrector). Returns the
/// minimizer and the optimal value.
pub fn dense_qp(p: &DMatrix<f64>, q: &DVector<f64>, g: &DMatrix<f64>, h: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
    let (n, m) = (q.len(), h.len());
    let mut x = DVector::zeros(n);
    let mut s = (h - g * &x).map(|v| v.max(1.0));
    let mut z = DVector::from_element(m, 1.0);

    let step_to_boundary = |v: &DVector<f64>, dv: &DVector<f64>| {
        v.iter()
            .zip(dv.iter())
            .filter(|(_, d)| **d < 0.0)
            .map(|(a, d)| -a / d)
            .fold(1.0f64, f64::min)
    };

    for _ in 0..200 {
        let rd = p * &x + q + g.transpose() * &z;
        let rp = g * &x + &s - h;
        let mu = s.dot(&z) / m as f64;
        let scale = 1.0 + q.norm() + h.norm();
        if rd.norm() < 1e-12 * scale && rp.norm() < 1e-12 * scale && mu < 1e-14 {
            break;
        }

        let w = z.component_div(&s);
        let mut k = p.clone();
        k += g.transpose() * DMatrix::from_diagonal(&w) * g;
        let lu = k.lu();

        let direction = |rc: &DVector<f64>| -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
            // Z ds + S dz = −rc, G dx + ds = −rp, P dx + Gᵀ dz = −rd
            let t = (-rc + z.component_mul(&rp)).component_div(&s);
            let dx = lu.solve(&(-&rd - g.transpose() * &t))?;
            let ds = -&rp - g * &dx;
            let dz = (-rc - z.component_mul(&ds)).component_div(&s);
            Some((dx, ds, dz))
        };

        let rc_aff = s.component_mul(&z);
        let (_, ds_a, dz_a) = direction(&rc_aff)?;
        let alpha_a = step_to_boundary(&s, &ds_a).min(step_to_boundary(&z, &dz_a));
        let mu_aff = (&s + alpha_a * &ds_a).dot(&(&z + alpha_a * &dz_a)) / m as f64;
        let sigma = (mu_aff / mu).powi(3);

        let rc = s.component_mul(&z) + ds_a.component_mul(&dz_a) - DVector::from_element(m, sigma * mu);
        let (dx, ds, dz) = direction(&rc)?;
        let alpha = (0.99 * step_to_boundary(&s, &ds).min(step_to_boundary(&z, &dz))).min(1.0);
        x += alpha * dx;
        s += alpha * ds;
        z += alpha * dz;
    }
    let value = 0.5 * x.dot(&(p * &x)) + q.dot(&x);
    Some((x, value))
}

/// Bisection on a monotone predicate over `(lo, hi]`: `hi` must satisfy it
/// and `lo` must not. Returns the threshold to within `tol`.
pub fn bisect(mut lo: f64, mut hi: f64, tol: f64, mut holds: impl FnMut(f64) -> bool) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
