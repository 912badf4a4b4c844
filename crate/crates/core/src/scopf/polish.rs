use alloc::vec;
use alloc::vec::Vec;

use super::{LinearConstraint, ScopfProblem};
use crate::linalg::{dot, norm2, Ldlt};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolishSettings {
    /// Slack below which an inequality starts out active, per unit, when no
    /// multipliers are given.
    pub active_tol: f64,
    /// Multiplier above which an inequality starts out active, relative to
    /// the largest multiplier.
    pub active_dual_tol: f64,
    /// Largest accepted constraint violation of the result, per unit.
    pub feasibility_tol: f64,
    /// Largest accepted wrong-signed multiplier, relative to the cost scale.
    pub multiplier_tol: f64,
    pub max_rounds: usize,
    pub regularization: f64,
    pub refinement_steps: usize,
}

impl Default for PolishSettings {
    fn default() -> Self {
        Self {
            active_tol: 1e-5,
            active_dual_tol: 1e-6,
            feasibility_tol: 1e-9,
            multiplier_tol: 1e-9,
            max_rounds: 100,
            regularization: 1e-10,
            refinement_steps: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polished {
    pub x: Vec<f64>,
    pub rounds: usize,
    pub active_rows: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum PolishFailure {
    #[error("point has {found} entries, expected {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("optimality system is singular in round {round}")]
    Singular { round: usize },
    #[error("no consistent active set after {rounds} rounds")]
    RoundLimit { rounds: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Lower,
    Upper,
}

struct Quadratic {
    n: usize,
    h: Vec<f64>,
    q: Vec<f64>,
    scale: f64,
}

fn quadratic(problem: &ScopfProblem) -> Quadratic {
    let n = problem.layout.len();
    let mut h = vec![0.0; n * n];
    let mut q = vec![0.0; n];
    let obj = &problem.objective;
    for d in &obj.dispatch {
        h[d.var * n + d.var] += 2.0 * d.alpha_sqr;
        q[d.var] += d.alpha_lin;
    }
    for w in &obj.wear {
        let a = w.difference();
        for &(i, vi) in &a.terms {
            q[i] += 2.0 * w.kappa * a.constant * vi;
            for &(j, vj) in &a.terms {
                h[i * n + j] += 2.0 * w.kappa * vi * vj;
            }
        }
    }
    for &(i, c) in &obj.reserve {
        q[i] += c;
    }
    let scale = h.iter().chain(&q).fold(1.0f64, |m, v| m.max(v.abs()));
    Quadratic { n, h, q, scale }
}

/// Refines an approximate optimum to the exact optimum of the problem by
/// solving the optimality conditions on a guessed set of active
/// constraints, correcting the guess until every multiplier has the right
/// sign and every constraint holds. The first guess comes from `duals`
/// (per constraint, upper- and lower-side multipliers) when given, from the
/// slacks at `x0` otherwise.
pub fn polish(
    problem: &ScopfProblem,
    x0: &[f64],
    duals: Option<&[(f64, f64)]>,
    settings: &PolishSettings,
) -> Result<Polished, PolishFailure> {
    let qd = quadratic(problem);
    let n = qd.n;
    if x0.len() != n {
        return Err(PolishFailure::Dimension { expected: n, found: x0.len() });
    }
    let rows = &problem.constraints;
    let initial = |i: usize| -> Option<Side> {
        let r = &rows[i];
        if r.is_equality() {
            return Some(Side::Lower);
        }
        let v = r.value(x0);
        if r.lower.is_finite() && v - r.lower <= settings.active_tol * (1.0 + r.lower.abs()) {
            Some(Side::Lower)
        } else if r.upper.is_finite() && r.upper - v <= settings.active_tol * (1.0 + r.upper.abs()) {
            Some(Side::Upper)
        } else {
            None
        }
    };
    // equalities first, then inequalities by decreasing multiplier
    let mut working: Vec<(usize, Side)> = match duals {
        Some(d) => {
            let top = d.iter().fold(0.0f64, |m, &(u, l)| m.max(u.abs()).max(l.abs()));
            let tol = settings.active_dual_tol * top.max(f64::MIN_POSITIVE);
            let mut cand: Vec<(f64, usize, Side)> = Vec::new();
            for (i, (r, &(up, lo))) in rows.iter().zip(d).enumerate() {
                if r.is_equality() {
                    cand.push((f64::INFINITY, i, Side::Lower));
                } else if up > tol && up >= lo {
                    cand.push((up, i, Side::Upper));
                } else if lo > tol {
                    cand.push((lo, i, Side::Lower));
                }
            }
            cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            cand.into_iter().map(|(_, i, side)| (i, side)).collect()
        }
        None => {
            let mut w: Vec<(usize, Side)> = (0..rows.len()).filter_map(|i| initial(i).map(|s| (i, s))).collect();
            w.sort_by_key(|&(i, _)| !rows[i].is_equality());
            w
        }
    };

    for round in 1..=settings.max_rounds {
        working = independent(rows, n, &working);
        let (x, lambda) = solve_kkt(&qd, problem, &working, settings).ok_or(PolishFailure::Singular { round })?;

        let mut in_set = vec![false; rows.len()];
        for &(i, _) in &working {
            in_set[i] = true;
        }
        let mut violated = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            if in_set[i] {
                continue;
            }
            let v = r.value(&x);
            if r.lower - v > settings.feasibility_tol {
                violated.push((r.lower - v, i, Side::Lower));
            } else if v - r.upper > settings.feasibility_tol {
                violated.push((v - r.upper, i, Side::Upper));
            }
        }
        let mut worst_sign = (settings.multiplier_tol * qd.scale, None);
        for (k, &(i, side)) in working.iter().enumerate() {
            if rows[i].is_equality() {
                continue;
            }
            // multipliers of the condition `H x + q + Aᵀ λ = 0`
            let wrong = match side {
                Side::Upper => -lambda[k],
                Side::Lower => lambda[k],
            };
            if wrong > worst_sign.0 {
                worst_sign = (wrong, Some(k));
            }
        }

        if !violated.is_empty() {
            // new rows go ahead of older inequalities so that the
            // independence filter drops the older ones on a tie
            violated.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let eq = working.iter().take_while(|&&(i, _)| rows[i].is_equality()).count();
            let tail = working.split_off(eq);
            working.extend(violated.into_iter().map(|(_, i, side)| (i, side)));
            working.extend(tail);
        } else if let Some(k) = worst_sign.1 {
            working.remove(k);
        } else {
            return Ok(Polished {
                x,
                rounds: round,
                active_rows: working.len(),
            });
        }
    }
    Err(PolishFailure::RoundLimit {
        rounds: settings.max_rounds,
    })
}

/// The rows of `working`, in order, that are linearly independent of the
/// ones kept before them.
fn independent(rows: &[LinearConstraint], n: usize, working: &[(usize, Side)]) -> Vec<(usize, Side)> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut kept = Vec::with_capacity(working.len());
    let mut v = vec![0.0; n];
    for &(i, side) in working {
        v.iter_mut().for_each(|e| *e = 0.0);
        for &(j, a) in &rows[i].terms {
            v[j] += a;
        }
        let norm0 = norm2(&v);
        if norm0 == 0.0 {
            continue;
        }
        // two passes of Gram-Schmidt
        for _ in 0..2 {
            for q in &basis {
                let d = dot(q, &v);
                for (e, qe) in v.iter_mut().zip(q) {
                    *e -= d * qe;
                }
            }
        }
        let norm = norm2(&v);
        if norm > 1e-9 * norm0 {
            basis.push(v.iter().map(|e| e / norm).collect());
            kept.push((i, side));
        }
    }
    kept
}

fn solve_kkt(
    qd: &Quadratic,
    problem: &ScopfProblem,
    set: &[(usize, Side)],
    settings: &PolishSettings,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = qd.n;
    let m = set.len();
    let dim = n + m;
    let rows = &problem.constraints;

    let mut k0 = vec![0.0; dim * dim];
    for i in 0..n {
        k0[i * dim..i * dim + n].copy_from_slice(&qd.h[i * n..(i + 1) * n]);
    }
    let mut rhs = vec![0.0; dim];
    for i in 0..n {
        rhs[i] = -qd.q[i];
    }
    for (k, &(r, side)) in set.iter().enumerate() {
        let row = n + k;
        for &(j, v) in &rows[r].terms {
            k0[row * dim + j] += v;
            k0[j * dim + row] += v;
        }
        rhs[row] = match side {
            Side::Upper => rows[r].upper,
            Side::Lower => rows[r].lower,
        };
    }

    let delta = settings.regularization * qd.scale;
    let mut kreg = k0.clone();
    for i in 0..dim {
        kreg[i * dim + i] += if i < n { delta } else { -settings.regularization };
    }
    let f = Ldlt::factor(dim, kreg).ok()?;

    let mut z = rhs.clone();
    f.solve_in_place(&mut z);
    for _ in 0..settings.refinement_steps {
        let mut r = rhs.clone();
        for i in 0..dim {
            let row = &k0[i * dim..(i + 1) * dim];
            r[i] -= row.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
        }
        f.solve_in_place(&mut r);
        for (zi, ri) in z.iter_mut().zip(&r) {
            *zi += ri;
        }
    }
    if z.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let lambda = z.split_off(n);
    Some((z, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Bus, CaseData, CostModel, DeratingSet, GenId, Generator, GridCase, OutageSet};
    use crate::schedule::StepResolution;
    use crate::scopf::{build_scopf, check_solution, BuildConfig};

    fn one_bus(p_max_1: f64) -> ScopfProblem {
        let cost = |a, b| CostModel {
            alpha_sqr: a,
            alpha_lin: b,
            ..CostModel::default()
        };
        let gens = vec![
            Generator::new(1, 1, 0.0, p_max_1, cost(0.02, 10.0)),
            Generator::new(2, 1, 0.0, 200.0, cost(0.03, 10.0)),
        ];
        let mut data = CaseData::new(100.0, vec![Bus::new(1, 100.0)], Vec::new(), gens);
        data.generators.iter_mut().for_each(|g| g.initial_dispatch = 50.0);
        let step = StepResolution {
            step: 1,
            basecase_outages: OutageSet::new(),
            applied_outages: OutageSet::new(),
            security_contingencies: Vec::new(),
            derate_targets: DeratingSet::new(),
        };
        build_scopf(&GridCase::new(data).unwrap(), &step, &BuildConfig::default()).unwrap()
    }

    fn perturbed(p: &ScopfProblem, d1: f64, d2: f64) -> Vec<f64> {
        let mut x = vec![0.0; p.layout.len()];
        x[p.layout.dispatch(0, 0, GenId(1)).unwrap()] = d1 / 100.0;
        x[p.layout.dispatch(0, 0, GenId(2)).unwrap()] = d2 / 100.0;
        x
    }

    #[test]
    fn interior_optimum_is_exact() {
        let p = one_bus(200.0);
        let out = polish(&p, &perturbed(&p, 59.99, 40.02), None, &PolishSettings::default()).unwrap();
        let d = p.dispatch(&out.x, 0, 0);
        assert!((d[&GenId(1)] - 60.0).abs() < 1e-9, "{d:?}");
        assert!((d[&GenId(2)] - 40.0).abs() < 1e-9, "{d:?}");
        let check = check_solution(&p, &out.x, 1e-9).unwrap();
        assert!(check.is_feasible(), "{check:?}");
        let expected = 0.02 * 3600.0 + 600.0 + 0.03 * 1600.0 + 400.0;
        assert!((check.objective - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn binding_capacity_is_found() {
        let p = one_bus(55.0);
        // start from the unconstrained optimum, which violates p_max
        let out = polish(&p, &perturbed(&p, 60.0, 40.0), None, &PolishSettings::default()).unwrap();
        let d = p.dispatch(&out.x, 0, 0);
        assert!((d[&GenId(1)] - 55.0).abs() < 1e-9, "{d:?}");
        assert!((d[&GenId(2)] - 45.0).abs() < 1e-9, "{d:?}");
        assert!(check_solution(&p, &out.x, 1e-9).unwrap().is_feasible());
    }

    #[test]
    fn wrong_length_is_rejected() {
        let p = one_bus(200.0);
        assert_eq!(
            polish(&p, &[0.0], None, &PolishSettings::default()),
            Err(PolishFailure::Dimension {
                expected: p.layout.len(),
                found: 1
            })
        );
    }
}
