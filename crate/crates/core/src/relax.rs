//! Lifted conic relaxation of the SCOPF.
//!
//! Every squared dispatch `p²` is replaced by a variable `O` and every product
//! `p_(t−1)·p_t` of consecutive base-case dispatch by `h`. The lifted
//! variables are tied back to `p` through
//!
//! * a 3×3 moment block `[[1, p_(t−1), p_t], [p_(t−1), O_(t−1), h], [p_t, h, O_t]] ⪰ 0`
//!   for each consecutive base-case pair,
//! * the rotated cone `O ≥ p²` and `O ≥ 0` for every `O`,
//! * the box cut `O + p_min·p_max ≤ (p_min + p_max)·p`.
//!
//! The first-period wear term anchors to a constant and stays linear:
//! `κ(O − 2·p0·p + p0²)`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::conic::{eig3_sym, Affine, ConicBuilder, ConicProgram};
use crate::grid::{Dispatch, GenId};
use crate::scopf::{check_solution, ScopfError, ScopfProblem, SolutionCheckReport, WearAnchor};

pub const DEFAULT_RANK_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LiftConfig {
    /// Also add moment blocks (and their `h`) for consecutive periods of every
    /// security case, not only the base case.
    pub blocks_for_all_cases: bool,
}

/// Lifted matrix `[[1, p_prev, p_cur], [p_prev, O_prev, h], [p_cur, h, O_cur]]`
/// over the lifted layout, entries in the order `00, 10, 20, 11, 21, 22`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentBlock {
    pub generator: GenId,
    /// Period of `p_cur`; `p_prev` belongs to `period − 1`.
    pub period: usize,
    pub case: usize,
    pub entries: [Affine; 6],
}

impl MomentBlock {
    fn new(generator: GenId, period: usize, case: usize, prev: (usize, usize), cur: (usize, usize), h: usize) -> Self {
        let v = |i| Affine::var(i, 1.0);
        Self {
            generator,
            period,
            case,
            entries: [Affine::constant(1.0), v(prev.0), v(cur.0), v(prev.1), v(h), v(cur.1)],
        }
    }

    pub fn matrix(&self, x: &[f64]) -> [[f64; 3]; 3] {
        let e: Vec<f64> = self.entries.iter().map(|a| a.eval(x)).collect();
        [[e[0], e[1], e[2]], [e[1], e[3], e[4]], [e[2], e[4], e[5]]]
    }
}

/// `O ≥ p²`, `O ≥ 0`, `O + p_min·p_max ≤ (p_min + p_max)·p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareCut {
    pub p: usize,
    pub o: usize,
    pub p_min: f64,
    pub p_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftedProblem {
    pub base: ScopfProblem,
    /// Dispatch column to its `O` column.
    pub squares: BTreeMap<usize, usize>,
    /// `(p_prev, p_cur)` dispatch columns to their `h` column.
    pub products: BTreeMap<(usize, usize), usize>,
    pub blocks: Vec<MomentBlock>,
    pub cuts: Vec<SquareCut>,
    pub num_vars: usize,
}

impl LiftedProblem {
    /// Objective with `O` for `p²` and `h` for `p_prev·p_cur`; linear in the
    /// lifted columns.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let obj = &self.base.objective;
        let mut total = 0.0;
        for d in &obj.dispatch {
            total += d.alpha_sqr * x[self.squares[&d.var]] + d.alpha_lin * x[d.var] + d.zeta;
        }
        for w in &obj.wear {
            let o_cur = x[self.squares[&w.current]];
            total += match w.previous {
                WearAnchor::Variable(q) => {
                    let h = x[self.products[&(q, w.current)]];
                    w.kappa * (o_cur + x[self.squares[&q]] - 2.0 * h)
                }
                WearAnchor::Fixed(p0) => w.kappa * (o_cur - 2.0 * p0 * x[w.current] + p0 * p0),
            };
        }
        for &(i, c) in &obj.reserve {
            total += c * x[i];
        }
        total
    }

    /// Extends a point of the base layout with `O = p²` and `h = p_prev·p_cur`.
    pub fn lift_point(&self, base: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.num_vars];
        x[..base.len()].copy_from_slice(base);
        for (&p, &o) in &self.squares {
            x[o] = base[p] * base[p];
        }
        for (&(q, p), &h) in &self.products {
            x[h] = base[q] * base[p];
        }
        x
    }

    fn builder(&self) -> ConicBuilder {
        let mut b = ConicBuilder::with_vars(self.num_vars);
        self.base.add_linear_rows(&mut b);
        let obj = &self.base.objective;
        for d in &obj.dispatch {
            b.add_cost(d.var, d.alpha_lin);
            b.add_cost(self.squares[&d.var], d.alpha_sqr);
            b.add_offset(d.zeta);
        }
        for w in &obj.wear {
            b.add_cost(self.squares[&w.current], w.kappa);
            match w.previous {
                WearAnchor::Variable(q) => {
                    b.add_cost(self.squares[&q], w.kappa);
                    b.add_cost(self.products[&(q, w.current)], -2.0 * w.kappa);
                }
                WearAnchor::Fixed(p0) => {
                    b.add_cost(w.current, -2.0 * w.kappa * p0);
                    b.add_offset(w.kappa * p0 * p0);
                }
            }
        }
        for &(i, c) in &obj.reserve {
            b.add_cost(i, c);
        }
        for blk in &self.blocks {
            b.psd3(blk.entries.clone());
        }
        for cut in &self.cuts {
            let (p, o) = (cut.p, cut.o);
            b.soc(vec![
                Affine::new(vec![(o, 1.0)], 1.0),
                Affine::new(vec![(o, 1.0)], -1.0),
                Affine::var(p, 2.0),
            ]);
            b.nonneg(Affine::var(o, 1.0));
            b.nonneg(Affine::new(
                vec![(p, cut.p_min + cut.p_max), (o, -1.0)],
                -cut.p_min * cut.p_max,
            ));
        }
        b
    }
}

/// Lifts `problem` with base-case moment blocks only.
pub fn lift_to_conic(problem: ScopfProblem) -> (LiftedProblem, ConicProgram) {
    lift_to_conic_with(problem, &LiftConfig::default())
}

pub fn lift_to_conic_with(problem: ScopfProblem, config: &LiftConfig) -> (LiftedProblem, ConicProgram) {
    let mut next = problem.layout.len();
    let mut fresh = || {
        next += 1;
        next - 1
    };

    let mut squares = BTreeMap::new();
    let mut cuts = Vec::new();
    for d in &problem.objective.dispatch {
        let o = fresh();
        squares.insert(d.var, o);
        cuts.push(SquareCut {
            p: d.var,
            o,
            p_min: d.p_min,
            p_max: d.p_max,
        });
    }

    let mut products = BTreeMap::new();
    let mut blocks = Vec::new();
    for t in 1..problem.periods() {
        let cases = if config.blocks_for_all_cases {
            problem.cases(t).min(problem.cases(t - 1))
        } else {
            1
        };
        for c in 0..cases {
            for g in problem.snapshots[t][c].generator_ids() {
                let (Some(p), Some(q)) = (problem.layout.dispatch(t, c, g), problem.layout.dispatch(t - 1, c, g)) else {
                    continue;
                };
                let h = fresh();
                products.insert((q, p), h);
                blocks.push(MomentBlock::new(g, t, c, (q, squares[&q]), (p, squares[&p]), h));
            }
        }
    }

    let lifted = LiftedProblem {
        base: problem,
        squares,
        products,
        blocks,
        cuts,
        num_vars: next,
    };
    let program = lifted.builder().build();
    (lifted, program)
}

/// `λ₂/λ₁` of a symmetric 3×3 matrix with eigenvalues clamped at zero, and
/// whether the matrix was degenerate (`λ₁ ≤ 0`, reported as residual 0).
pub fn rank1_residual(m: &[[f64; 3]; 3]) -> (f64, bool) {
    let eig = eig3_sym(m);
    let l1 = eig.values[0].max(0.0);
    let l2 = eig.values[1].max(0.0);
    if l1 <= 0.0 {
        return (0.0, true);
    }
    (l2 / l1, false)
}

/// `λ₂/λ₁` of `[[1, p], [p, o]]`, the rank-1 residual of a lifted square
/// without a moment block.
pub fn square_residual(p: f64, o: f64) -> f64 {
    let tr = 1.0 + o;
    let det = o - p * p;
    let disc = libm::sqrt((0.25 * tr * tr - det).max(0.0));
    let l1 = (0.5 * tr + disc).max(0.0);
    let l2 = (0.5 * tr - disc).max(0.0);
    if l1 <= 0.0 {
        0.0
    } else {
        l2 / l1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockResidual {
    pub generator: GenId,
    pub period: usize,
    pub case: usize,
    pub residual: f64,
    pub degenerate: bool,
    /// False for a lone square `[[1, p], [p, O]]`.
    pub moment_block: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationResult {
    /// `f_r`, dollars.
    pub relaxed_objective: f64,
    /// The first-order columns of the solution, in the base layout.
    pub point: Vec<f64>,
    /// Recovered base-case dispatch per period, MW.
    pub dispatch: Vec<Dispatch>,
    pub residuals: Vec<BlockResidual>,
    pub max_residual: f64,
    /// `100·(f_opt − f_r)/max(|f_opt|, ε)`, when a reference optimum is given.
    pub gap_percent: Option<f64>,
    /// `100·(f_r − f_opt)/f_r`, the opposite orientation.
    pub gap_percent_printed: Option<f64>,
    pub exact: bool,
    pub check: SolutionCheckReport,
}

impl RelaxationResult {
    pub fn recovered_feasible(&self) -> bool {
        self.check.is_feasible()
    }
}

/// Size of the gap between a relaxation bound `f_r` and a reference optimum
/// `f_opt`, in percent of `f_opt`. Solver tolerance can put `f_r` a hair
/// above `f_opt`; only the magnitude is reported.
pub fn gap_percent(f_r: f64, f_opt: f64) -> f64 {
    100.0 * (f_opt - f_r).abs() / f_opt.abs().max(f64::EPSILON)
}

/// Reads back the solved point, measures rank-1 residuals and the gap, and
/// checks the recovered dispatch against the original constraints.
///
/// Lone squares count towards the residual only where they carry a
/// quadratic cost; elsewhere `O` is free above `p²` and carries no meaning.
pub fn recover_and_gap(
    lifted: &LiftedProblem,
    x: &[f64],
    f_opt: Option<f64>,
    rank_tol: f64,
    feasibility_tol: f64,
) -> Result<RelaxationResult, ScopfError> {
    if x.len() < lifted.num_vars {
        return Err(ScopfError::Dimension {
            expected: lifted.num_vars,
            found: x.len(),
        });
    }
    let base = &lifted.base;
    let n = base.layout.len();
    let point = x[..n].to_vec();
    let relaxed_objective = lifted.objective(x);

    let mut residuals = Vec::new();
    let mut in_block = alloc::collections::BTreeSet::new();
    for blk in &lifted.blocks {
        let (residual, degenerate) = rank1_residual(&blk.matrix(x));
        residuals.push(BlockResidual {
            generator: blk.generator,
            period: blk.period,
            case: blk.case,
            residual,
            degenerate,
            moment_block: true,
        });
        for e in &blk.entries[1..3] {
            in_block.insert(e.terms[0].0);
        }
    }
    for d in &base.objective.dispatch {
        if d.alpha_sqr > 0.0 && !in_block.contains(&d.var) {
            let key = base.layout.key(d.var);
            residuals.push(BlockResidual {
                generator: d.generator,
                period: key.period,
                case: key.case,
                residual: square_residual(x[d.var], x[lifted.squares[&d.var]]),
                degenerate: false,
                moment_block: false,
            });
        }
    }
    let max_residual = residuals.iter().map(|r| r.residual).fold(0.0, f64::max);

    let check = check_solution(base, &point, feasibility_tol)?;
    let dispatch = (0..base.periods()).map(|t| base.dispatch(&point, t, 0)).collect();
    Ok(RelaxationResult {
        relaxed_objective,
        dispatch,
        residuals,
        max_residual,
        gap_percent: f_opt.map(|f| gap_percent(relaxed_objective, f)),
        gap_percent_printed: f_opt.map(|f| 100.0 * (relaxed_objective - f) / relaxed_objective.abs().max(f64::EPSILON)),
        exact: max_residual <= rank_tol,
        check,
        point,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn outer_product_block_has_zero_residual() {
        let m = [[1.0, 1.0, 2.0], [1.0, 1.0, 2.0], [2.0, 2.0, 4.0]];
        let (r, degenerate) = rank1_residual(&m);
        assert!(r < 1e-12 && !degenerate);
    }

    #[test]
    fn identity_has_unit_residual() {
        let m = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(close(rank1_residual(&m).0, 1.0, 1e-12));
    }

    #[test]
    fn diagonal_residual_reads_off_eigenvalues() {
        let m = [[4.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]];
        assert!(close(rank1_residual(&m).0, 0.25, 1e-12));
    }

    #[test]
    fn zero_block_is_degenerate_rank_one() {
        assert_eq!(rank1_residual(&[[0.0; 3]; 3]), (0.0, true));
        let m = [[-1.0, 0.0, 0.0], [0.0, -2.0, 0.0], [0.0, 0.0, -3.0]];
        assert_eq!(rank1_residual(&m), (0.0, true));
    }

    #[test]
    fn square_residual_matches_eigenvalues() {
        assert!(square_residual(2.0, 4.0) < 1e-15);
        // [[1, 0], [0, 0.5]]
        assert!(close(square_residual(0.0, 0.5), 0.5, 1e-15));
        assert!(close(square_residual(0.0, 2.0), 0.5, 1e-15));
    }

    #[test]
    fn gap_magnitude() {
        assert!(close(gap_percent(99.0, 100.0), 1.0, 1e-12));
        assert_eq!(gap_percent(100.0, 100.0), 0.0);
        assert!(close(gap_percent(100.5, 100.0), 0.5, 1e-12));
    }

    #[test]
    fn moment_block_layout() {
        let blk = MomentBlock::new(GenId(1), 1, 0, (0, 2), (1, 3), 4);
        // p_prev = 1, p_cur = 2, O = (1, 4), h = 2
        let x = [1.0, 2.0, 1.0, 4.0, 2.0];
        assert_eq!(blk.matrix(&x), [[1.0, 1.0, 2.0], [1.0, 1.0, 2.0], [2.0, 2.0, 4.0]]);
    }
}
