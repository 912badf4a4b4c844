//! Linear conic programs and the embedded splitting solver.
//!
//! Programs are stated in the form
//!
//! ```text
//! minimize    cᵀx + offset
//! subject to  Ax + s = b,   s ∈ K
//! ```
//!
//! where `K` is a product of zero cones (equality rows), nonnegative orthants,
//! second-order cones and 3×3 positive semidefinite cones. PSD blocks use the
//! isometric vectorization `[X00, √2·X10, √2·X20, X11, √2·X21, X22]`, which
//! makes every cone except the zero cone self-dual. The dual is
//!
//! ```text
//! maximize    -bᵀy
//! subject to  Aᵀy + c = 0,   y ∈ K*
//! ```

mod cones;
mod equilibrate;
mod solver;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::linalg::{dot, norm2, CscMatrix};

pub use cones::{eig3_sym, project_cone, project_dual_in_place, project_in_place, smat3, svec3, Eigen3, SQRT2};
pub use solver::{solve, solve_warm};

/// One block of the cone product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cone {
    /// `s = 0`; rows are equalities and their multipliers are free.
    Zero(usize),
    NonNegative(usize),
    /// `{(t, x) : ‖x‖ ≤ t}` of the given total dimension.
    SecondOrder(usize),
    /// 3×3 symmetric PSD matrices, six slack entries.
    Psd3,
}

impl Cone {
    pub fn dim(self) -> usize {
        match self {
            Cone::Zero(d) | Cone::NonNegative(d) | Cone::SecondOrder(d) => d,
            Cone::Psd3 => 6,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Cone::Zero(_) => "zero",
            Cone::NonNegative(_) => "nonneg",
            Cone::SecondOrder(_) => "soc",
            Cone::Psd3 => "psd3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConicError {
    #[error("constraint matrix is {rows}x{cols} but b has {b} entries and c has {c}")]
    Dimensions { rows: usize, cols: usize, b: usize, c: usize },
    #[error("cone dimensions sum to {sum} but the program has {rows} rows")]
    ConeSizes { sum: usize, rows: usize },
    #[error("second-order cone of dimension {0} (must be at least 2)")]
    SecondOrderTooSmall(usize),
    #[error("point has {found} entries, expected {expected}")]
    PointDimension { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    a: CscMatrix,
    b: Vec<f64>,
    c: Vec<f64>,
    offset: f64,
    cones: Vec<Cone>,
}

impl ConicProgram {
    pub fn new(
        a: CscMatrix,
        b: Vec<f64>,
        c: Vec<f64>,
        offset: f64,
        cones: Vec<Cone>,
    ) -> Result<Self, ConicError> {
        if b.len() != a.nrows || c.len() != a.ncols {
            return Err(ConicError::Dimensions {
                rows: a.nrows,
                cols: a.ncols,
                b: b.len(),
                c: c.len(),
            });
        }
        let sum: usize = cones.iter().map(|k| k.dim()).sum();
        if sum != a.nrows {
            return Err(ConicError::ConeSizes { sum, rows: a.nrows });
        }
        if let Some(Cone::SecondOrder(d)) = cones.iter().find(|k| matches!(k, Cone::SecondOrder(d) if *d < 2)) {
            return Err(ConicError::SecondOrderTooSmall(*d));
        }
        Ok(Self { a, b, c, offset, cones })
    }

    pub fn a(&self) -> &CscMatrix {
        &self.a
    }
    pub fn b(&self) -> &[f64] {
        &self.b
    }
    pub fn c(&self) -> &[f64] {
        &self.c
    }
    pub fn offset(&self) -> f64 {
        self.offset
    }
    pub fn cones(&self) -> &[Cone] {
        &self.cones
    }
    pub fn num_vars(&self) -> usize {
        self.a.ncols
    }
    pub fn num_rows(&self) -> usize {
        self.a.nrows
    }

    /// Replaces the right-hand side, keeping everything else.
    pub fn with_rhs(&self, b: Vec<f64>) -> Result<Self, ConicError> {
        Self::new(self.a.clone(), b, self.c.clone(), self.offset, self.cones.clone())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        dot(&self.c, x) + self.offset
    }

    /// Row ranges of each cone block.
    pub fn cone_ranges(&self) -> impl Iterator<Item = (Cone, core::ops::Range<usize>)> + '_ {
        let mut start = 0;
        self.cones.iter().map(move |&k| {
            let r = start..start + k.dim();
            start += k.dim();
            (k, r)
        })
    }

    /// Writes the program as sparse triplet text:
    ///
    /// ```text
    /// conic <m> <n> <nnz>
    /// offset <value>
    /// cones <count>
    /// <kind> <dim>            one line per block, kinds zero|nonneg|soc|psd3
    /// A                       then nnz lines "<row> <col> <value>" (0-based)
    /// b                       then m lines
    /// c                       then n lines
    /// ```
    ///
    /// Values use Rust's shortest round-trip float formatting.
    pub fn dump_triplets(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "conic {} {} {}", self.a.nrows, self.a.ncols, self.a.nnz());
        let _ = writeln!(out, "offset {:?}", self.offset);
        let _ = writeln!(out, "cones {}", self.cones.len());
        for k in &self.cones {
            let _ = writeln!(out, "{} {}", k.name(), k.dim());
        }
        out.push_str("A\n");
        for (r, c, v) in self.a.triplets() {
            let _ = writeln!(out, "{r} {c} {v:?}");
        }
        out.push_str("b\n");
        for v in &self.b {
            let _ = writeln!(out, "{v:?}");
        }
        out.push_str("c\n");
        for v in &self.c {
            let _ = writeln!(out, "{v:?}");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub eps_primal: f64,
    pub eps_dual: f64,
    pub eps_gap: f64,
    pub eps_infeasible: f64,
    pub max_iters: usize,
    /// Ruiz equilibration of the constraint matrix.
    pub scaling: bool,
    /// Over-relaxation factor in (0, 2).
    pub relaxation: f64,
    /// Relative weight of the primal variables in the splitting metric.
    pub rho_x: f64,
    /// Multiplier applied to the normalized `b` and `c`.
    pub scale: f64,
    /// Termination tests run every this many iterations.
    pub check_interval: usize,
    /// Anderson acceleration history length; 0 disables acceleration.
    pub anderson_memory: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            eps_primal: 1e-6,
            eps_dual: 1e-6,
            eps_gap: 1e-6,
            eps_infeasible: 1e-7,
            max_iters: 100_000,
            scaling: true,
            relaxation: 1.5,
            rho_x: 3e-2,
            scale: 1.0,
            check_interval: 5,
            anderson_memory: 10,
        }
    }
}

impl SolverSettings {
    pub fn with_tolerance(mut self, eps: f64) -> Self {
        self.eps_primal = eps;
        self.eps_dual = eps;
        self.eps_gap = eps;
        self
    }

    pub fn is_valid(&self) -> bool {
        self.eps_primal > 0.0
            && self.eps_dual > 0.0
            && self.eps_gap > 0.0
            && self.eps_infeasible > 0.0
            && self.relaxation > 0.0
            && self.relaxation < 2.0
            && self.rho_x > 0.0
            && self.scale > 0.0
            && self.check_interval > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIterations,
}

/// Normalized residuals of a primal-dual point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub status: SolverStatus,
    /// Primal point, or the unboundedness direction when dual infeasible.
    pub x: Vec<f64>,
    /// Dual point, or the infeasibility certificate (scaled so `bᵀy = -1`).
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    /// `cᵀx + offset`; NaN unless optimal or out of iterations.
    pub objective: f64,
    pub residuals: Residuals,
    /// Normalized certificate residual when an infeasibility status is returned.
    pub certificate_residual: Option<f64>,
    pub iterations: usize,
    /// Wall time in seconds; zero without the `std` feature.
    pub solve_time: f64,
}

impl SolverResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolverStatus::Optimal
    }

    pub fn warm_start(&self) -> WarmStart {
        WarmStart {
            x: self.x.clone(),
            y: self.y.clone(),
            s: self.s.clone(),
        }
    }
}

/// Initial primal-dual guess in unscaled coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
}

/// Normalized primal, dual and gap residuals of `(x, y, s)`:
///
/// * primal `‖Ax + s − b‖ / (1 + ‖b‖)`
/// * dual `‖Aᵀy + c‖ / (1 + ‖c‖)`
/// * gap `|cᵀx + bᵀy| / (1 + |cᵀx| + |bᵀy|)`
pub fn residuals(program: &ConicProgram, x: &[f64], y: &[f64], s: &[f64]) -> Result<Residuals, ConicError> {
    let (m, n) = (program.num_rows(), program.num_vars());
    for (expected, found) in [(n, x.len()), (m, y.len()), (m, s.len())] {
        if expected != found {
            return Err(ConicError::PointDimension { expected, found });
        }
    }
    let mut pr = s.to_vec();
    program.a.gemv(1.0, x, &mut pr);
    pr.iter_mut().zip(&program.b).for_each(|(r, b)| *r -= b);
    let mut dr = program.c.clone();
    program.a.gemv_t(1.0, y, &mut dr);
    let cx = dot(&program.c, x);
    let by = dot(&program.b, y);
    Ok(Residuals {
        primal: norm2(&pr) / (1.0 + norm2(&program.b)),
        dual: norm2(&dr) / (1.0 + norm2(&program.c)),
        gap: (cx + by).abs() / (1.0 + cx.abs() + by.abs()),
    })
}

/// Affine expression `constant + Σ coef·x[idx]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn new(terms: Vec<(usize, f64)>, constant: f64) -> Self {
        Self { terms, constant }
    }
    pub fn constant(constant: f64) -> Self {
        Self { terms: Vec::new(), constant }
    }
    pub fn var(idx: usize, coef: f64) -> Self {
        Self { terms: vec![(idx, coef)], constant: 0.0 }
    }
    pub fn scaled(&self, f: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|&(i, v)| (i, v * f)).collect(),
            constant: self.constant * f,
        }
    }
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, v)| v * x[i]).sum::<f64>()
    }
}

/// Incremental assembly of a [`ConicProgram`] from cone-membership statements.
#[derive(Debug, Clone, Default)]
pub struct ConicBuilder {
    c: Vec<f64>,
    offset: f64,
    zero: Vec<Affine>,
    nonneg: Vec<Affine>,
    soc: Vec<Vec<Affine>>,
    psd: Vec<[Affine; 6]>,
}

impl ConicBuilder {
    pub fn with_vars(n: usize) -> Self {
        Self {
            c: vec![0.0; n],
            ..Self::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn add_var(&mut self, cost: f64) -> usize {
        self.c.push(cost);
        self.c.len() - 1
    }

    pub fn add_cost(&mut self, idx: usize, cost: f64) {
        self.c[idx] += cost;
    }

    pub fn add_offset(&mut self, v: f64) {
        self.offset += v;
    }

    /// `expr = 0`
    pub fn zero(&mut self, expr: Affine) {
        self.zero.push(expr);
    }

    /// `expr ≥ 0`
    pub fn nonneg(&mut self, expr: Affine) {
        self.nonneg.push(expr);
    }

    /// `(e0, e1, …) ∈ SOC`, i.e. `‖(e1, …)‖ ≤ e0`.
    pub fn soc(&mut self, exprs: Vec<Affine>) {
        assert!(exprs.len() >= 2);
        self.soc.push(exprs);
    }

    /// `[[e00, e10, e20], [e10, e11, e21], [e20, e21, e22]] ⪰ 0`, entries given
    /// in the order `e00, e10, e20, e11, e21, e22`.
    pub fn psd3(&mut self, entries: [Affine; 6]) {
        self.psd.push(entries);
    }

    pub fn build(self) -> ConicProgram {
        let n = self.c.len();
        let mut triplets = Vec::new();
        let mut b = Vec::new();
        let mut cones = Vec::new();
        let mut row = 0usize;
        let mut push = |e: &Affine, f: f64, triplets: &mut Vec<(usize, usize, f64)>, b: &mut Vec<f64>| {
            // slack = expr  =>  s = b - A x with A = -coef, b = constant
            for &(i, v) in &e.terms {
                triplets.push((row, i, -v * f));
            }
            b.push(e.constant * f);
            row += 1;
        };
        if !self.zero.is_empty() {
            self.zero.iter().for_each(|e| push(e, 1.0, &mut triplets, &mut b));
            cones.push(Cone::Zero(self.zero.len()));
        }
        if !self.nonneg.is_empty() {
            self.nonneg.iter().for_each(|e| push(e, 1.0, &mut triplets, &mut b));
            cones.push(Cone::NonNegative(self.nonneg.len()));
        }
        for block in &self.soc {
            block.iter().for_each(|e| push(e, 1.0, &mut triplets, &mut b));
            cones.push(Cone::SecondOrder(block.len()));
        }
        for block in &self.psd {
            for (k, e) in block.iter().enumerate() {
                let f = if matches!(k, 1 | 2 | 4) { SQRT2 } else { 1.0 };
                push(e, f, &mut triplets, &mut b);
            }
            cones.push(Cone::Psd3);
        }
        let a = CscMatrix::from_triplets(b.len(), n, &triplets);
        ConicProgram::new(a, b, self.c, self.offset, cones).expect("builder produces consistent programs")
    }
}
