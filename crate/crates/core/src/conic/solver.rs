//! Operator splitting on the homogeneous self-dual embedding.
//!
//! With `u = (x, y, τ)` and `v = (0, s, κ)` the embedding asks for
//! `Qu = v`, `u ∈ ℝⁿ × K* × ℝ₊`, `v ∈ {0}ⁿ × K × ℝ₊`, where
//!
//! ```text
//!     [  0   Aᵀ  c ]
//! Q = [ -A   0   b ]
//!     [ -cᵀ -bᵀ  0 ]
//! ```
//!
//! Each iteration solves one system with `I + Q` (a cached dense Cholesky
//! factor of `I + ÂᵀÂ` does the heavy lifting), projects onto the cone product
//! and updates the dual iterate. `τ > 0` at the limit yields an optimum;
//! `κ > 0` yields an infeasibility certificate.

use alloc::vec;
use alloc::vec::Vec;

use super::equilibrate::Scaled;
use super::{cones, residuals, ConicProgram, SolverResult, SolverSettings, SolverStatus, WarmStart};
use crate::linalg::{dot, norm2, Cholesky, CscMatrix};

pub fn solve(program: &ConicProgram, settings: &SolverSettings) -> SolverResult {
    solve_warm(program, settings, None)
}

pub fn solve_warm(program: &ConicProgram, settings: &SolverSettings, warm: Option<&WarmStart>) -> SolverResult {
    #[cfg(feature = "std")]
    let started = std::time::Instant::now();
    #[allow(unused_mut)]
    let mut result = Splitting::new(program, settings).run(warm);
    #[cfg(feature = "std")]
    {
        result.solve_time = started.elapsed().as_secs_f64();
    }
    result
}

struct Splitting<'a> {
    program: &'a ConicProgram,
    settings: &'a SolverSettings,
    scaled: Scaled,
    chol: Cholesky,
    /// `h = (ĉ, b̂)`
    h: Vec<f64>,
    /// `M⁻¹h`
    p: Vec<f64>,
    /// `1 + hᵀM⁻¹h`
    denom: f64,
}

impl<'a> Splitting<'a> {
    fn new(program: &'a ConicProgram, settings: &'a SolverSettings) -> Self {
        let scaled = Scaled::new(program, settings);
        let n = program.num_vars();
        let chol = Cholesky::factor(n, scaled.a.gram_plus_identity(1.0))
            .expect("I + AᵀA is positive definite for finite data");
        let mut h = scaled.c.clone();
        h.extend_from_slice(&scaled.b);
        let mut p = h.clone();
        solve_m(&chol, &scaled.a, &mut p);
        let denom = 1.0 + dot(&h, &p);
        Self {
            program,
            settings,
            scaled,
            chol,
            h,
            p,
            denom,
        }
    }

    fn run(&self, warm: Option<&WarmStart>) -> SolverResult {
        let (m, n) = (self.program.num_rows(), self.program.num_vars());
        let l = n + m + 1;
        let alpha = self.settings.relaxation;
        let mut u = vec![0.0; l];
        let mut z = vec![0.0; l];

        // w is the point the cone projection acts on: u = Π(w), v = u − w.
        let mut w = vec![0.0; l];
        match warm {
            Some(ws) if ws.x.len() == n && ws.y.len() == m && ws.s.len() == m => {
                w[..n].copy_from_slice(&self.scaled.scale_x(&ws.x));
                let (y, s) = (self.scaled.scale_y(&ws.y), self.scaled.scale_s(&ws.s));
                for i in 0..m {
                    w[n + i] = y[i] - s[i];
                }
                w[l - 1] = 1.0;
            }
            _ => {
                // u = (0, 0, 1), v = (0, 0, 1) is not a Moreau pair, so take
                // the first step by hand.
                z[l - 1] = 2.0;
                self.solve_embedded(&mut z);
                for i in 0..l {
                    w[i] = alpha * z[i];
                }
                w[l - 1] += (1.0 - alpha) - 1.0;
            }
        }

        let mut fw = vec![0.0; l];
        let mut accel = Anderson::new(self.settings.anderson_memory);
        let mut fallback: Option<(Vec<f64>, f64)> = None;
        let mut last = Candidate::default();
        let mut iter = 0;
        while iter < self.settings.max_iters {
            iter += 1;
            self.fixed_point(&w, &mut u, &mut z, &mut fw);
            let res_norm = dist(&w, &fw);

            if let Some((plain, prev_norm)) = fallback.take() {
                if !(res_norm <= SAFEGUARD * prev_norm) {
                    w = plain;
                    accel.reset();
                    continue;
                }
            }

            if iter % self.settings.check_interval == 0 || iter == self.settings.max_iters {
                last = self.evaluate(&u, &w);
                if let Some(status) = last.status {
                    return self.finish(status, last, iter);
                }
            }

            match accel.extrapolate(&w, &fw) {
                Some(next) if next.iter().all(|v| v.is_finite()) => {
                    fallback = Some((core::mem::replace(&mut w, next), res_norm));
                    if let Some((plain, _)) = fallback.as_mut() {
                        plain.copy_from_slice(&fw);
                    }
                }
                _ => w.copy_from_slice(&fw),
            }
        }
        self.finish(SolverStatus::MaxIterations, last, iter)
    }

    /// One relaxed Douglas-Rachford step: `u = Π(w)`, `ũ = (I + Q)⁻¹(2u − w)`,
    /// `F(w) = w + α(ũ − u)`.
    fn fixed_point(&self, w: &[f64], u: &mut [f64], z: &mut [f64], out: &mut [f64]) {
        let l = w.len();
        u.copy_from_slice(w);
        self.project(u);
        for i in 0..l {
            z[i] = 2.0 * u[i] - w[i];
        }
        self.solve_embedded(z);
        let alpha = self.settings.relaxation;
        for i in 0..l {
            out[i] = w[i] + alpha * (z[i] - u[i]);
        }
    }

    /// Projection onto `ℝⁿ × K* × ℝ₊`.
    fn project(&self, u: &mut [f64]) {
        let n = self.program.num_vars();
        let l = u.len();
        let mut start = n;
        for &cone in self.program.cones() {
            let d = cone.dim();
            cones::project_dual_in_place(&mut u[start..start + d], cone);
            start += d;
        }
        u[l - 1] = u[l - 1].max(0.0);
    }

    /// `z ← (I + Q)⁻¹ z`
    fn solve_embedded(&self, z: &mut [f64]) {
        let l = z.len();
        let wtau = z[l - 1];
        let head = &mut z[..l - 1];
        solve_m(&self.chol, &self.scaled.a, head);
        let tau = (wtau + dot(&self.h, head)) / self.denom;
        for (zi, pi) in head.iter_mut().zip(&self.p) {
            *zi -= tau * pi;
        }
        z[l - 1] = tau;
    }

    fn evaluate(&self, u: &[f64], w: &[f64]) -> Candidate {
        let (m, n) = (self.program.num_rows(), self.program.num_vars());
        let l = n + m + 1;
        let sh: Vec<f64> = (n..n + m).map(|i| u[i] - w[i]).collect();
        let (xh, yh, sh) = (&u[..n], &u[n..n + m], &sh[..]);
        let mut c = Candidate {
            x: vec![0.0; n],
            y: vec![0.0; m],
            s: vec![0.0; m],
            ..Candidate::default()
        };
        let tau = u[l - 1];
        let s = &self.settings;

        if tau > 0.0 {
            self.scaled.unscale_x(xh, tau, &mut c.x);
            self.scaled.unscale_y(yh, tau, &mut c.y);
            self.scaled.unscale_s(sh, tau, &mut c.s);
            let r = residuals(self.program, &c.x, &c.y, &c.s).expect("dimensions match");
            c.residuals = r;
            if r.primal <= s.eps_primal && r.dual <= s.eps_dual && r.gap <= s.eps_gap {
                c.status = Some(SolverStatus::Optimal);
                return c;
            }
        }

        let mut y_raw = vec![0.0; m];
        self.scaled.unscale_y(yh, 1.0, &mut y_raw);
        let by = dot(self.program.b(), &y_raw);
        if by < 0.0 && by.is_finite() {
            y_raw.iter_mut().for_each(|y| *y /= -by);
            let aty = self.program.a().tmul_vec(&y_raw);
            let cert = norm2(&aty);
            if cert <= s.eps_infeasible {
                c.y = y_raw;
                c.x.iter_mut().for_each(|x| *x = f64::NAN);
                c.s.iter_mut().for_each(|x| *x = f64::NAN);
                c.certificate = Some(cert);
                c.status = Some(SolverStatus::PrimalInfeasible);
                return c;
            }
        }

        let mut x_raw = vec![0.0; n];
        let mut s_raw = vec![0.0; m];
        self.scaled.unscale_x(xh, 1.0, &mut x_raw);
        self.scaled.unscale_s(sh, 1.0, &mut s_raw);
        let cx = dot(self.program.c(), &x_raw);
        if cx < 0.0 && cx.is_finite() {
            x_raw.iter_mut().for_each(|x| *x /= -cx);
            s_raw.iter_mut().for_each(|x| *x /= -cx);
            let mut r = s_raw.clone();
            self.program.a().gemv(1.0, &x_raw, &mut r);
            let cert = norm2(&r);
            if cert <= s.eps_infeasible {
                c.x = x_raw;
                c.s = s_raw;
                c.y.iter_mut().for_each(|y| *y = f64::NAN);
                c.certificate = Some(cert);
                c.status = Some(SolverStatus::DualInfeasible);
                return c;
            }
        }
        c
    }

    fn finish(&self, status: SolverStatus, c: Candidate, iterations: usize) -> SolverResult {
        let objective = match status {
            SolverStatus::Optimal | SolverStatus::MaxIterations => self.program.objective(&c.x),
            _ => f64::NAN,
        };
        SolverResult {
            status,
            objective,
            x: c.x,
            y: c.y,
            s: c.s,
            residuals: c.residuals,
            certificate_residual: c.certificate,
            iterations,
            solve_time: 0.0,
        }
    }
}

#[derive(Debug, Default)]
struct Candidate {
    x: Vec<f64>,
    y: Vec<f64>,
    s: Vec<f64>,
    residuals: super::Residuals,
    certificate: Option<f64>,
    status: Option<SolverStatus>,
}

/// Rejects an accelerated point whose fixed-point residual grew past this
/// multiple of the residual it replaced.
const SAFEGUARD: f64 = 1.0;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += (x - y) * (x - y);
    }
    libm::sqrt(acc)
}

/// Type-II Anderson acceleration of `w ↦ F(w)` with a bounded history.
struct Anderson {
    memory: usize,
    s: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    /// `yᵢᵀyⱼ`, kept in step with `y`.
    gram: Vec<Vec<f64>>,
    prev: Option<(Vec<f64>, Vec<f64>)>,
}

impl Anderson {
    fn new(memory: usize) -> Self {
        Self {
            memory,
            s: Vec::new(),
            y: Vec::new(),
            gram: Vec::new(),
            prev: None,
        }
    }

    fn reset(&mut self) {
        self.s.clear();
        self.y.clear();
        self.gram.clear();
        self.prev = None;
    }

    fn extrapolate(&mut self, w: &[f64], fw: &[f64]) -> Option<Vec<f64>> {
        if self.memory == 0 {
            return None;
        }
        let g: Vec<f64> = w.iter().zip(fw).map(|(a, b)| a - b).collect();
        if let Some((pw, pg)) = self.prev.take() {
            if self.s.len() == self.memory {
                self.s.remove(0);
                self.y.remove(0);
                self.gram.remove(0);
                self.gram.iter_mut().for_each(|row| {
                    row.remove(0);
                });
            }
            let y: Vec<f64> = g.iter().zip(&pg).map(|(a, b)| a - b).collect();
            let mut row: Vec<f64> = self.y.iter().map(|yi| dot(yi, &y)).collect();
            for (r, &v) in self.gram.iter_mut().zip(&row) {
                r.push(v);
            }
            row.push(dot(&y, &y));
            self.gram.push(row);
            self.s.push(w.iter().zip(&pw).map(|(a, b)| a - b).collect());
            self.y.push(y);
        }
        self.prev = Some((w.to_vec(), g.clone()));
        let k = self.y.len();
        if k == 0 {
            return None;
        }

        // (YᵀY + λI) γ = Yᵀg
        let mut gram = vec![0.0; k * k];
        let mut rhs = vec![0.0; k];
        for i in 0..k {
            gram[i * k..(i + 1) * k].copy_from_slice(&self.gram[i]);
            rhs[i] = dot(&self.y[i], &g);
        }
        let trace: f64 = (0..k).map(|i| gram[i * k + i]).sum();
        let reg = 1e-10 * trace.max(f64::MIN_POSITIVE);
        for i in 0..k {
            gram[i * k + i] += reg;
        }
        let chol = Cholesky::factor(k, gram).ok()?;
        chol.solve_in_place(&mut rhs);

        let mut out = fw.to_vec();
        for (i, gamma) in rhs.iter().enumerate() {
            for ((o, s), y) in out.iter_mut().zip(&self.s[i]).zip(&self.y[i]) {
                *o -= gamma * (s - y);
            }
        }
        Some(out)
    }
}

/// Solves `[I Aᵀ; −A I] (x, y) = (wx, wy)` in place.
fn solve_m(chol: &Cholesky, a: &CscMatrix, w: &mut [f64]) {
    let n = a.ncols;
    let (wx, wy) = w.split_at_mut(n);
    a.gemv_t(-1.0, wy, wx);
    chol.solve_in_place(wx);
    a.gemv(1.0, wx, wy);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{Affine, Cone, ConicBuilder};

    fn tight() -> SolverSettings {
        SolverSettings::default().with_tolerance(1e-9)
    }

    #[test]
    fn minimize_x_above_one() {
        let mut b = ConicBuilder::with_vars(1);
        b.add_cost(0, 1.0);
        b.nonneg(Affine::new(vec![(0, 1.0)], -1.0));
        let r = solve(&b.build(), &tight());
        assert_eq!(r.status, SolverStatus::Optimal);
        assert!((r.x[0] - 1.0).abs() < 1e-7);
        assert!((r.objective - 1.0).abs() < 1e-7);
    }

    #[test]
    fn contradictory_bounds_are_primal_infeasible() {
        let mut b = ConicBuilder::with_vars(1);
        b.add_cost(0, 1.0);
        b.nonneg(Affine::new(vec![(0, 1.0)], -1.0));
        b.nonneg(Affine::new(vec![(0, -1.0)], 0.0));
        let p = b.build();
        let r = solve(&p, &SolverSettings::default());
        assert_eq!(r.status, SolverStatus::PrimalInfeasible);
        assert!(r.certificate_residual.unwrap() <= 1e-7);
        assert!((dot(p.b(), &r.y) + 1.0).abs() < 1e-12);
        assert!(r.y.iter().all(|&y| y >= 0.0));
    }

    #[test]
    fn unbounded_is_dual_infeasible() {
        let mut b = ConicBuilder::with_vars(1);
        b.add_cost(0, -1.0);
        b.nonneg(Affine::new(vec![(0, 1.0)], 0.0));
        let r = solve(&b.build(), &SolverSettings::default());
        assert_eq!(r.status, SolverStatus::DualInfeasible);
        assert!(r.x[0] > 0.0);
    }

    #[test]
    fn socp_epigraph_of_square() {
        // min t s.t. t >= (x - 2)^2 via (t + 1, t - 1, 2(x - 2)) in SOC
        let mut b = ConicBuilder::with_vars(2);
        b.add_cost(1, 1.0);
        b.soc(vec![
            Affine::new(vec![(1, 1.0)], 1.0),
            Affine::new(vec![(1, 1.0)], -1.0),
            Affine::new(vec![(0, 2.0)], -4.0),
        ]);
        b.nonneg(Affine::new(vec![(0, -1.0)], 1.0)); // x <= 1
        let r = solve(&b.build(), &tight());
        assert_eq!(r.status, SolverStatus::Optimal);
        assert!((r.x[0] - 1.0).abs() < 1e-6, "{:?}", r.x);
        assert!((r.objective - 1.0).abs() < 1e-6);
    }

    #[test]
    fn psd_block_minimum_eigenvalue() {
        // min trace(C X) over X ⪰ 0, trace X = 1 gives λ_min(C)
        // C = [[2,1,0],[1,2,0],[0,0,3]] has λ_min = 1
        let mut b = ConicBuilder::with_vars(6);
        let cdiag = [2.0, 2.0, 3.0];
        let diag_idx = [0usize, 3, 5];
        for (k, &i) in diag_idx.iter().enumerate() {
            b.add_cost(i, cdiag[k]);
        }
        b.add_cost(1, 2.0); // 2·C10·X10
        b.zero(Affine::new(vec![(0, 1.0), (3, 1.0), (5, 1.0)], -1.0));
        b.psd3(core::array::from_fn(|k| Affine::var(k, 1.0)));
        let r = solve(&b.build(), &tight());
        assert_eq!(r.status, SolverStatus::Optimal);
        assert!((r.objective - 1.0).abs() < 1e-6, "{}", r.objective);
    }

    #[test]
    fn warm_start_converges_quickly() {
        let mut b = ConicBuilder::with_vars(2);
        b.add_cost(0, 1.0);
        b.add_cost(1, 2.0);
        b.nonneg(Affine::new(vec![(0, 1.0), (1, 1.0)], -3.0));
        b.nonneg(Affine::var(0, 1.0));
        b.nonneg(Affine::new(vec![(0, -1.0)], 2.0));
        b.nonneg(Affine::var(1, 1.0));
        let p = b.build();
        let cold = solve(&p, &tight());
        assert_eq!(cold.status, SolverStatus::Optimal);
        assert!((cold.objective - 4.0).abs() < 1e-6);
        let warm = solve_warm(&p, &tight(), Some(&cold.warm_start()));
        assert_eq!(warm.status, SolverStatus::Optimal);
        assert!(warm.iterations <= cold.iterations);
    }

    #[test]
    fn zero_cone_rows_are_equalities() {
        let mut b = ConicBuilder::with_vars(2);
        b.add_cost(0, 1.0);
        b.add_cost(1, 1.0);
        b.zero(Affine::new(vec![(0, 1.0), (1, -1.0)], 0.0));
        b.nonneg(Affine::new(vec![(0, 1.0), (1, 1.0)], -2.0));
        let p = b.build();
        assert_eq!(p.cones()[0], Cone::Zero(1));
        let r = solve(&p, &tight());
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6);
    }
}
