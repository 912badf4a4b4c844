//! Ruiz-style diagonal equilibration of the problem data.
//!
//! The scaled data are `Â = D A E`, `b̂ = σ_b D b`, `ĉ = σ_c E c`. Rows of a
//! second-order or PSD block share one scale factor so cone membership is
//! preserved.

use alloc::vec;
use alloc::vec::Vec;

use super::{Cone, ConicProgram, SolverSettings};
use crate::linalg::{norm2, CscMatrix};

const RUIZ_PASSES: usize = 25;
const MIN_NORM: f64 = 1e-4;
const MAX_NORM: f64 = 1e4;

#[derive(Debug, Clone)]
pub(crate) struct Scaled {
    pub a: CscMatrix,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// Row factors.
    pub d: Vec<f64>,
    /// Column factors.
    pub e: Vec<f64>,
    pub sigma_b: f64,
    pub sigma_c: f64,
}

impl Scaled {
    pub fn new(program: &ConicProgram, settings: &SolverSettings) -> Self {
        let (m, n) = (program.num_rows(), program.num_vars());
        let mut a = program.a().clone();
        let mut d = vec![1.0; m];
        let mut e = vec![1.0; n];

        if settings.scaling {
            for _ in 0..RUIZ_PASSES {
                let mut row_norm = vec![0.0f64; m];
                let mut col_norm = vec![0.0f64; n];
                for (r, c, v) in a.triplets() {
                    row_norm[r] = row_norm[r].max(v.abs());
                    col_norm[c] = col_norm[c].max(v.abs());
                }
                for (k, range) in program.cone_ranges() {
                    if matches!(k, Cone::SecondOrder(_) | Cone::Psd3) {
                        let mean = row_norm[range.clone()].iter().sum::<f64>() / range.len() as f64;
                        row_norm[range].iter_mut().for_each(|r| *r = mean);
                    }
                }
                let dr: Vec<f64> = row_norm.iter().map(|&r| inv_sqrt_clamped(r)).collect();
                let ec: Vec<f64> = col_norm.iter().map(|&c| inv_sqrt_clamped(c)).collect();
                a.scale(&dr, &ec);
                d.iter_mut().zip(&dr).for_each(|(x, f)| *x *= f);
                e.iter_mut().zip(&ec).for_each(|(x, f)| *x *= f);
            }
        }

        // weight the primal block of the splitting metric by rho_x through a
        // uniform column rescaling
        let col = 1.0 / libm::sqrt(settings.rho_x);
        let ones = vec![1.0; m];
        a.scale(&ones, &vec![col; n]);
        e.iter_mut().for_each(|x| *x *= col);

        let mut b: Vec<f64> = program.b().iter().zip(&d).map(|(v, f)| v * f).collect();
        let mut c: Vec<f64> = program.c().iter().zip(&e).map(|(v, f)| v * f).collect();

        let (mut row_sq, mut col_sq) = (vec![0.0; m], vec![0.0; n]);
        for (r, cc, v) in a.triplets() {
            row_sq[r] += v * v;
            col_sq[cc] += v * v;
        }
        let mean_row = mean_sqrt(&row_sq);
        let mean_col = mean_sqrt(&col_sq);
        let nb = norm2(&b);
        let nc = norm2(&c);
        let sigma_b = settings.scale * if nb > 1e-12 { mean_col.max(MIN_NORM) / nb.max(MIN_NORM) } else { 1.0 };
        let sigma_c = settings.scale * if nc > 1e-12 { mean_row.max(MIN_NORM) / nc.max(MIN_NORM) } else { 1.0 };
        b.iter_mut().for_each(|v| *v *= sigma_b);
        c.iter_mut().for_each(|v| *v *= sigma_c);

        Self {
            a,
            b,
            c,
            d,
            e,
            sigma_b,
            sigma_c,
        }
    }

    pub fn unscale_x(&self, xh: &[f64], tau: f64, out: &mut [f64]) {
        let f = 1.0 / (self.sigma_b * tau);
        for ((o, x), e) in out.iter_mut().zip(xh).zip(&self.e) {
            *o = x * e * f;
        }
    }

    pub fn unscale_y(&self, yh: &[f64], tau: f64, out: &mut [f64]) {
        let f = 1.0 / (self.sigma_c * tau);
        for ((o, y), d) in out.iter_mut().zip(yh).zip(&self.d) {
            *o = y * d * f;
        }
    }

    pub fn unscale_s(&self, sh: &[f64], tau: f64, out: &mut [f64]) {
        let f = 1.0 / (self.sigma_b * tau);
        for ((o, s), d) in out.iter_mut().zip(sh).zip(&self.d) {
            *o = s / d * f;
        }
    }

    pub fn scale_x(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.e).map(|(v, e)| v * self.sigma_b / e).collect()
    }

    pub fn scale_y(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.d).map(|(v, d)| v * self.sigma_c / d).collect()
    }

    pub fn scale_s(&self, s: &[f64]) -> Vec<f64> {
        s.iter().zip(&self.d).map(|(v, d)| v * self.sigma_b * d).collect()
    }
}

fn inv_sqrt_clamped(norm: f64) -> f64 {
    if norm == 0.0 {
        1.0
    } else {
        1.0 / libm::sqrt(norm.clamp(MIN_NORM, MAX_NORM))
    }
}

fn mean_sqrt(sq: &[f64]) -> f64 {
    if sq.is_empty() {
        return 1.0;
    }
    sq.iter().map(|v| libm::sqrt(*v)).sum::<f64>() / sq.len() as f64
}
