//! Euclidean projections onto the cones supported by the solver.

use super::Cone;

/// `√2`, the off-diagonal weight of the isometric PSD vectorization.
pub const SQRT2: f64 = core::f64::consts::SQRT_2;

/// Eigen-decomposition of a symmetric 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigen3 {
    /// Eigenvalues, largest first.
    pub values: [f64; 3],
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: [[f64; 3]; 3],
}

impl Eigen3 {
    pub fn reconstruct(&self) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for k in 0..3 {
            let v = self.vectors[k];
            for i in 0..3 {
                for j in 0..3 {
                    out[i][j] += self.values[k] * v[i] * v[j];
                }
            }
        }
        out
    }
}

/// Cyclic Jacobi eigen-decomposition of a symmetric 3×3 matrix.
///
/// Only the upper triangle's average with the lower triangle is used, so tiny
/// asymmetries are tolerated.
pub fn eig3_sym(m: &[[f64; 3]; 3]) -> Eigen3 {
    let mut a = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            a[i][j] = 0.5 * (m[i][j] + m[j][i]);
        }
    }
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let scale: f64 = a.iter().flatten().map(|x| x * x).sum();

    for _sweep in 0..64 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        if off <= f64::MIN_POSITIVE || off <= 1e-36 * scale {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[p][q];
            if apq == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
            let t = if theta.abs() > 1e150 {
                0.5 / theta
            } else {
                let t = 1.0 / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                if theta < 0.0 {
                    -t
                } else {
                    t
                }
            };
            let c = 1.0 / libm::sqrt(t * t + 1.0);
            let s = t * c;
            for row in a.iter_mut() {
                let (akp, akq) = (row[p], row[q]);
                row[p] = c * akp - s * akq;
                row[q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let (apk, aqk) = (a[p][k], a[q][k]);
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let (vkp, vkq) = (row[p], row[q]);
                row[p] = c * vkp - s * vkq;
                row[q] = s * vkp + c * vkq;
            }
        }
    }

    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let mut values = [0.0; 3];
    let mut vectors = [[0.0; 3]; 3];
    for (slot, &k) in order.iter().enumerate() {
        values[slot] = a[k][k];
        vectors[slot] = [v[0][k], v[1][k], v[2][k]];
    }
    Eigen3 { values, vectors }
}

/// Symmetric matrix from its scaled lower-triangle vectorization
/// `[X00, √2·X10, √2·X20, X11, √2·X21, X22]`.
pub fn smat3(s: &[f64]) -> [[f64; 3]; 3] {
    let r = 1.0 / SQRT2;
    [
        [s[0], s[1] * r, s[2] * r],
        [s[1] * r, s[3], s[4] * r],
        [s[2] * r, s[4] * r, s[5]],
    ]
}

pub fn svec3(m: &[[f64; 3]; 3]) -> [f64; 6] {
    [
        m[0][0],
        SQRT2 * m[1][0],
        SQRT2 * m[2][0],
        m[1][1],
        SQRT2 * m[2][1],
        m[2][2],
    ]
}

fn project_soc(v: &mut [f64]) {
    let t = v[0];
    let xnorm = libm::sqrt(v[1..].iter().map(|x| x * x).sum());
    if xnorm <= t {
        return;
    }
    if xnorm <= -t {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let alpha = 0.5 * (t + xnorm);
    v[0] = alpha;
    let f = alpha / xnorm;
    v[1..].iter_mut().for_each(|x| *x *= f);
}

fn project_psd3(v: &mut [f64]) {
    let eig = eig3_sym(&smat3(v));
    let mut clamped = eig;
    for l in clamped.values.iter_mut() {
        *l = l.max(0.0);
    }
    v.copy_from_slice(&svec3(&clamped.reconstruct()));
}

/// Projects `v` onto `cone` in place.
pub fn project_in_place(v: &mut [f64], cone: Cone) {
    debug_assert_eq!(v.len(), cone.dim());
    match cone {
        Cone::Zero(_) => v.iter_mut().for_each(|x| *x = 0.0),
        Cone::NonNegative(_) => v.iter_mut().for_each(|x| *x = x.max(0.0)),
        Cone::SecondOrder(_) => project_soc(v),
        Cone::Psd3 => project_psd3(v),
    }
}

/// Projects onto the dual cone. Every cone here is self-dual except the zero
/// cone, whose dual is the whole space.
pub fn project_dual_in_place(v: &mut [f64], cone: Cone) {
    if !matches!(cone, Cone::Zero(_)) {
        project_in_place(v, cone);
    }
}

/// Projection of `v` onto `cone`.
pub fn project_cone(v: &[f64], cone: Cone) -> alloc::vec::Vec<f64> {
    let mut out = v.to_vec();
    project_in_place(&mut out, cone);
    out
}
