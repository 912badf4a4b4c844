//! Small sparse and dense kernels shared by the network model and the solver.

use alloc::vec;
use alloc::vec::Vec;

/// Compressed sparse column matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowidx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            colptr: vec![0; ncols + 1],
            rowidx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// and explicit zeros that result from summation are kept.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by(|&a, &b| {
            let (ra, ca, _) = triplets[a];
            let (rb, cb, _) = triplets[b];
            (ca, ra).cmp(&(cb, rb))
        });

        let mut colptr = vec![0usize; ncols + 1];
        let mut rowidx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &k in &order {
            let (r, c, v) = triplets[k];
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                rowidx.push(r);
                values.push(v);
                colptr[c + 1] += 1;
                last = Some((r, c));
            }
        }
        for c in 0..ncols {
            colptr[c + 1] += colptr[c];
        }
        Self {
            nrows,
            ncols,
            colptr,
            rowidx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let range = self.colptr[col]..self.colptr[col + 1];
        self.rowidx[range.clone()]
            .iter()
            .zip(&self.values[range])
            .filter(|(&r, _)| r == row)
            .map(|(_, &v)| v)
            .sum()
    }

    /// Iterates `(row, col, value)` in column-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |c| {
            (self.colptr[c]..self.colptr[c + 1]).map(move |k| (self.rowidx[k], c, self.values[k]))
        })
    }

    /// Iterates `(row, value)` of column `col`.
    pub fn column(&self, col: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.colptr[col]..self.colptr[col + 1]).map(move |k| (self.rowidx[k], self.values[k]))
    }

    /// `y += alpha * A x`
    pub fn gemv(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (c, &xc) in x.iter().enumerate() {
            if xc == 0.0 {
                continue;
            }
            let ax = alpha * xc;
            for k in self.colptr[c]..self.colptr[c + 1] {
                y[self.rowidx[k]] += ax * self.values[k];
            }
        }
    }

    /// `y += alpha * Aᵀ x`
    pub fn gemv_t(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for (c, yc) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.colptr[c]..self.colptr[c + 1] {
                acc += self.values[k] * x[self.rowidx[k]];
            }
            *yc += alpha * acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.gemv(1.0, x, &mut y);
        y
    }

    pub fn tmul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        self.gemv_t(1.0, x, &mut y);
        y
    }

    /// Scales rows by `d` and columns by `e` in place: `A <- diag(d) A diag(e)`.
    pub fn scale(&mut self, d: &[f64], e: &[f64]) {
        for c in 0..self.ncols {
            for k in self.colptr[c]..self.colptr[c + 1] {
                self.values[k] *= d[self.rowidx[k]] * e[c];
            }
        }
    }

    pub fn transpose(&self) -> CscMatrix {
        let t: Vec<(usize, usize, f64)> = self.triplets().map(|(r, c, v)| (c, r, v)).collect();
        CscMatrix::from_triplets(self.ncols, self.nrows, &t)
    }

    /// Dense row-major copy.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            out[r][c] += v;
        }
        out
    }

    /// Dense `I·shift + AᵀA`, lower triangle filled, row-major `n×n`.
    pub fn gram_plus_identity(&self, shift: f64) -> Vec<f64> {
        let n = self.ncols;
        let at = self.transpose();
        let mut g = vec![0.0; n * n];
        // column j of A^T is row j of A; accumulate outer products row by row
        for row in 0..at.ncols {
            let range = at.colptr[row]..at.colptr[row + 1];
            for k1 in range.clone() {
                let i = at.rowidx[k1];
                let vi = at.values[k1];
                for k2 in range.clone() {
                    let j = at.rowidx[k2];
                    if j <= i {
                        g[i * n + j] += vi * at.values[k2];
                    }
                }
            }
        }
        for i in 0..n {
            g[i * n + i] += shift;
        }
        g
    }
}

/// Dense Cholesky factor `L` of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
pub struct NotPositiveDefinite {
    pub pivot: usize,
    pub value: f64,
}

impl Cholesky {
    /// Factors a row-major matrix; only the lower triangle is read.
    pub fn factor(n: usize, mut a: Vec<f64>) -> Result<Self, NotPositiveDefinite> {
        assert_eq!(a.len(), n * n);
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d -= a[j * n + k] * a[j * n + k];
            }
            if !(d > 0.0) {
                return Err(NotPositiveDefinite { pivot: j, value: d });
            }
            let d = libm::sqrt(d);
            a[j * n + j] = d;
            for i in (j + 1)..n {
                let mut s = a[i * n + j];
                let (ri, rj) = (i * n, j * n);
                for k in 0..j {
                    s -= a[ri + k] * a[rj + k];
                }
                a[i * n + j] = s / d;
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                a[i * n + j] = 0.0;
            }
        }
        Ok(Self { n, l: a })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `L Lᵀ x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let mut s = b[i];
            for (k, &lik) in row.iter().enumerate() {
                s -= lik * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }
}

/// Dense `L D Lᵀ` factor of a symmetric quasi-definite matrix, without
/// pivoting. `L` is unit lower triangular.
#[derive(Debug, Clone)]
pub struct Ldlt {
    n: usize,
    l: Vec<f64>,
    d: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("zero pivot {pivot} in LDLᵀ factorization")]
pub struct ZeroPivot {
    pub pivot: usize,
}

impl Ldlt {
    /// Factors a row-major matrix; only the lower triangle is read.
    pub fn factor(n: usize, mut a: Vec<f64>) -> Result<Self, ZeroPivot> {
        assert_eq!(a.len(), n * n);
        let mut d = vec![0.0; n];
        let mut work = vec![0.0; n];
        for j in 0..n {
            let rj = j * n;
            for k in 0..j {
                work[k] = a[rj + k] * d[k];
            }
            let mut dj = a[rj + j];
            for k in 0..j {
                dj -= a[rj + k] * work[k];
            }
            if dj == 0.0 || !dj.is_finite() {
                return Err(ZeroPivot { pivot: j });
            }
            d[j] = dj;
            for i in (j + 1)..n {
                let ri = i * n;
                let mut s = a[ri + j];
                for k in 0..j {
                    s -= a[ri + k] * work[k];
                }
                a[ri + j] = s / dj;
            }
        }
        Ok(Self { n, l: a, d })
    }

    /// Solves `L D Lᵀ x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let mut s = b[i];
            for (k, &lik) in row.iter().enumerate() {
                s -= lik * b[k];
            }
            b[i] = s;
        }
        for i in 0..n {
            b[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s;
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ldlt_solves_quasi_definite() {
        // [[4, 1, 2], [1, 3, 0], [2, 0, -1]]
        let a = vec![4.0, 1.0, 2.0, 1.0, 3.0, 0.0, 2.0, 0.0, -1.0];
        let f = Ldlt::factor(3, a.clone()).unwrap();
        let mut x = vec![1.0, 2.0, 3.0];
        f.solve_in_place(&mut x);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((r - [1.0, 2.0, 3.0][i]).abs() < 1e-12);
        }
        assert!(Ldlt::factor(2, vec![0.0, 1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = CscMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0), (1, 1, -1.0)]);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![4.0, 1.0]);
        assert_eq!(a.tmul_vec(&[1.0, 1.0]), vec![6.0, -1.0]);
    }

    #[test]
    fn cholesky_solves_gram_system() {
        let a = CscMatrix::from_triplets(3, 2, &[(0, 0, 1.0), (1, 0, 2.0), (1, 1, 1.0), (2, 1, -3.0)]);
        let g = a.gram_plus_identity(1.0);
        // I + A^T A = [[6, 2], [2, 11]]
        assert_eq!(g[0], 6.0);
        assert_eq!(g[2], 2.0);
        assert_eq!(g[3], 11.0);
        let chol = Cholesky::factor(2, g).unwrap();
        let mut b = [8.0, 13.0];
        chol.solve_in_place(&mut b);
        assert!((b[0] - 1.0).abs() < 1e-14 && (b[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        assert!(Cholesky::factor(2, vec![1.0, 0.0, 2.0, 1.0]).is_err());
    }
}
