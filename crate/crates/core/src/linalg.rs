//! Small dense symmetric linear algebra for K×K covariance matrices and
//! the (K+1)×(K+1) normal equations. Sizes here are tiny, so everything is
//! a plain row-major `Vec<f64>`.

use serde::{Deserialize, Serialize};

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

/// Why a Cholesky factorization stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FactorError {
    /// Pivot at `column` was (numerically) zero.
    ZeroPivot { column: usize, pivot: f64 },
    /// Pivot at `column` was negative beyond tolerance.
    NegativePivot { column: usize, pivot: f64 },
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    /// Builds a matrix from rows. Returns `None` if the rows are not square.
    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return None;
        }
        Some(Matrix {
            dim,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        (0..self.dim).map(|i| self[(i, i)].abs()).fold(0.0, f64::max)
    }

    /// Largest asymmetry |a_ij - a_ji| and where it occurs.
    pub fn max_asymmetry(&self) -> (usize, usize, f64) {
        let mut worst = (0, 0, 0.0);
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                let d = (self[(i, j)] - self[(j, i)]).abs();
                if d > worst.2 {
                    worst = (i, j, d);
                }
            }
        }
        worst
    }

    /// xᵀ A x.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        (0..self.dim)
            .map(|i| x[i] * self.row(i).iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    }

    /// Lower-triangular factor L with A = L Lᵀ for a positive semi-definite A.
    ///
    /// Columns whose pivot falls within `tol` of zero are set to zero, so
    /// singular covariances (e.g. a degenerate variance) factor cleanly.
    pub fn cholesky_semidefinite(&self, tol: f64) -> Result<Matrix, FactorError> {
        let n = self.dim;
        let mut l = Matrix::zeros(n);
        for j in 0..n {
            let pivot = self[(j, j)] - (0..j).map(|k| l[(j, k)] * l[(j, k)]).sum::<f64>();
            if pivot > tol {
                let d = pivot.sqrt();
                l[(j, j)] = d;
                for i in (j + 1)..n {
                    let s = self[(i, j)] - (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum::<f64>();
                    l[(i, j)] = s / d;
                }
            } else if pivot >= -tol {
                // Zero pivot: the rest of the column must vanish too.
                for i in (j + 1)..n {
                    let s = self[(i, j)] - (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum::<f64>();
                    if s.abs() > tol.sqrt().max(tol) {
                        return Err(FactorError::NegativePivot {
                            column: i,
                            pivot: -s.abs(),
                        });
                    }
                }
            } else {
                return Err(FactorError::NegativePivot { column: j, pivot });
            }
        }
        Ok(l)
    }

    /// Strict Cholesky for a positive definite A. A pivot below
    /// `rel_tol` times the column's original diagonal counts as zero.
    pub fn cholesky(&self, rel_tol: f64) -> Result<Matrix, FactorError> {
        let n = self.dim;
        let mut l = Matrix::zeros(n);
        for j in 0..n {
            let diag = self[(j, j)];
            let pivot = diag - (0..j).map(|k| l[(j, k)] * l[(j, k)]).sum::<f64>();
            if pivot < 0.0 && pivot.abs() > rel_tol * diag.abs() {
                return Err(FactorError::NegativePivot { column: j, pivot });
            }
            if diag <= 0.0 || pivot <= rel_tol * diag {
                return Err(FactorError::ZeroPivot { column: j, pivot });
            }
            let d = pivot.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let s = self[(i, j)] - (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum::<f64>();
                l[(i, j)] = s / d;
            }
        }
        Ok(l)
    }

    /// Solves (L Lᵀ) x = b given the lower factor `self`.
    pub fn cholesky_solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let s = b[i] - (0..i).map(|k| self[(i, k)] * y[k]).sum::<f64>();
            y[i] = s / self[(i, i)];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s = y[i] - ((i + 1)..n).map(|k| self[(k, i)] * x[k]).sum::<f64>();
            x[i] = s / self[(i, i)];
        }
        x
    }

    /// L z for a lower-triangular `self`.
    pub fn lower_mul(&self, z: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = (0..=i).map(|k| self[(i, k)] * z[k]).sum();
        }
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}
