//! Small dense linear-algebra kernels: a row-major matrix, a cyclic Jacobi
//! eigensolver for symmetric matrices and column orthonormalization.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                let src = other.row(k);
                for (o, &b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (i + 1..self.cols).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigen-decomposition of a symmetric matrix.
///
/// `values` are sorted in descending order; column `i` of `vectors` is the
/// unit eigenvector belonging to `values[i]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: DenseMatrix<T>,
}

const MAX_JACOBI_SWEEPS: usize = 100;

/// Cyclic Jacobi eigensolver. Only the upper triangle is trusted to be
/// consistent with the lower one; the input must be symmetric.
pub fn symmetric_eigen<T: Scalar>(a: &DenseMatrix<T>) -> Result<SymmetricEigen<T>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.cols(),
        });
    }
    let mut m = a.clone();
    let mut v = DenseMatrix::identity(n);
    let total = m.frobenius_norm();
    let eps = T::epsilon();
    let two = T::of(2.0);

    let mut converged = n < 2 || total == T::zero();
    for _ in 0..MAX_JACOBI_SWEEPS {
        if converged {
            break;
        }
        let off = off_diagonal_norm(&m);
        if off <= eps * total {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                // Negligible relative to both diagonal entries: drop it.
                let g = T::of(100.0) * apq.abs();
                if app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    m[(p, q)] = T::zero();
                    m[(q, p)] = T::zero();
                    continue;
                }
                let theta = (aqq - app) / (two * apq);
                let t = if theta.abs() > T::of(1e150).min(T::max_value().sqrt()) {
                    T::one() / (two * theta)
                } else {
                    let sign = if theta < T::zero() { -T::one() } else { T::one() };
                    sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = T::zero();
                m[(q, p)] = T::zero();
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        let off = off_diagonal_norm(&m);
        if off > eps * total * T::of(10.0) {
            return Err(Error::NonConvergence {
                what: "jacobi eigensolver",
                iterations: MAX_JACOBI_SWEEPS,
                residual: off.as_f64(),
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[(j, j)]
            .partial_cmp(&m[(i, i)])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymmetricEigen { values, vectors })
}

fn off_diagonal_norm<T: Scalar>(m: &DenseMatrix<T>) -> T {
    let n = m.rows();
    let mut s = T::zero();
    for p in 0..n {
        for q in p + 1..n {
            s += m[(p, q)] * m[(p, q)];
        }
    }
    (s * T::of(2.0)).sqrt()
}

/// Eigenvalues only, descending.
pub fn symmetric_eigenvalues<T: Scalar>(a: &DenseMatrix<T>) -> Result<Vec<T>> {
    symmetric_eigen(a).map(|e| e.values)
}

/// Orthonormalizes `vectors` in place with two passes of modified
/// Gram-Schmidt. A vector that collapses to (numerically) zero is replaced by
/// the first standard basis vector that is not yet spanned; returns how many
/// were replaced.
pub fn orthonormalize<T: Scalar>(vectors: &mut [Vec<T>]) -> usize {
    let dim = vectors.first().map_or(0, Vec::len);
    let mut replaced = 0;
    let mut next_basis = 0;
    for i in 0..vectors.len() {
        let original = norm(&vectors[i]);
        let mut len = project_out(vectors, i);
        while len <= T::of(1e-10) * original.max(T::min_positive_value()) && next_basis < dim {
            replaced += 1;
            let v = &mut vectors[i];
            v.iter_mut().for_each(|x| *x = T::zero());
            v[next_basis] = T::one();
            next_basis += 1;
            len = project_out(vectors, i);
            if len > T::of(0.5) {
                break;
            }
        }
        if len > T::zero() {
            vectors[i].iter_mut().for_each(|x| *x /= len);
        }
    }
    replaced
}

/// Removes from `vectors[i]` its components along `vectors[..i]` (assumed
/// orthonormal); returns the remaining norm.
fn project_out<T: Scalar>(vectors: &mut [Vec<T>], i: usize) -> T {
    let (done, rest) = vectors.split_at_mut(i);
    let target = &mut rest[0];
    for _ in 0..2 {
        for q in done.iter() {
            let proj = dot(target, q);
            axpy(-proj, q, target);
        }
    }
    norm(target)
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[inline]
pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
