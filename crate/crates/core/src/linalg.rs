//! Small dense linear algebra used by the oracles: row-major matrices,
//! one-sided Jacobi SVD, cyclic Jacobi eigenvalues and Gram-Schmidt.
//!
//! Sizes here are tiny (a few dozen columns at most), so the Jacobi
//! methods are preferred for their accuracy on small singular values.

use num_complex::Complex;

use crate::error::{check_len, Result};
use crate::Real;

/// Dense row-major real matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
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

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        check_len("matrix data", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
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

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(rows: usize, columns: &[Vec<T>]) -> Result<Self> {
        for c in columns {
            check_len("matrix column", rows, c.len())?;
        }
        Ok(Self::from_fn(rows, columns.len(), |i, j| columns[j][i]))
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

    pub fn columns(&self) -> Vec<Vec<T>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self · x`.
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `selfᵀ · y`.
    pub fn matvec_t(&self, y: &[T]) -> Vec<T> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi == T::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + a * yi;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                if a == T::zero() {
                    continue;
                }
                let src = other.row(l);
                for (o, &b) in out.row_mut(i).iter_mut().zip(src) {
                    *o = *o + a * b;
                }
            }
        }
        out
    }

    /// Horizontal concatenation `[self, other]`.
    pub fn hstack(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "hstack row mismatch");
        Self::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)]
            } else {
                other[(i, j - self.cols)]
            }
        })
    }

    /// Largest absolute entry of `selfᵀ self − I`.
    pub fn orthonormality_defect(&self) -> T {
        let g = self.transpose().matmul(self);
        let mut worst = T::zero();
        for i in 0..g.rows {
            for j in 0..g.cols {
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub fn cnorm2<T: Real>(a: &[Complex<T>]) -> T {
    a.iter().map(|c| c.norm_sqr()).sum::<T>().sqrt()
}

pub fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn to_complex<T: Real>(x: &[T]) -> Vec<Complex<T>> {
    x.iter().map(|&v| Complex::new(v, T::zero())).collect()
}

/// Thin singular value decomposition `A = U Σ Vᵀ`, singular values sorted
/// in decreasing order. `u` is `rows × r`, `v` is `cols × r` with
/// `r = min(rows, cols)`.
#[derive(Clone, Debug)]
pub struct Svd<T> {
    pub u: Matrix<T>,
    pub singular_values: Vec<T>,
    pub v: Matrix<T>,
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd<T: Real>(a: &Matrix<T>) -> Svd<T> {
    if a.rows < a.cols {
        let t = svd(&a.transpose());
        return Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        };
    }
    let (m, n) = (a.rows, a.cols);
    // Work on columns stored contiguously.
    let mut cols: Vec<Vec<T>> = a.columns();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|j| {
            (0..n)
                .map(|i| if i == j { T::one() } else { T::zero() })
                .collect()
        })
        .collect();
    let tol = T::epsilon() * T::c(4.0);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::c(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<T> = cols.iter().map(|c| norm2(c)).collect();
    order.sort_by(|&i, &j| {
        norms[j]
            .partial_cmp(&norms[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut u = Matrix::zeros(m, n);
    let mut vm = Matrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    for (out, &src) in order.iter().enumerate() {
        let s = norms[src];
        singular_values.push(s);
        for i in 0..m {
            u[(i, out)] = if s > T::zero() {
                cols[src][i] / s
            } else {
                T::zero()
            };
        }
        for i in 0..n {
            vm[(i, out)] = v[src][i];
        }
    }
    Svd {
        u,
        singular_values,
        v: vm,
    }
}

fn rotate<T: Real>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Orthonormal basis of the column space of `a`, keeping singular values
/// above `rel_cutoff · σ_max`. Returns a `rows × r` matrix (possibly `r = 0`).
pub fn orthonormal_range<T: Real>(a: &Matrix<T>, rel_cutoff: T) -> Matrix<T> {
    let svd = svd(a);
    let smax = svd.singular_values.first().copied().unwrap_or(T::zero());
    let rank = if smax > T::zero() {
        svd.singular_values
            .iter()
            .take_while(|&&s| s > rel_cutoff * smax)
            .count()
    } else {
        0
    };
    Matrix::from_fn(a.rows, rank, |i, j| svd.u[(i, j)])
}

/// Eigenvalues of a real symmetric matrix (cyclic Jacobi), ascending.
pub fn symmetric_eigenvalues<T: Real>(a: &Matrix<T>) -> Vec<T> {
    assert_eq!(
        a.rows, a.cols,
        "symmetric_eigenvalues needs a square matrix"
    );
    let n = a.rows;
    let mut m = a.clone();
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off = off + m[(i, j)] * m[(i, j)];
            }
        }
        let scale: T = (0..n).map(|i| m[(i, i)] * m[(i, i)]).sum::<T>() + off;
        if off <= T::epsilon() * T::epsilon() * scale || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (T::c(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
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
            }
        }
    }
    let mut eig: Vec<T> = (0..n).map(|i| m[(i, i)]).collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    eig
}

/// Eigenvalues of a Hermitian matrix given as `re + i·im`, via the real
/// symmetric embedding `[[re, -im], [im, re]]` (each eigenvalue appears
/// twice there; one copy is returned).
pub fn hermitian_eigenvalues<T: Real>(re: &Matrix<T>, im: &Matrix<T>) -> Vec<T> {
    let k = re.rows;
    let big = Matrix::from_fn(2 * k, 2 * k, |i, j| match (i < k, j < k) {
        (true, true) => re[(i, j)],
        (true, false) => -im[(i, j - k)],
        (false, true) => im[(i - k, j)],
        (false, false) => re[(i - k, j - k)],
    });
    symmetric_eigenvalues(&big).into_iter().step_by(2).collect()
}

/// Modified Gram-Schmidt with one reorthogonalisation pass. Columns of the
/// result are orthonormal and the implied `R` has a positive diagonal.
/// Returns `None` when the columns are numerically dependent.
pub fn gram_schmidt<T: Real>(a: &Matrix<T>) -> Option<Matrix<T>> {
    let mut q: Vec<Vec<T>> = Vec::with_capacity(a.cols);
    for j in 0..a.cols {
        let mut v = a.column(j);
        let original = norm2(&v);
        for _ in 0..2 {
            for prev in &q {
                let r = dot(prev, &v);
                for (x, &p) in v.iter_mut().zip(prev) {
                    *x = *x - r * p;
                }
            }
        }
        let nv = norm2(&v);
        if !(nv > T::epsilon() * T::c(1e3) * original.max(T::min_positive_value())) {
            return None;
        }
        v.iter_mut().for_each(|x| *x = *x / nv);
        q.push(v);
    }
    Matrix::from_columns(a.rows, &q).ok()
}
