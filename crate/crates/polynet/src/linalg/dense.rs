//! Small dense support routines.
//!
//! Only the output-weight refits, the over-specification experiment, and the
//! desk-scale reference checks touch dense matrices; everything here is sized
//! for a few hundred rows at most.

use crate::linalg::{dot, norm2, LinearOperator};
use crate::{Error, Result, Scalar};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in &rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    expected: c,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Mat { rows: r, cols: c, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// `out = self * v`
    pub fn matvec(&self, v: &[T], out: &mut [T]) {
        debug_assert_eq!(v.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for i in 0..self.rows {
            out[i] = dot(self.row(i), v);
        }
    }

    /// `out = self^T * u`
    pub fn t_matvec(&self, u: &[T], out: &mut [T]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.iter_mut().for_each(|x| *x = T::zero());
        for i in 0..self.rows {
            let ui = u[i];
            if ui == T::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += ui * a;
            }
        }
    }

    /// Gram matrix `self * self^T` (rows as vectors).
    pub fn gram(&self) -> Mat<T> {
        let n = self.rows;
        let mut g = Mat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = dot(self.row(i), self.row(j));
                g.set(i, j, v);
                g.set(j, i, v);
            }
        }
        g
    }
}

impl<T: Scalar> LinearOperator<T> for Mat<T> {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply(&self, v: &[T], out: &mut [T]) {
        self.matvec(v, out);
    }

    fn apply_transpose(&self, u: &[T], out: &mut [T]) {
        self.t_matvec(u, out);
    }
}

/// Solves the symmetric positive (semi-)definite system `(A + jitter*I) x = b`
/// by Cholesky, escalating the jitter by 100x (up to `1e-4` times the mean
/// diagonal) when a pivot fails. Duplicate design columns therefore still
/// yield a finite solution.
pub fn solve_spd<T: Scalar>(a: &Mat<T>, b: &[T], jitter: T) -> Result<Vec<T>> {
    if a.rows() != a.cols() || a.rows() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            got: b.len(),
        });
    }
    let n = a.rows();
    let mean_diag = {
        let mut s = T::zero();
        for i in 0..n {
            s += a.get(i, i).abs();
        }
        (s / T::of(n as f64)).max(T::one())
    };
    let mut jitter = jitter.max(T::zero());
    let cap = mean_diag * T::of(1e-4);
    loop {
        match cholesky_solve(a, b, jitter) {
            Some(x) => return Ok(x),
            None => {
                let next = if jitter == T::zero() {
                    mean_diag * T::of(1e-12)
                } else {
                    jitter * T::of(100.0)
                };
                if next > cap {
                    return Err(Error::numerical(
                        "Cholesky failed even with maximal jitter".to_string(),
                    ));
                }
                jitter = next;
            }
        }
    }
}

fn cholesky_solve<T: Scalar>(a: &Mat<T>, b: &[T], jitter: T) -> Option<Vec<T>> {
    let n = a.rows();
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j) + if i == j { jitter } else { T::zero() };
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= T::zero() || !s.is_finite() {
                    return None;
                }
                l.set(i, j, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    // forward: L y = b
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    // back: L^T x = y
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    Some(x)
}

/// Full symmetric eigendecomposition by cyclic Jacobi rotations, eigenvalues
/// sorted descending with matching eigenvector columns.
///
/// Used for rank estimates in the over-specification experiment and as the
/// dense reference route in tests; it is a different algorithm from the power
/// iteration it cross-checks.
pub fn jacobi_sym_eigen<T: Scalar>(a: &Mat<T>, max_sweeps: usize) -> Result<(Vec<T>, Mat<T>)> {
    if a.rows() != a.cols() {
        return Err(Error::config("jacobi_sym_eigen needs a square matrix"));
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut v = Mat::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() });

    let off = |m: &Mat<T>| {
        let mut s = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m.get(i, j) * m.get(i, j);
                }
            }
        }
        s.sqrt()
    };
    let scale = {
        let mut s = T::zero();
        for x in m.data() {
            s += *x * *x;
        }
        s.sqrt().max(T::one())
    };

    for _ in 0..max_sweeps {
        if off(&m) <= T::epsilon() * T::of(n as f64) * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq.abs() <= T::epsilon() * scale * T::of(1e-2) {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (T::of(2.0) * apq);
                let t = {
                    let s = if theta >= T::zero() { T::one() } else { -T::one() };
                    s / (theta.abs() + (T::one() + theta * theta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let values: Vec<T> = (0..n).map(|i| m.get(i, i)).collect();
    order.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).unwrap());
    let sorted_values: Vec<T> = order.iter().map(|&i| values[i]).collect();
    let vectors = Mat::from_fn(n, n, |i, j| v.get(i, order[j]));
    Ok((sorted_values, vectors))
}

/// Singular values sorted descending, by one-sided Jacobi: plane rotations
/// orthogonalize the columns, whose norms then are the singular values.
/// Unlike the Gram-matrix route this never squares the condition number, so
/// rank decisions at the `1e-8 * sigma_max` level stay trustworthy.
pub fn singular_values<T: Scalar>(a: &Mat<T>) -> Result<Vec<T>> {
    // Orthogonalize the smaller side.
    let n = a.rows().min(a.cols());
    let mut cols: Vec<Vec<T>> = if a.cols() <= a.rows() {
        (0..a.cols())
            .map(|j| (0..a.rows()).map(|i| a.get(i, j)).collect())
            .collect()
    } else {
        (0..a.rows()).map(|i| a.row(i).to_vec()).collect()
    };
    let eps = T::epsilon();
    for _sweep in 0..64 {
        let mut converged = true;
        for i in 0..n {
            for j in i + 1..n {
                let aii = dot(&cols[i], &cols[i]);
                let ajj = dot(&cols[j], &cols[j]);
                let aij = dot(&cols[i], &cols[j]);
                if aij.abs() <= eps * (aii * ajj).sqrt() {
                    continue;
                }
                converged = false;
                let tau = (ajj - aii) / (T::of(2.0) * aij);
                let t = {
                    let sign = if tau >= T::zero() { T::one() } else { -T::one() };
                    sign / (tau.abs() + (T::one() + tau * tau).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                let (left, right) = cols.split_at_mut(j);
                let ci = &mut left[i];
                let cj = &mut right[0];
                for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
                    let xi = *x;
                    let yj = *y;
                    *x = c * xi - s * yj;
                    *y = s * xi + c * yj;
                }
            }
        }
        if converged {
            break;
        }
    }
    let mut sigmas: Vec<T> = cols.iter().map(|c| norm2(c)).collect();
    sigmas.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(sigmas)
}
