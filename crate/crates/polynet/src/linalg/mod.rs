//! Matrix-free eigensolver and singular-pair solver.
//!
//! The greedy step of the depth-2 trainer needs the eigenvector of largest
//! absolute eigenvalue of `M = (1/m) sum_i c_i x_i x_i^T`, and the tensor
//! maximization of the depth-3 trainer needs the top singular pair of the same
//! kind of operator with reweighted coefficients. Both are served by plain
//! power iteration against a black-box `v -> Mv`, so no `d x d` matrix is ever
//! formed at training scale.

pub mod dense;

use crate::rng;
use crate::{Error, Result, Scalar};

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut s = T::zero();
    for (x, y) in a.iter().zip(b) {
        s += *x * *y;
    }
    s
}

pub fn norm2<T: Scalar>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

/// `y += alpha * x`
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

/// Normalizes `v` in place and returns its previous norm. `v` is left
/// untouched when its norm is zero.
pub fn normalize_mut<T: Scalar>(v: &mut [T]) -> T {
    let n = norm2(v);
    if n > T::zero() {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// Black-box linear map with its transpose.
pub trait LinearOperator<T: Scalar> {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, v: &[T], out: &mut [T]);
    fn apply_transpose(&self, u: &[T], out: &mut [T]);
}

/// `(1/m) sum_i c_i x_i x_i^T` applied implicitly to a vector.
///
/// For the greedy step the weights are the per-example loss derivatives
/// `c_i = l'(f(x_i), y_i)`; for the tensor subroutine they are additionally
/// scaled by `w^T x_i`. The operator is symmetric by construction.
pub struct WeightedGram<'a, T: Scalar> {
    features: &'a dense::Mat<T>,
    weights: &'a [T],
}

impl<'a, T: Scalar> WeightedGram<'a, T> {
    pub fn new(features: &'a dense::Mat<T>, weights: &'a [T]) -> Result<Self> {
        if features.rows() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: features.rows(),
                got: weights.len(),
            });
        }
        if features.rows() == 0 {
            return Err(Error::EmptyDataset);
        }
        Ok(WeightedGram { features, weights })
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }
}

impl<T: Scalar> LinearOperator<T> for WeightedGram<'_, T> {
    fn rows(&self) -> usize {
        self.dim()
    }

    fn cols(&self) -> usize {
        self.dim()
    }

    fn apply(&self, v: &[T], out: &mut [T]) {
        let m = T::of(self.features.rows() as f64);
        out.iter_mut().for_each(|x| *x = T::zero());
        for (i, &c) in self.weights.iter().enumerate() {
            if c == T::zero() {
                continue;
            }
            let row = self.features.row(i);
            let scale = c * dot(row, v) / m;
            axpy(scale, row, out);
        }
    }

    fn apply_transpose(&self, u: &[T], out: &mut [T]) {
        self.apply(u, out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    /// Iteration budget exhausted before the residual tolerance; the result is
    /// the best iterate and may still be usable (GECO tolerates approximate
    /// greedy steps).
    MaxIterations,
    /// The operator annihilated every probe; value/sigma is zero.
    Degenerate,
}

impl SolveStatus {
    pub fn converged(self) -> bool {
        self == SolveStatus::Converged
    }
}

#[derive(Clone, Debug)]
pub struct EigenResult<T> {
    /// Unit eigenvector estimate.
    pub vector: Vec<T>,
    /// Signed Rayleigh quotient `v^T M v`.
    pub value: T,
    /// `||Mv - value * v||_2` at the returned iterate.
    pub residual: T,
    pub iterations: usize,
    pub status: SolveStatus,
}

#[derive(Clone, Debug)]
pub struct SingularResult<T> {
    pub left: Vec<T>,
    pub right: Vec<T>,
    /// `u^T A v >= 0`.
    pub sigma: T,
    /// Residual of `v` as an eigenvector of `A^T A`.
    pub residual: T,
    pub iterations: usize,
    pub status: SolveStatus,
    /// Heuristic certificate `1 - residual / sigma^2`, clamped to `[0, 1]`:
    /// how much of the dominant singular value the returned pair captures.
    pub relative_gap: T,
}

fn check_finite<T: Scalar>(v: &[T], what: &str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        Err(Error::numerical(format!(
            "{what} produced a non-finite value"
        )))
    } else {
        Ok(())
    }
}

/// Eigenpair of the eigenvalue with largest absolute value, by power iteration
/// from a seeded random start.
///
/// Plain power iteration converges to the largest-|lambda| eigenpair for a
/// generic start; the returned `value` carries the sign of the Rayleigh
/// quotient, so indefinite operators are handled without deflation. Restarts
/// once with a fresh seeded vector if the first start lands in the kernel of a
/// nonzero operator; if the operator annihilates both probes the result is
/// flagged [`SolveStatus::Degenerate`] with value zero.
pub fn dominant_eigenpair<T: Scalar>(
    op: &impl LinearOperator<T>,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<EigenResult<T>> {
    if op.rows() != op.cols() || op.rows() == 0 {
        return Err(Error::config("operator must be square and non-empty"));
    }
    if tol <= 0.0 {
        return Err(Error::config("eigensolver tolerance must be positive"));
    }
    let d = op.rows();
    let tol = T::of(tol);
    let mut v: Vec<T> = rng::unit_gaussian(&mut rng::seeded(seed, 0), d);
    let mut mv = vec![T::zero(); d];
    let mut restarted = false;
    let mut norm_est = T::zero();
    let mut value = T::zero();
    let mut residual = T::zero();

    let mut iter = 0usize;
    while iter < max_iter {
        iter += 1;
        op.apply(&v, &mut mv);
        check_finite(&mv, "operator apply")?;
        let mv_norm = norm2(&mv);
        norm_est = norm_est.max(mv_norm);
        value = dot(&v, &mv);
        let mut r = T::zero();
        for i in 0..d {
            let e = mv[i] - value * v[i];
            r += e * e;
        }
        residual = r.sqrt();

        let floor = T::epsilon() * T::of(64.0) * norm_est.max(T::one());
        if mv_norm <= floor {
            if !restarted {
                restarted = true;
                v = rng::unit_gaussian(&mut rng::seeded(seed, 1), d);
                continue;
            }
            return Ok(EigenResult {
                vector: v,
                value: T::zero(),
                residual: mv_norm,
                iterations: iter,
                status: SolveStatus::Degenerate,
            });
        }
        // Unlucky start orthogonal to the dominant eigenspace: near-zero
        // Rayleigh quotient despite a clearly nonzero operator.
        if iter == 1 && !restarted && value.abs() <= norm_est * T::of(1e-14) {
            restarted = true;
            v = rng::unit_gaussian(&mut rng::seeded(seed, 1), d);
            continue;
        }
        if residual <= tol {
            return Ok(EigenResult {
                vector: v,
                value,
                residual,
                iterations: iter,
                status: SolveStatus::Converged,
            });
        }
        for i in 0..d {
            v[i] = mv[i] / mv_norm;
        }
    }

    Ok(EigenResult {
        vector: v,
        value,
        residual,
        iterations: max_iter,
        status: SolveStatus::MaxIterations,
    })
}

/// Top singular pair `(u, v, sigma)` by power iteration on `A^T A`, then
/// `u = Av / ||Av||`.
pub fn top_singular_pair<T: Scalar>(
    op: &impl LinearOperator<T>,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<SingularResult<T>> {
    if op.rows() == 0 || op.cols() == 0 {
        return Err(Error::config("operator must be non-empty"));
    }
    if tol <= 0.0 {
        return Err(Error::config("singular solver tolerance must be positive"));
    }
    let (rows, cols) = (op.rows(), op.cols());
    let tol = T::of(tol);
    let mut v: Vec<T> = rng::unit_gaussian(&mut rng::seeded(seed, 0), cols);
    let mut av = vec![T::zero(); rows];
    let mut atav = vec![T::zero(); cols];
    let mut restarted = false;
    let mut norm_est = T::zero();
    let mut sigma;
    let mut residual = T::zero();

    let finish = |v: Vec<T>, av: &[T], sigma: T, residual: T, iterations: usize, status: SolveStatus| {
        let mut u = av.to_vec();
        let n = normalize_mut(&mut u);
        if n == T::zero() {
            // Zero image: pick an arbitrary unit left vector.
            u = vec![T::zero(); rows];
            u[0] = T::one();
        }
        let sig2 = sigma * sigma;
        let gap = if sig2 > T::zero() {
            (T::one() - residual / sig2).max(T::zero()).min(T::one())
        } else {
            T::zero()
        };
        SingularResult {
            left: u,
            right: v,
            sigma,
            residual,
            iterations,
            status,
            relative_gap: gap,
        }
    };

    let mut iter = 0usize;
    while iter < max_iter {
        iter += 1;
        op.apply(&v, &mut av);
        check_finite(&av, "operator apply")?;
        op.apply_transpose(&av, &mut atav);
        check_finite(&atav, "operator transpose apply")?;
        sigma = norm2(&av);
        norm_est = norm_est.max(sigma);
        let sig2 = sigma * sigma;
        let mut r = T::zero();
        for i in 0..cols {
            let e = atav[i] - sig2 * v[i];
            r += e * e;
        }
        residual = r.sqrt();

        let floor = T::epsilon() * T::of(64.0) * norm_est.max(T::one());
        if sigma <= floor {
            if !restarted {
                restarted = true;
                v = rng::unit_gaussian(&mut rng::seeded(seed, 1), cols);
                continue;
            }
            return Ok(finish(
                v,
                &av,
                T::zero(),
                residual,
                iter,
                SolveStatus::Degenerate,
            ));
        }
        if residual <= tol {
            return Ok(finish(v, &av, sigma, residual, iter, SolveStatus::Converged));
        }
        let n = norm2(&atav);
        for i in 0..cols {
            v[i] = atav[i] / n;
        }
    }

    op.apply(&v, &mut av);
    sigma = norm2(&av);
    Ok(finish(
        v,
        &av,
        sigma,
        residual,
        max_iter,
        SolveStatus::MaxIterations,
    ))
}
