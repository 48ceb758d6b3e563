//! Convex fitting over explicit design columns.
//!
//! Shared by the output-weight refit of the greedy trainers and the
//! linearization oracle: exact least squares through jittered normal
//! equations for the squared loss, full-batch gradient descent with Armijo
//! backtracking for the logistic loss.

use crate::accum;
use crate::linalg::dense::{solve_spd, Mat};
use crate::linalg::SolveStatus;
use crate::loss::Loss;
use crate::{Error, Result, Scalar};

/// Tikhonov jitter on the normal equations; keeps duplicate columns solvable.
pub const DEFAULT_JITTER: f64 = 1e-10;

/// `theta -> Phi theta` for columns of length `m`.
pub(crate) fn predictions<T: Scalar>(cols: &[Vec<T>], theta: &[T]) -> Vec<T> {
    debug_assert_eq!(cols.len(), theta.len());
    let m = cols.first().map_or(0, Vec::len);
    let mut out = vec![T::zero(); m];
    for (col, &t) in cols.iter().zip(theta) {
        if t == T::zero() {
            continue;
        }
        for (o, &c) in out.iter_mut().zip(col) {
            *o += t * c;
        }
    }
    out
}

/// Normal equations `(Phi^T Phi / m) theta = Phi^T y / m`.
pub(crate) fn normal_equations<T: Scalar>(cols: &[Vec<T>], labels: &[T]) -> (Mat<T>, Vec<T>) {
    let n = cols.len();
    let m = T::of(labels.len() as f64);
    let mut gram = Mat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = crate::linalg::dot(&cols[i], &cols[j]) / m;
            gram.set(i, j, v);
            gram.set(j, i, v);
        }
    }
    let rhs: Vec<T> = cols
        .iter()
        .map(|c| crate::linalg::dot(c, labels) / m)
        .collect();
    (gram, rhs)
}

pub(crate) fn least_squares<T: Scalar>(cols: &[Vec<T>], labels: &[T], jitter: T) -> Result<Vec<T>> {
    if cols.is_empty() {
        return Err(Error::config("least squares needs at least one column"));
    }
    let (gram, rhs) = normal_equations(cols, labels);
    solve_spd(&gram, &rhs, jitter)
}

fn mean_risk<T: Scalar>(preds: &[T], labels: &[T], loss: Loss) -> T {
    accum::mean(preds.iter().zip(labels).map(|(&p, &y)| loss.value(p, y)))
}

/// Full-batch gradient descent with backtracking line search until the
/// gradient norm drops to `tol`. Warm-startable; each accepted step decreases
/// the risk, so a warm start from a previous solution can only improve it.
pub(crate) fn logistic_gd<T: Scalar>(
    cols: &[Vec<T>],
    labels: &[T],
    tol: f64,
    max_iter: usize,
    warm: Option<&[T]>,
) -> Result<(Vec<T>, SolveStatus)> {
    if cols.is_empty() {
        return Err(Error::config("logistic fit needs at least one column"));
    }
    let n = cols.len();
    let m = labels.len();
    let m_t = T::of(m as f64);
    let tol = T::of(tol);
    let mut theta: Vec<T> = match warm {
        Some(w) => {
            let mut t = w.to_vec();
            t.resize(n, T::zero());
            t
        }
        None => vec![T::zero(); n],
    };
    let mut preds = predictions(cols, &theta);
    let mut risk = mean_risk(&preds, labels, Loss::Logistic);
    let mut step = T::one();

    for _ in 0..max_iter {
        // grad = Phi^T l'(p, y) / m
        let derivs: Vec<T> = preds
            .iter()
            .zip(labels)
            .map(|(&p, &y)| Loss::Logistic.derivative(p, y))
            .collect();
        let grad: Vec<T> = cols
            .iter()
            .map(|c| crate::linalg::dot(c, &derivs) / m_t)
            .collect();
        let gnorm2 = crate::linalg::dot(&grad, &grad);
        if gnorm2.sqrt() <= tol {
            return Ok((theta, SolveStatus::Converged));
        }

        // Armijo backtracking on f(theta - s grad).
        let mut s = (step * T::of(2.0)).min(T::of(1e6));
        let mut accepted = false;
        while s >= T::of(1e-18) {
            let candidate: Vec<T> = theta
                .iter()
                .zip(&grad)
                .map(|(&t, &g)| t - s * g)
                .collect();
            let cand_preds = predictions(cols, &candidate);
            let cand_risk = mean_risk(&cand_preds, labels, Loss::Logistic);
            if cand_risk <= risk - T::of(1e-4) * s * gnorm2 {
                theta = candidate;
                preds = cand_preds;
                risk = cand_risk;
                step = s;
                accepted = true;
                break;
            }
            s *= T::of(0.5);
        }
        if !accepted {
            // Line-search failure: gradient too flat for further progress.
            return Ok((theta, SolveStatus::MaxIterations));
        }
    }
    Ok((theta, SolveStatus::MaxIterations))
}
