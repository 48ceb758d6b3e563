//! Explicit linearization: map `x` to all monomials of bounded total degree
//! and learn a linear predictor on top.
//!
//! Exact but dimension-exponential; it serves as the near-optimality oracle
//! that the greedy trainers are measured against in the realizable checks.

use crate::data::Dataset;
use crate::linalg::SolveStatus;
use crate::loss::{mean_loss, Loss};
use crate::{fit, Error, Result, Scalar};

/// Hard cap on the monomial feature count.
pub const FEATURE_BUDGET: usize = 2_000_000;

/// Monomials over `d` variables with total degree at most `max_degree`, in
/// graded lexicographic order. Each monomial is the sorted multiset of its
/// variable indices (`[]` is the constant, `[0, 0, 2]` is `x0^2 * x2`).
pub fn monomials(d: usize, max_degree: usize) -> Vec<Vec<u16>> {
    let mut out = vec![vec![]];
    let mut frontier: Vec<Vec<u16>> = vec![vec![]];
    for _ in 0..max_degree {
        let mut next = Vec::new();
        for m in &frontier {
            let start = m.last().copied().unwrap_or(0);
            for v in start..d as u16 {
                let mut ext = m.clone();
                ext.push(v);
                next.push(ext);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// `C(d + max_degree, max_degree)`, the number of monomials of total degree
/// at most `max_degree`, without enumerating them.
pub fn monomial_count(d: usize, max_degree: usize) -> f64 {
    let mut c = 1.0f64;
    for i in 1..=max_degree {
        c = c * (d + i) as f64 / i as f64;
    }
    c
}

fn monomial_value<T: Scalar>(m: &[u16], x: &[T]) -> T {
    m.iter().fold(T::one(), |acc, &v| acc * x[v as usize])
}

pub fn format_monomial(m: &[u16]) -> String {
    if m.is_empty() {
        return "1".to_string();
    }
    let mut parts: Vec<String> = Vec::new();
    let mut i = 0;
    while i < m.len() {
        let v = m[i];
        let mut power = 0;
        while i < m.len() && m[i] == v {
            power += 1;
            i += 1;
        }
        if power == 1 {
            parts.push(format!("x{v}"));
        } else {
            parts.push(format!("x{v}^{power}"));
        }
    }
    parts.join("*")
}

#[derive(Clone, Debug)]
pub struct LinearizationFit<T> {
    monomials: Vec<Vec<u16>>,
    coefficients: Vec<T>,
    risk: T,
    status: SolveStatus,
}

impl<T: Scalar> LinearizationFit<T> {
    pub fn monomials(&self) -> &[Vec<u16>] {
        &self.monomials
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coefficients
    }

    pub fn risk(&self) -> T {
        self.risk
    }

    pub fn status(&self) -> SolveStatus {
        self.status
    }

    /// Coefficient of a specific monomial (indices sorted ascending).
    pub fn coefficient_for(&self, monomial: &[u16]) -> Option<T> {
        self.monomials
            .iter()
            .position(|m| m.as_slice() == monomial)
            .map(|i| self.coefficients[i])
    }

    pub fn predict(&self, x: &[T]) -> T {
        self.monomials
            .iter()
            .zip(&self.coefficients)
            .fold(T::zero(), |acc, (m, &c)| acc + c * monomial_value(m, x))
    }
}

/// Fits a linear predictor over all monomials of total degree <= `degree`
/// (least squares for the squared loss, full-batch gradient descent for the
/// logistic loss).
pub fn linearization_train<T: Scalar>(
    data: &Dataset<T>,
    loss: Loss,
    degree: usize,
) -> Result<LinearizationFit<T>> {
    if !(degree == 2 || degree == 3) {
        return Err(Error::config("linearization degree must be 2 or 3"));
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = data.dim();
    let count = monomial_count(d, degree);
    if count > FEATURE_BUDGET as f64 {
        return Err(Error::BudgetExceeded(format!(
            "monomial expansion needs {count:.0} features for d={d}, degree={degree} \
             (budget {FEATURE_BUDGET})"
        )));
    }

    let monos = monomials(d, degree);
    let m = data.len();
    let cols: Vec<Vec<T>> = monos
        .iter()
        .map(|mono| (0..m).map(|i| monomial_value(mono, data.x(i))).collect())
        .collect();

    let (theta, status) = match loss {
        Loss::Squared => (
            fit::least_squares(&cols, data.labels(), T::of(fit::DEFAULT_JITTER))?,
            SolveStatus::Converged,
        ),
        Loss::Logistic => fit::logistic_gd(&cols, data.labels(), 1e-8, 50_000, None)?,
    };
    let preds = fit::predictions(&cols, &theta);
    let risk = mean_loss(&preds, data.labels(), loss)?;
    Ok(LinearizationFit {
        monomials: monos,
        coefficients: theta,
        risk,
        status,
    })
}
