//! Depth-2 GECO: greedy neuron addition via the dominant eigenpair, plus a
//! fully corrective convex refit of all output weights.
//!
//! Each iteration linearizes the risk around the current network. For a
//! candidate neuron `g(x) = (w^T x)^2` the first-order term is
//! `w^T [ (1/m) sum_i l'(f(x_i), y_i) x_i x_i^T ] w`, so the best unit `w` is
//! the eigenvector of the largest-magnitude eigenvalue of that matrix. The
//! eigenvector's sign (and the sign of the step) is irrelevant because the
//! refit chooses the neuron's output coefficient freely in `R`. After adding
//! the neuron, *all* output-layer weights — every alpha together with the bias
//! and the direct linear term — are re-minimized, which is what makes the risk
//! trace non-increasing: keeping the new coefficient at zero is always
//! feasible.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::fit;
use crate::linalg::dense::Mat;
use crate::linalg::{dominant_eigenpair, SolveStatus, WeightedGram};
use crate::loss::{mean_loss, Loss};
use crate::net::{BasisFunction, PolyNet};
use crate::{rng, Error, Result, Scalar};

/// Early-stop threshold on the gradient-weight vector and the greedy score.
pub const STATIONARITY_EPS: f64 = 1e-12;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Greedy iterations (hidden neurons added).
    pub r: usize,
    /// Comparator budget `k`; only used to report the theorem's iteration
    /// bound alongside the trace.
    pub k: usize,
    /// Target excess risk in the theorem bound.
    pub epsilon: f64,
    pub eigen_tol: f64,
    pub eigen_max_iter: usize,
    pub refit_tol: f64,
    pub refit_max_iter: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            r: 50,
            k: 1,
            epsilon: 0.1,
            eigen_tol: 1e-8,
            eigen_max_iter: 1000,
            refit_tol: 1e-8,
            refit_max_iter: 10_000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(Error::config("r must be >= 1"));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::config("epsilon must be positive"));
        }
        if self.eigen_tol <= 0.0 || self.refit_tol <= 0.0 {
            return Err(Error::config("tolerances must be positive"));
        }
        Ok(())
    }

    /// Iteration bound `2 beta k^2 / epsilon` from the depth-2 convergence
    /// guarantee: running more than this many greedy steps brings the risk
    /// within `epsilon` of the best constrained depth-2 network.
    pub fn theorem_budget(&self, beta: f64) -> f64 {
        2.0 * beta * (self.k * self.k) as f64 / self.epsilon
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Every per-example loss derivative is (numerically) zero.
    GradientVanished,
    /// The best first-order score over the search class is (numerically)
    /// zero: no basis function can improve the linearized risk.
    ScoreVanished,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Empirical risk after the fully corrective refit.
    pub risk: f64,
    /// Magnitude of the greedy step's score (|eigenvalue| for degree 2);
    /// zero for the initial affine fit.
    pub eig_abs: f64,
    /// Wall-clock seconds spent on this iteration.
    pub seconds: f64,
    /// Degree of the neuron added this iteration (depth-3 traces only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree: Option<u8>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
    /// Theorem iteration bound implied by `(beta, k, epsilon)` (and, for
    /// depth 3, `(d, tau)`).
    pub theorem_budget: f64,
    pub stop: Option<StopReason>,
}

impl TrainTrace {
    pub fn final_risk(&self) -> Option<f64> {
        self.records.last().map(|r| r.risk)
    }

    /// Largest increase between consecutive risk records (negative when the
    /// trace strictly decreases); the monotonicity checks bound this by 1e-10.
    pub fn max_risk_increase(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| w[1].risk - w[0].risk)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV rendering: `iteration,risk,eig_abs,seconds` plus a `degree` column
    /// when any record carries one.
    pub fn to_csv(&self) -> String {
        let with_degree = self.records.iter().any(|r| r.degree.is_some());
        let mut out = String::new();
        out.push_str(if with_degree {
            "iteration,risk,eig_abs,seconds,degree\n"
        } else {
            "iteration,risk,eig_abs,seconds\n"
        });
        for r in &self.records {
            if with_degree {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.iteration,
                    r.risk,
                    r.eig_abs,
                    r.seconds,
                    r.degree.map(|d| d.to_string()).unwrap_or_default()
                ));
            } else {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    r.iteration, r.risk, r.eig_abs, r.seconds
                ));
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct RefitResult<T> {
    /// Output coefficients of the hidden neurons, in input order.
    pub coefficients: Vec<T>,
    pub bias: T,
    pub direct: Vec<T>,
    pub risk: T,
    pub status: SolveStatus,
}

/// Growing design `[1 | x | g_1(x) | ... | g_j(x)]` with its normal equations
/// maintained incrementally, so each greedy iteration pays `O(m n)` instead of
/// rebuilding the Gram matrix from scratch.
pub(crate) struct RefitState<T> {
    cols: Vec<Vec<T>>,
    gram: Mat<T>,
    rhs: Vec<T>,
}

impl<T: Scalar> RefitState<T> {
    pub(crate) fn new(data: &Dataset<T>) -> Self {
        let m = data.len();
        let d = data.dim();
        let mut cols: Vec<Vec<T>> = Vec::with_capacity(d + 1);
        cols.push(vec![T::one(); m]);
        for j in 0..d {
            cols.push((0..m).map(|i| data.x(i)[j]).collect());
        }
        let (gram, rhs) = fit::normal_equations(&cols, data.labels());
        RefitState { cols, gram, rhs }
    }

    pub(crate) fn push_basis(&mut self, basis: &BasisFunction<T>, data: &Dataset<T>) {
        let m = data.len();
        let col: Vec<T> = (0..m).map(|i| basis.evaluate(data.x(i))).collect();
        let n = self.cols.len();
        let m_t = T::of(m as f64);
        let mut gram = Mat::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                gram.set(i, j, self.gram.get(i, j));
            }
        }
        for (i, existing) in self.cols.iter().enumerate() {
            let v = crate::linalg::dot(existing, &col) / m_t;
            gram.set(i, n, v);
            gram.set(n, i, v);
        }
        gram.set(n, n, crate::linalg::dot(&col, &col) / m_t);
        self.rhs.push(crate::linalg::dot(&col, data.labels()) / m_t);
        self.gram = gram;
        self.cols.push(col);
    }

    pub(crate) fn predictions(&self, theta: &[T]) -> Vec<T> {
        fit::predictions(&self.cols, theta)
    }

    /// Minimizes the empirical risk over all output-layer weights: exact
    /// jittered least squares for the squared loss, warm-started backtracking
    /// gradient descent for the logistic loss.
    pub(crate) fn solve(
        &self,
        labels: &[T],
        loss: Loss,
        tol: f64,
        max_iter: usize,
        warm: Option<&[T]>,
    ) -> Result<(Vec<T>, SolveStatus)> {
        match loss {
            Loss::Squared => {
                let theta =
                    crate::linalg::dense::solve_spd(&self.gram, &self.rhs, T::of(fit::DEFAULT_JITTER))?;
                Ok((theta, SolveStatus::Converged))
            }
            Loss::Logistic => fit::logistic_gd(&self.cols, labels, tol, max_iter, warm),
        }
    }
}

fn theta_into_net<T: Scalar>(
    d: usize,
    theta: &[T],
    bases: &[BasisFunction<T>],
) -> Result<PolyNet<T>> {
    debug_assert_eq!(theta.len(), 1 + d + bases.len());
    let mut net = PolyNet::affine(theta[0], theta[1..=d].to_vec());
    for (basis, &alpha) in bases.iter().zip(&theta[1 + d..]) {
        net.push_neuron(alpha, basis.clone())?;
    }
    Ok(net)
}

/// Convex re-minimization of all output-layer weights (bias, direct linear
/// term, and every neuron coefficient) for a fixed set of hidden neurons.
pub fn refit_output_weights<T: Scalar>(
    neurons: &[BasisFunction<T>],
    data: &Dataset<T>,
    loss: Loss,
    tol: f64,
    max_iter: usize,
) -> Result<RefitResult<T>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = data.dim();
    let mut state = RefitState::new(data);
    for basis in neurons {
        if basis.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: basis.dim(),
            });
        }
        state.push_basis(basis, data);
    }
    let (theta, status) = state.solve(data.labels(), loss, tol, max_iter, None)?;
    let preds = state.predictions(&theta);
    let risk = mean_loss(&preds, data.labels(), loss)?;
    Ok(RefitResult {
        coefficients: theta[1 + d..].to_vec(),
        bias: theta[0],
        direct: theta[1..=d].to_vec(),
        risk,
        status,
    })
}

/// Trains a depth-2 polynomial network: starts from the best affine fit, then
/// greedily adds up to `cfg.r` squared neurons, re-fitting all output weights
/// after each addition. Stops early when the gradient weights or the dominant
/// eigenvalue vanish (first-order stationarity).
pub fn geco2_train<T: Scalar>(
    data: &Dataset<T>,
    loss: Loss,
    cfg: &TrainConfig,
) -> Result<(PolyNet<T>, TrainTrace)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = data.dim();
    let labels = data.labels();
    let mut state = RefitState::new(data);
    let mut bases: Vec<BasisFunction<T>> = Vec::new();
    let mut records = Vec::with_capacity(cfg.r + 1);
    let mut stop = None;

    let t0 = Instant::now();
    let (mut theta, _) = state.solve(labels, loss, cfg.refit_tol, cfg.refit_max_iter, None)?;
    let mut preds = state.predictions(&theta);
    let mut risk = mean_loss(&preds, labels, loss)?;
    records.push(TraceRecord {
        iteration: 0,
        risk: risk.as_f64(),
        eig_abs: 0.0,
        seconds: t0.elapsed().as_secs_f64(),
        degree: None,
    });

    for t in 1..=cfg.r {
        let iter_start = Instant::now();
        let weights: Vec<T> = preds
            .iter()
            .zip(labels)
            .map(|(&p, &y)| loss.derivative(p, y))
            .collect();
        let grad_inf = weights
            .iter()
            .fold(T::zero(), |acc, w| acc.max(w.abs()));
        if grad_inf <= T::of(STATIONARITY_EPS) {
            stop = Some(StopReason::GradientVanished);
            break;
        }

        let op = WeightedGram::new(data.features(), &weights)?;
        let eig = dominant_eigenpair(
            &op,
            cfg.eigen_tol,
            cfg.eigen_max_iter,
            rng::derive_seed(cfg.seed, t as u64),
        )?;
        let eig_abs = eig.value.abs();
        if eig.status == SolveStatus::Degenerate || eig_abs <= T::of(STATIONARITY_EPS) {
            stop = Some(StopReason::ScoreVanished);
            break;
        }

        let basis = BasisFunction::square(eig.vector)?;
        state.push_basis(&basis, data);
        bases.push(basis);

        let mut warm = theta.clone();
        warm.push(T::zero());
        let (new_theta, _) =
            state.solve(labels, loss, cfg.refit_tol, cfg.refit_max_iter, Some(&warm))?;
        let new_preds = state.predictions(&new_theta);
        let new_risk = mean_loss(&new_preds, labels, loss)?;
        if new_risk <= risk {
            theta = new_theta;
            preds = new_preds;
            risk = new_risk;
        } else {
            // Keeping the previous weights with a zero coefficient on the new
            // neuron is always feasible, so the trace never regresses.
            theta = warm;
        }
        records.push(TraceRecord {
            iteration: t,
            risk: risk.as_f64(),
            eig_abs: eig_abs.as_f64(),
            seconds: iter_start.elapsed().as_secs_f64(),
            degree: None,
        });
    }

    debug_assert_eq!(theta.len(), 1 + d + bases.len());
    let net = theta_into_net(d, &theta, &bases)?;
    let trace = TrainTrace {
        records,
        theorem_budget: cfg.theorem_budget(loss.beta()),
        stop,
    };
    Ok((net, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_from_teacher, gen_teacher_p2k, Dataset};
    use crate::loss::empirical_risk;

    #[test]
    fn config_validation() {
        let no_iterations = TrainConfig {
            r: 0,
            ..TrainConfig::default()
        };
        assert!(no_iterations.validate().is_err());
        let bad_epsilon = TrainConfig {
            epsilon: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad_epsilon.validate().is_err());
    }

    #[test]
    fn theorem_budget_formula() {
        let cfg = TrainConfig {
            k: 2,
            epsilon: 0.1,
            ..TrainConfig::default()
        };
        assert_eq!(cfg.theorem_budget(1.0), 80.0);
    }

    #[test]
    fn refit_constant_targets_with_no_neurons() {
        let mut r = crate::rng::seeded(0, 0);
        let rows: Vec<Vec<f64>> = (0..40).map(|_| crate::rng::gaussian_vec(&mut r, 3)).collect();
        let labels = vec![2.5; 40];
        let data = Dataset::from_rows(rows, labels).unwrap();
        let fit = refit_output_weights(&[], &data, Loss::Squared, 1e-8, 100).unwrap();
        assert!((fit.bias - 2.5).abs() < 1e-8);
        assert!(fit.risk < 1e-16);
    }

    #[test]
    fn refit_recovers_scaled_square() {
        // y = 3 x1^2 fitted with the matching neuron.
        let teacher = crate::data::fixed_p2k_teacher::<f64>(4).unwrap();
        let mut scaled = crate::net::PolyNet::zero(4);
        scaled
            .push_neuron(3.0, teacher.neurons()[0].basis.clone())
            .unwrap();
        let data = gen_from_teacher(&scaled, 300, 1, 0.0).unwrap();
        let fit = refit_output_weights(
            &[teacher.neurons()[0].basis.clone()],
            &data,
            Loss::Squared,
            1e-8,
            100,
        )
        .unwrap();
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-6);
        assert!(fit.bias.abs() < 1e-6);
        assert!(fit.direct.iter().all(|w| w.abs() < 1e-6));
    }

    #[test]
    fn duplicate_neurons_fit_like_a_single_one() {
        let teacher = crate::data::fixed_p2k_teacher::<f64>(3).unwrap();
        let data = gen_from_teacher(&teacher, 200, 2, 0.0).unwrap();
        let b = teacher.neurons()[0].basis.clone();
        let single = refit_output_weights(std::slice::from_ref(&b), &data, Loss::Squared, 1e-8, 100).unwrap();
        let twin =
            refit_output_weights(&[b.clone(), b.clone()], &data, Loss::Squared, 1e-8, 100).unwrap();
        // Compare fitted predictions, not coefficients: the twin split is free.
        let mut net_single = crate::net::PolyNet::affine(single.bias, single.direct.clone());
        net_single
            .push_neuron(single.coefficients[0], b.clone())
            .unwrap();
        let mut net_twin = crate::net::PolyNet::affine(twin.bias, twin.direct.clone());
        net_twin.push_neuron(twin.coefficients[0], b.clone()).unwrap();
        net_twin.push_neuron(twin.coefficients[1], b).unwrap();
        for i in 0..data.len() {
            let a = net_single.evaluate(data.x(i)).unwrap();
            let c = net_twin.evaluate(data.x(i)).unwrap();
            assert!((a - c).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_targets_stop_after_affine_fit() {
        let mut r = crate::rng::seeded(4, 0);
        let rows: Vec<Vec<f64>> = (0..50).map(|_| crate::rng::gaussian_vec(&mut r, 4)).collect();
        let data = Dataset::from_rows(rows, vec![0.0; 50]).unwrap();
        let (net, trace) = geco2_train(&data, Loss::Squared, &TrainConfig::default()).unwrap();
        assert_eq!(trace.records[0].risk, 0.0);
        assert_eq!(trace.stop, Some(StopReason::GradientVanished));
        assert_eq!(net.neurons().len(), 0);
    }

    #[test]
    fn first_eigenvector_aligns_with_single_neuron_teacher() {
        // Realizable single-neuron teacher: at the zero-ish (affine) start the
        // greedy matrix is dominated by the teacher direction.
        let teacher = crate::data::fixed_p2k_teacher::<f64>(5).unwrap();
        let data = gen_from_teacher(&teacher, 2000, 7, 0.0).unwrap();
        let cfg = TrainConfig {
            r: 1,
            ..TrainConfig::default()
        };
        let (net, _) = geco2_train(&data, Loss::Squared, &cfg).unwrap();
        assert_eq!(net.neurons().len(), 1);
        let w = &net.neurons()[0].basis.directions()[0];
        assert!(w[0].abs() >= 0.99, "alignment {}", w[0].abs());
    }

    #[test]
    fn risk_is_monotone_and_class_contained() {
        let (data, _) = gen_teacher_p2k::<f64>(6, 2, 400, 13, 0.05).unwrap();
        let cfg = TrainConfig {
            r: 8,
            seed: 3,
            ..TrainConfig::default()
        };
        let (net, trace) = geco2_train(&data, Loss::Squared, &cfg).unwrap();
        assert!(trace.max_risk_increase() <= 1e-10);
        assert!(net.neurons().len() <= 8);
        assert!(net.neurons().iter().all(|n| n.basis.degree() == 2));
        let reported = empirical_risk(&net, &data, Loss::Squared).unwrap();
        assert!((reported - trace.final_risk().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn logistic_training_improves_over_affine() {
        let (reg_data, _) = gen_teacher_p2k::<f64>(4, 2, 300, 21, 0.0).unwrap();
        // Binarize the labels by sign.
        let rows: Vec<Vec<f64>> = (0..reg_data.len()).map(|i| reg_data.x(i).to_vec()).collect();
        let labels: Vec<f64> = reg_data
            .labels()
            .iter()
            .map(|&y| if y >= 0.0 { 1.0 } else { -1.0 })
            .collect();
        let data = Dataset::from_rows(rows, labels).unwrap();
        let cfg = TrainConfig {
            r: 5,
            refit_max_iter: 500,
            ..TrainConfig::default()
        };
        let (_, trace) = geco2_train(&data, Loss::Logistic, &cfg).unwrap();
        assert!(trace.max_risk_increase() <= 1e-10);
        assert!(trace.final_risk().unwrap() < trace.records[0].risk);
    }

    #[test]
    fn trace_csv_has_expected_header() {
        let trace = TrainTrace {
            records: vec![TraceRecord {
                iteration: 0,
                risk: 0.5,
                eig_abs: 0.0,
                seconds: 0.01,
                degree: None,
            }],
            theorem_budget: 80.0,
            stop: None,
        };
        let csv = trace.to_csv();
        assert!(csv.starts_with("iteration,risk,eig_abs,seconds\n"));
    }
}
