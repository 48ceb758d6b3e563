//! Depth-3 GECO: greedy selection over products of up to three unit-norm
//! linear forms, with a randomized approximate tensor maximization for the
//! degree-3 candidates.
//!
//! The degree-3 greedy step asks for unit vectors maximizing the trilinear
//! score `F(w, u, v) = (1/m) sum_i c_i (w^T x_i)(u^T x_i)(v^T x_i)`, which is
//! NP-hard in general. The randomized procedure draws `s = ceil(2 d ln(1/delta))`
//! Gaussian starts `w_t`; for each it solves the *bilinear* problem exactly
//! enough — the top singular pair of `A_t = (1/m) sum_i c_i (w_t^T x_i) x_i x_i^T`
//! — and returns the best triple. A random unit vector has
//! `(w_t^T w*)^2 > 1/(2d)` with probability about `1/(2d)`, so with `s` starts
//! the returned score is at least `(1-tau)/sqrt(2d)` of the optimum with
//! probability `1 - delta`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::geco2::{RefitState, StopReason, TraceRecord, TrainConfig, TrainTrace};
use crate::linalg::{dominant_eigenpair, top_singular_pair, SolveStatus, WeightedGram};
use crate::loss::{mean_loss, Loss};
use crate::net::{BasisFunction, PolyNet};
use crate::{accum, rng, Error, Result, Scalar};

/// Tolerance of the per-start singular solve when not driven by a
/// [`TrainConfig`].
pub const DEFAULT_INNER_TOL: f64 = 1e-8;
pub const DEFAULT_INNER_MAX_ITER: usize = 1000;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TensorConfig {
    /// Relative gap of the inner singular-pair solve, in (0, 1); enters the
    /// approximation guarantee as `(1 - tau)/sqrt(2d)`.
    pub tau: f64,
    /// Per-greedy-step failure probability, in (0, 1).
    pub delta: f64,
    /// Overrides the default restart count `ceil(2 d ln(1/delta))`.
    pub restarts_override: Option<usize>,
    pub seed: u64,
}

impl Default for TensorConfig {
    fn default() -> Self {
        TensorConfig {
            tau: 0.5,
            delta: 0.1,
            restarts_override: None,
            seed: 0,
        }
    }
}

impl TensorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.tau && self.tau < 1.0) {
            return Err(Error::config("tau must lie in (0, 1)"));
        }
        if !(0.0 < self.delta && self.delta < 1.0) {
            return Err(Error::config("delta must lie in (0, 1)"));
        }
        if self.restarts_override == Some(0) {
            return Err(Error::config("restart override must be >= 1"));
        }
        Ok(())
    }

    /// Number of random starts: `ceil(2 d ln(1/delta))` (natural log) unless
    /// overridden, and at least 1.
    pub fn restarts(&self, d: usize) -> usize {
        match self.restarts_override {
            Some(s) => s.max(1),
            None => ((2.0 * d as f64 * (1.0 / self.delta).ln()).ceil() as usize).max(1),
        }
    }

    /// Guaranteed approximation ratio `(1 - tau)/sqrt(2d)`.
    pub fn guarantee_ratio(&self, d: usize) -> f64 {
        (1.0 - self.tau) / (2.0 * d as f64).sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct TensorResult<T> {
    pub w: Vec<T>,
    pub u: Vec<T>,
    pub v: Vec<T>,
    /// `F(w, u, v)` recomputed directly from the data.
    pub score: T,
    /// Index of the winning restart (lowest index wins ties).
    pub restart_index: usize,
    pub status: SolveStatus,
}

fn trilinear_score<T: Scalar>(data: &Dataset<T>, c: &[T], w: &[T], u: &[T], v: &[T]) -> T {
    accum::mean((0..data.len()).map(|i| {
        let x = data.x(i);
        c[i] * crate::linalg::dot(w, x) * crate::linalg::dot(u, x) * crate::linalg::dot(v, x)
    }))
}

fn unit_axis<T: Scalar>(d: usize) -> Vec<T> {
    let mut e = vec![T::zero(); d];
    e[0] = T::one();
    e
}

/// Randomized approximate maximization of the trilinear score.
///
/// Draws `s` Gaussian starts (restart `t` uses random stream `(seed, t)`, so
/// the restarts are order-independent), solves the per-start singular problem,
/// and returns the argmax triple; ties break toward the lowest restart index.
/// With probability at least `1 - delta` the returned score is at least
/// `(1 - tau)/sqrt(2d)` times the optimum. All-zero weights yield a
/// [`SolveStatus::Degenerate`] result with score zero.
pub fn approx_tensor_max<T: Scalar>(
    data: &Dataset<T>,
    weights: &[T],
    cfg: &TensorConfig,
) -> Result<TensorResult<T>> {
    approx_tensor_max_inner(data, weights, cfg, DEFAULT_INNER_TOL, DEFAULT_INNER_MAX_ITER)
}

pub(crate) fn approx_tensor_max_inner<T: Scalar>(
    data: &Dataset<T>,
    weights: &[T],
    cfg: &TensorConfig,
    inner_tol: f64,
    inner_max_iter: usize,
) -> Result<TensorResult<T>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if weights.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            got: weights.len(),
        });
    }
    let d = data.dim();
    if weights.iter().all(|&c| c == T::zero()) {
        let e = unit_axis(d);
        return Ok(TensorResult {
            w: e.clone(),
            u: e.clone(),
            v: e,
            score: T::zero(),
            restart_index: 0,
            status: SolveStatus::Degenerate,
        });
    }

    let s = cfg.restarts(d);
    let m = data.len();
    let mut best: Option<TensorResult<T>> = None;
    let mut gamma = vec![T::zero(); m];
    for t in 0..s {
        let w: Vec<T> = rng::unit_gaussian(&mut rng::seeded(cfg.seed, t as u64), d);
        for i in 0..m {
            gamma[i] = weights[i] * crate::linalg::dot(&w, data.x(i));
        }
        let op = WeightedGram::new(data.features(), &gamma)?;
        let pair = top_singular_pair(
            &op,
            inner_tol,
            inner_max_iter,
            rng::derive_seed(cfg.seed, t as u64),
        )?;
        let score = trilinear_score(data, weights, &w, &pair.left, &pair.right);
        let better = match &best {
            None => true,
            Some(b) => score > b.score,
        };
        if better {
            best = Some(TensorResult {
                w,
                u: pair.left,
                v: pair.right,
                score,
                restart_index: t,
                status: SolveStatus::Converged,
            });
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Exhaustive reference maximization of the trilinear score for `d` in
/// `{2, 3}`: scans unit vectors `w` on an angular grid (`resolution_deg`
/// degrees) and solves `max_{u,v} u^T A_w v = sigma_max(A_w)` in closed form.
/// Being a feasible-point maximum, the result is a lower bound on the true
/// optimum that tightens as the grid refines.
pub fn grid_tensor_oracle<T: Scalar>(
    data: &Dataset<T>,
    weights: &[T],
    resolution_deg: f64,
) -> Result<f64> {
    let d = data.dim();
    if !(d == 2 || d == 3) {
        return Err(Error::config("grid oracle supports d = 2 or 3 only"));
    }
    if resolution_deg <= 0.0 {
        return Err(Error::config("grid resolution must be positive"));
    }
    let m = data.len();
    // Precompute M_k = (1/m) sum_i c_i x_ik x_i x_i^T so each grid point costs
    // O(d^3) instead of O(m d^2).
    let mut slices = vec![vec![0.0f64; d * d]; d];
    for i in 0..m {
        let x = data.x(i);
        let c = weights[i].as_f64() / m as f64;
        for k in 0..d {
            let ck = c * x[k].as_f64();
            let slice = &mut slices[k];
            for a in 0..d {
                let xa = x[a].as_f64();
                for b in 0..d {
                    slice[a * d + b] += ck * xa * x[b].as_f64();
                }
            }
        }
    }
    let assemble = |w: &[f64]| -> Vec<f64> {
        let mut a = vec![0.0; d * d];
        for k in 0..d {
            if w[k] == 0.0 {
                continue;
            }
            for (dst, src) in a.iter_mut().zip(&slices[k]) {
                *dst += w[k] * src;
            }
        }
        a
    };

    let steps = (360.0 / resolution_deg).ceil() as usize;
    let mut best = 0.0f64;
    if d == 2 {
        for s in 0..steps {
            let theta = (s as f64) * resolution_deg.to_radians();
            let w = [theta.cos(), theta.sin()];
            let a = assemble(&w);
            best = best.max(sym2_max_abs_eig(&a));
        }
    } else {
        let polar_steps = (180.0 / resolution_deg).ceil() as usize;
        for p in 0..=polar_steps {
            let theta = (p as f64) * resolution_deg.to_radians();
            let (st, ct) = (theta.sin(), theta.cos());
            for s in 0..steps {
                let phi = (s as f64) * resolution_deg.to_radians();
                let w = [st * phi.cos(), st * phi.sin(), ct];
                let a = assemble(&w);
                best = best.max(sym3_max_abs_eig(&a));
            }
        }
    }
    Ok(best)
}

fn sym2_max_abs_eig(a: &[f64]) -> f64 {
    let (p, q, r) = (a[0], a[1], a[3]);
    let mean = (p + r) / 2.0;
    let disc = ((p - r) / 2.0).hypot(q);
    (mean + disc).abs().max((mean - disc).abs())
}

/// Largest-magnitude eigenvalue of a symmetric 3x3 matrix (row-major) via the
/// trigonometric closed form.
fn sym3_max_abs_eig(a: &[f64]) -> f64 {
    let (a11, a12, a13) = (a[0], a[1], a[2]);
    let (a22, a23, a33) = (a[4], a[5], a[8]);
    let p1 = a12 * a12 + a13 * a13 + a23 * a23;
    if p1 == 0.0 {
        return a11.abs().max(a22.abs()).max(a33.abs());
    }
    let q = (a11 + a22 + a33) / 3.0;
    let p2 = (a11 - q).powi(2) + (a22 - q).powi(2) + (a33 - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let (b11, b22, b33) = ((a11 - q) / p, (a22 - q) / p, (a33 - q) / p);
    let (b12, b13, b23) = (a12 / p, a13 / p, a23 / p);
    let detb = b11 * (b22 * b33 - b23 * b23) - b12 * (b12 * b33 - b23 * b13)
        + b13 * (b12 * b23 - b22 * b13);
    let r = (detb / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let eig_max = q + 2.0 * p * phi.cos();
    let eig_min = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    eig_max.abs().max(eig_min.abs())
}

/// Iteration bound of the depth-3 guarantee: `4 d beta k^2 / (eps (1-tau)^2)`.
pub fn theorem3_budget(d: usize, beta: f64, k: usize, epsilon: f64, tau: f64) -> f64 {
    4.0 * d as f64 * beta * (k * k) as f64 / (epsilon * (1.0 - tau) * (1.0 - tau))
}

/// Trains a mixed-degree polynomial network. Each greedy step evaluates the
/// best candidate of each degree under the same first-order functional —
/// degree 1 in closed form (the normalized gradient-weighted mean), degree 2
/// by the dominant eigenpair, degree 3 by [`approx_tensor_max`] — adds the
/// candidate with the largest absolute score (ties to the lower degree), and
/// re-fits all output weights, bias and direct term included.
pub fn geco3_train<T: Scalar>(
    data: &Dataset<T>,
    loss: Loss,
    cfg: &TrainConfig,
    tcfg: &TensorConfig,
) -> Result<(PolyNet<T>, TrainTrace)> {
    cfg.validate()?;
    tcfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = data.dim();
    let labels = data.labels();
    let m = data.len();
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
        let grad_inf = weights.iter().fold(T::zero(), |acc, w| acc.max(w.abs()));
        if grad_inf <= T::of(crate::geco2::STATIONARITY_EPS) {
            stop = Some(StopReason::GradientVanished);
            break;
        }

        // Degree 1: the linear functional w -> (1/m) sum_i c_i w^T x_i is
        // maximized over the unit ball by the normalized mean.
        let mut mean_vec = vec![T::zero(); d];
        data.features().t_matvec(&weights, &mut mean_vec);
        let m_t = T::of(m as f64);
        mean_vec.iter_mut().for_each(|v| *v /= m_t);
        let score1 = crate::linalg::norm2(&mean_vec);

        // Degree 2: dominant eigenpair.
        let op = WeightedGram::new(data.features(), &weights)?;
        let eig = dominant_eigenpair(
            &op,
            cfg.eigen_tol,
            cfg.eigen_max_iter,
            rng::derive_seed(cfg.seed, (t as u64) << 2),
        )?;
        let score2 = eig.value.abs();

        // Degree 3: randomized tensor maximization.
        let step_tcfg = TensorConfig {
            seed: rng::derive_seed(tcfg.seed, (t as u64) << 2 | 1),
            ..tcfg.clone()
        };
        let tensor = approx_tensor_max_inner(
            data,
            &weights,
            &step_tcfg,
            cfg.eigen_tol,
            cfg.eigen_max_iter,
        )?;
        let score3 = tensor.score.abs();

        let best_score = score1.max(score2).max(score3);
        if best_score <= T::of(crate::geco2::STATIONARITY_EPS) {
            stop = Some(StopReason::ScoreVanished);
            break;
        }
        let (basis, degree) = if score1 >= score2 && score1 >= score3 {
            (BasisFunction::linear(mean_vec)?, 1u8)
        } else if score2 >= score3 {
            (BasisFunction::square(eig.vector)?, 2u8)
        } else {
            (BasisFunction::cubic(tensor.w, tensor.u, tensor.v)?, 3u8)
        };

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
            theta = warm;
        }
        records.push(TraceRecord {
            iteration: t,
            risk: risk.as_f64(),
            eig_abs: best_score.as_f64(),
            seconds: iter_start.elapsed().as_secs_f64(),
            degree: Some(degree),
        });
    }

    let mut net = PolyNet::affine(theta[0], theta[1..=d].to_vec());
    for (basis, &alpha) in bases.iter().zip(&theta[1 + d..]) {
        net.push_neuron(alpha, basis.clone())?;
    }
    let trace = TrainTrace {
        records,
        theorem_budget: theorem3_budget(d, loss.beta(), cfg.k, cfg.epsilon, tcfg.tau),
        stop,
    };
    Ok((net, trace))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioTrial {
    pub trial: usize,
    pub score: f64,
    pub oracle: f64,
    pub success: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioReport {
    pub d: usize,
    pub m: usize,
    pub tau: f64,
    pub delta: f64,
    pub trials: usize,
    pub grid_resolution_deg: f64,
    /// `(1 - tau)/sqrt(2d)`.
    pub bound: f64,
    pub success_fraction: f64,
    pub detail: Vec<RatioTrial>,
}

/// Repeated head-to-head of [`approx_tensor_max`] against the grid oracle on
/// fresh random data: trial `i` succeeds when
/// `score >= (1-tau)/sqrt(2d) * oracle`.
pub fn tensor_ratio_experiment(
    d: usize,
    m: usize,
    tau: f64,
    delta: f64,
    trials: usize,
    grid_resolution_deg: f64,
    seed: u64,
) -> Result<RatioReport> {
    if trials == 0 {
        return Err(Error::config("need at least one trial"));
    }
    let base = TensorConfig {
        tau,
        delta,
        restarts_override: None,
        seed,
    };
    base.validate()?;
    let bound = base.guarantee_ratio(d);
    let mut detail = Vec::with_capacity(trials);
    let mut successes = 0usize;
    for trial in 0..trials {
        let data_seed = rng::derive_seed(seed, 2 * trial as u64);
        let mut r = rng::seeded(data_seed, 0);
        let rows: Vec<Vec<f64>> = (0..m).map(|_| rng::gaussian_vec(&mut r, d)).collect();
        let labels = vec![0.0f64; m];
        let data = Dataset::from_rows(rows, labels)?;
        let weights: Vec<f64> = (0..m).map(|_| rng::standard_normal(&mut r)).collect();

        let cfg = TensorConfig {
            seed: rng::derive_seed(seed, 2 * trial as u64 + 1),
            ..base.clone()
        };
        let result = approx_tensor_max(&data, &weights, &cfg)?;
        let oracle = grid_tensor_oracle(&data, &weights, grid_resolution_deg)?;
        let success = result.score >= bound * oracle;
        successes += success as usize;
        detail.push(RatioTrial {
            trial,
            score: result.score,
            oracle,
            success,
        });
    }
    Ok(RatioReport {
        d,
        m,
        tau,
        delta,
        trials,
        grid_resolution_deg,
        bound,
        success_fraction: successes as f64 / trials as f64,
        detail,
    })
}
