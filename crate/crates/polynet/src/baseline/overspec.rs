//! Over-specification experiments.
//!
//! With `n >= m` hidden neurons and full-rank random features, the output
//! layer alone interpolates any targets: fix the hidden weights `V`, form
//! `Z = sigma(V X)`, and solve the convex output problem. The sweep side
//! measures how much over-specification speeds up SGD on teacher data.

use serde::{Deserialize, Serialize};

use super::{sgd_train, Activation, MlpNet, SgdConfig};
use crate::data::Dataset;
use crate::linalg::dense::{solve_spd, Mat};
use crate::loss::Loss;
use crate::{accum, rng, Error, Result, Scalar};

/// Relative singular-value threshold for the numerical rank estimate.
pub const RANK_THRESHOLD: f64 = 1e-8;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OverspecReport {
    pub d: usize,
    pub m: usize,
    pub n_hidden: usize,
    pub activation: Activation,
    pub seed: u64,
    /// Numerical rank of `Z = sigma(V X)`: singular values above
    /// `1e-8 * sigma_max`.
    pub rank: usize,
    /// Squared-loss risk of the convex output solve against random targets.
    pub risk: f64,
    /// Set when `rank < m`, i.e. the output layer cannot interpolate
    /// arbitrary targets.
    pub rank_deficient: bool,
}

/// Samples `V` and `X` Gaussian, reports the numerical rank of the hidden
/// feature matrix and the risk of the convex output-layer solve on random
/// continuous targets.
pub fn overspec_experiment(
    d: usize,
    m: usize,
    n_hidden: usize,
    activation: Activation,
    seed: u64,
) -> Result<OverspecReport> {
    if d == 0 || m == 0 || n_hidden == 0 {
        return Err(Error::config("d, m, n_hidden must all be >= 1"));
    }
    let mut r = rng::seeded(seed, 0);
    // Rows of x are examples; V rows are hidden neurons, scaled 1/sqrt(d).
    let x = Mat::<f64>::from_fn(m, d, |_, _| rng::standard_normal(&mut r));
    let v_scale = 1.0 / (d as f64).sqrt();
    let v = Mat::<f64>::from_fn(n_hidden, d, |_, _| v_scale * rng::standard_normal::<f64, _>(&mut r));
    let y: Vec<f64> = (0..m).map(|_| rng::standard_normal(&mut r)).collect();

    // Z[j, i] = sigma(v_j . x_i), an n x m matrix.
    let z = Mat::from_fn(n_hidden, m, |j, i| {
        activation.apply(crate::linalg::dot(v.row(j), x.row(i)))
    });

    // Numerical rank from the singular values of Z.
    let singulars = crate::linalg::dense::singular_values(&z)?;
    let sigma_max = singulars.first().copied().unwrap_or(0.0);
    let rank = if sigma_max > 0.0 {
        singulars
            .iter()
            .filter(|&&s| s > RANK_THRESHOLD * sigma_max)
            .count()
    } else {
        0
    };

    // Convex output solve: min_w sum_i (w . z_i - y_i)^2 / (2m) through the
    // normal equations Z Z^T w = Z y.
    let gram = z.gram();
    let mut zy = vec![0.0; n_hidden];
    z.matvec(&y, &mut zy);
    let w = solve_spd(&gram, &zy, 1e-12 * sigma_max.max(1.0))?;
    let mut preds = vec![0.0; m];
    z.t_matvec(&w, &mut preds);
    let risk = accum::mean(
        preds
            .iter()
            .zip(&y)
            .map(|(&p, &t)| Loss::Squared.value(p, t)),
    );

    Ok(OverspecReport {
        d,
        m,
        n_hidden,
        activation,
        seed,
        rank,
        risk,
        rank_deficient: rank < m,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepTrace {
    pub factor: usize,
    pub student_width: usize,
    pub seed: u64,
    /// `(iteration, error)` pairs from the SGD run.
    pub trace: Vec<(usize, f64)>,
}

/// Trains student networks of width `teacher_width * factor` on data from the
/// teacher, one SGD run per factor, and returns the traces.
pub fn overspec_sweep<T: Scalar>(
    teacher: &MlpNet<T>,
    data: &Dataset<T>,
    factors: &[usize],
    loss: Loss,
    cfg: &SgdConfig,
) -> Result<Vec<SweepTrace>> {
    if factors.is_empty() {
        return Err(Error::config("sweep needs at least one factor"));
    }
    let teacher_width = teacher.hidden_width();
    let d = teacher.input_dim();
    let mut traces = Vec::with_capacity(factors.len());
    for (fi, &factor) in factors.iter().enumerate() {
        if factor == 0 {
            return Err(Error::config("over-specification factors must be >= 1"));
        }
        let width = teacher_width * factor;
        let run_seed = rng::derive_seed(cfg.seed, fi as u64);
        let student = MlpNet::<T>::random(
            &[d, width, 1],
            teacher.layers()[0].activation,
            cfg.init_scale,
            run_seed,
        )?;
        let run_cfg = SgdConfig {
            seed: run_seed,
            ..cfg.clone()
        };
        let (_, trace) = sgd_train(&student, data, None, loss, &run_cfg)?;
        traces.push(SweepTrace {
            factor,
            student_width: width,
            seed: run_seed,
            trace,
        });
    }
    Ok(traces)
}

/// First trace iteration at which the error reaches `threshold`.
pub fn iterations_to_threshold(trace: &[(usize, f64)], threshold: f64) -> Option<usize> {
    trace
        .iter()
        .find(|(_, err)| *err <= threshold)
        .map(|(it, _)| *it)
}
