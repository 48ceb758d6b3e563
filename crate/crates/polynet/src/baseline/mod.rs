//! SGD backprop baselines and the supporting experiments.
//!
//! The baselines exist for protocol comparisons: a mini-batch SGD trainer
//! with Nesterov momentum over small dense MLPs (squared or ReLU hidden
//! activations), the explicit monomial linearization oracle, and the
//! over-specification experiments.

mod linearize;
mod overspec;

pub use linearize::{
    format_monomial, linearization_train, monomial_count, monomials, LinearizationFit,
};
pub use overspec::{
    iterations_to_threshold, overspec_experiment, overspec_sweep, OverspecReport, SweepTrace,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabelKind};
use crate::linalg::dense::Mat;
use crate::loss::Loss;
use crate::{accum, rng, Error, Result, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Squared,
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Squared => z * z,
            Activation::Relu => z.max(T::zero()),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    pub fn derivative<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Squared => T::of(2.0) * z,
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (T::one() - s)
            }
            Activation::Identity => T::one(),
        }
    }
}

fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" => Ok(Activation::Squared),
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::config(format!("unknown activation '{other}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DenseLayer<T> {
    /// `out x in` weight matrix.
    pub weights: Mat<T>,
    pub biases: Vec<T>,
    pub activation: Activation,
}

/// Fully connected feed-forward net with a scalar linear output.
#[derive(Clone, Debug)]
pub struct MlpNet<T> {
    layers: Vec<DenseLayer<T>>,
}

impl<T: Scalar> MlpNet<T> {
    /// Builds from explicit layers, validating the shape chain.
    pub fn from_layers(layers: Vec<DenseLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("network needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[1].weights.cols() != pair[0].weights.rows() {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].weights.rows(),
                    got: pair[1].weights.cols(),
                });
            }
        }
        for layer in &layers {
            if layer.biases.len() != layer.weights.rows() {
                return Err(Error::DimensionMismatch {
                    expected: layer.weights.rows(),
                    got: layer.biases.len(),
                });
            }
        }
        Ok(MlpNet { layers })
    }

    /// Random net for layer sizes `dims = [d, h_1, ..., h_k, 1]`; hidden
    /// layers use `activation`, the output layer is linear. Weights are
    /// Gaussian with scale `init_scale / sqrt(fan_in)`, biases zero.
    pub fn random(
        dims: &[usize],
        activation: Activation,
        init_scale: f64,
        seed: u64,
    ) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::config(
                "network needs at least input and output dims, all nonzero",
            ));
        }
        let mut r = rng::seeded(seed, 0);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for l in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let scale = T::of(init_scale / (fan_in as f64).sqrt());
            let weights = Mat::from_fn(fan_out, fan_in, |_, _| {
                scale * rng::standard_normal::<T, _>(&mut r)
            });
            layers.push(DenseLayer {
                weights,
                biases: vec![T::zero(); fan_out],
                activation: if l + 1 == dims.len() - 1 {
                    Activation::Identity
                } else {
                    activation
                },
            });
        }
        Ok(MlpNet { layers })
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weights.rows()
    }

    pub fn hidden_width(&self) -> usize {
        self.layers[0].weights.rows()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.rows() * l.weights.cols() + l.biases.len())
            .sum()
    }

    /// Scalar forward pass (first output neuron).
    pub fn forward(&self, x: &[T]) -> Result<T> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut a = x.to_vec();
        for layer in &self.layers {
            let mut z = vec![T::zero(); layer.weights.rows()];
            layer.weights.matvec(&a, &mut z);
            for (zi, b) in z.iter_mut().zip(&layer.biases) {
                *zi = layer.activation.apply(*zi + *b);
            }
            a = z;
        }
        Ok(a[0])
    }

    /// Forward pass keeping pre-activations and activations per layer.
    fn forward_trace(&self, x: &[T]) -> (Vec<Vec<T>>, Vec<Vec<T>>) {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut act = Vec::with_capacity(self.layers.len() + 1);
        act.push(x.to_vec());
        for layer in &self.layers {
            let mut z = vec![T::zero(); layer.weights.rows()];
            layer.weights.matvec(act.last().unwrap(), &mut z);
            for (zi, b) in z.iter_mut().zip(&layer.biases) {
                *zi += *b;
            }
            let a = z.iter().map(|&zi| layer.activation.apply(zi)).collect();
            pre.push(z);
            act.push(a);
        }
        (pre, act)
    }

    /// Flattened parameter vector (row-major weights then biases, layer by
    /// layer); used by the finite-difference checks.
    pub fn flatten_params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend_from_slice(layer.weights.data());
            out.extend_from_slice(&layer.biases);
        }
        out
    }

    pub fn set_params(&mut self, params: &[T]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let (rows, cols) = (layer.weights.rows(), layer.weights.cols());
            for i in 0..rows {
                for j in 0..cols {
                    layer.weights.set(i, j, params[offset]);
                    offset += 1;
                }
            }
            for b in &mut layer.biases {
                *b = params[offset];
                offset += 1;
            }
        }
        Ok(())
    }
}

/// Per-layer gradient (or velocity) storage shaped like an [`MlpNet`].
#[derive(Clone, Debug)]
pub struct MlpGradient<T> {
    pub layers: Vec<(Mat<T>, Vec<T>)>,
}

impl<T: Scalar> MlpGradient<T> {
    pub fn zeros_like(net: &MlpNet<T>) -> Self {
        MlpGradient {
            layers: net
                .layers
                .iter()
                .map(|l| {
                    (
                        Mat::zeros(l.weights.rows(), l.weights.cols()),
                        vec![T::zero(); l.biases.len()],
                    )
                })
                .collect(),
        }
    }

    fn scale_add(&mut self, scale: T, other: &MlpGradient<T>, other_scale: T) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            for i in 0..w.rows() {
                for j in 0..w.cols() {
                    w.set(i, j, scale * w.get(i, j) + other_scale * ow.get(i, j));
                }
            }
            for (bi, obi) in b.iter_mut().zip(ob) {
                *bi = scale * *bi + other_scale * *obi;
            }
        }
    }

    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b);
        }
        out
    }
}

fn apply_update<T: Scalar>(net: &mut MlpNet<T>, update: &MlpGradient<T>, scale: T) {
    for (layer, (dw, db)) in net.layers.iter_mut().zip(&update.layers) {
        for i in 0..layer.weights.rows() {
            for j in 0..layer.weights.cols() {
                let v = layer.weights.get(i, j) + scale * dw.get(i, j);
                layer.weights.set(i, j, v);
            }
        }
        for (b, d) in layer.biases.iter_mut().zip(db) {
            *b += scale * *d;
        }
    }
}

/// Backprop gradient of the loss at a single example, plus the prediction.
pub fn loss_gradient<T: Scalar>(
    net: &MlpNet<T>,
    x: &[T],
    y: T,
    loss: Loss,
) -> Result<(MlpGradient<T>, T)> {
    let mut grad = MlpGradient::zeros_like(net);
    let pred = accumulate_gradient(net, x, y, loss, &mut grad, T::one())?;
    Ok((grad, pred))
}

fn accumulate_gradient<T: Scalar>(
    net: &MlpNet<T>,
    x: &[T],
    y: T,
    loss: Loss,
    grad: &mut MlpGradient<T>,
    weight: T,
) -> Result<T> {
    if x.len() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            got: x.len(),
        });
    }
    let (pre, act) = net.forward_trace(x);
    let pred = act.last().unwrap()[0];
    let l_count = net.layers.len();
    // Output layer is linear and scalar.
    let mut delta = vec![weight * loss.derivative(pred, y)];
    for l in (0..l_count).rev() {
        let layer = &net.layers[l];
        let (gw, gb) = &mut grad.layers[l];
        let a_prev = &act[l];
        for i in 0..layer.weights.rows() {
            let di = delta[i];
            if di != T::zero() {
                for j in 0..layer.weights.cols() {
                    gw.set(i, j, gw.get(i, j) + di * a_prev[j]);
                }
            }
            gb[i] += di;
        }
        if l > 0 {
            let mut next = vec![T::zero(); layer.weights.cols()];
            layer.weights.t_matvec(&delta, &mut next);
            for (nd, z) in next.iter_mut().zip(&pre[l - 1]) {
                *nd *= net.layers[l - 1].activation.derivative(*z);
            }
            delta = next;
        }
    }
    Ok(pred)
}

/// SGD hyperparameters. The step size at iteration `t` (1-based) is
/// `learning_rate / (1 + decay * (t - 1))`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub decay: f64,
    pub batch_size: usize,
    /// Nesterov momentum coefficient; 0 disables momentum.
    pub momentum: f64,
    pub iterations: usize,
    /// Trace cadence; 0 disables the trace.
    pub eval_every: usize,
    /// Multiplier on the `1/sqrt(fan_in)` init scale.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 0.01,
            decay: 0.0,
            batch_size: 32,
            momentum: 0.9,
            iterations: 1000,
            eval_every: 100,
            init_scale: 1.0,
            seed: 0,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::config("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be >= 1"));
        }
        if self.momentum < 0.0 || self.momentum >= 1.0 {
            return Err(Error::config("momentum must lie in [0, 1)"));
        }
        if self.decay < 0.0 {
            return Err(Error::config("decay must be non-negative"));
        }
        Ok(())
    }
}

/// Trace error: classification error for binary labels, mean loss otherwise.
pub fn evaluation_error<T: Scalar>(net: &MlpNet<T>, data: &Dataset<T>, loss: Loss) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    match data.kind() {
        LabelKind::Binary => {
            let mut wrong = 0usize;
            for i in 0..data.len() {
                let p = net.forward(data.x(i))?;
                let sign = if p >= T::zero() { T::one() } else { -T::one() };
                if sign != data.label(i) {
                    wrong += 1;
                }
            }
            Ok(wrong as f64 / data.len() as f64)
        }
        LabelKind::Regression => {
            let vals =
                (0..data.len()).map(|i| loss.value(net.forward(data.x(i)).unwrap(), data.label(i)));
            Ok(accum::mean(vals).as_f64())
        }
    }
}

/// `(iteration, error)` pairs recorded along a training run.
pub type ErrorTrace = Vec<(usize, f64)>;

/// Mini-batch SGD with Nesterov momentum:
/// `v <- mu v - eta grad(theta + mu v)`, `theta <- theta + v`.
///
/// A batch size of at least `m` runs deterministic full-gradient descent in
/// fixed example order. The trace holds `(iteration, error)` pairs on `eval`
/// when given, otherwise on the training set. Aborts with a diagnostic when
/// the risk turns non-finite.
pub fn sgd_train<T: Scalar>(
    net: &MlpNet<T>,
    train: &Dataset<T>,
    eval: Option<&Dataset<T>>,
    loss: Loss,
    cfg: &SgdConfig,
) -> Result<(MlpNet<T>, ErrorTrace)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let m = train.len();
    let mut model = net.clone();
    let mut velocity = MlpGradient::zeros_like(&model);
    let mut grad = MlpGradient::zeros_like(&model);
    let mut trace = Vec::new();
    let mut r = rng::seeded(cfg.seed, 0);
    let full_batch = cfg.batch_size >= m;
    let mu = T::of(cfg.momentum);

    for it in 1..=cfg.iterations {
        let eta = T::of(cfg.learning_rate / (1.0 + cfg.decay * (it as f64 - 1.0)));

        // Gradient at the lookahead point theta + mu v.
        let mut lookahead = model.clone();
        if cfg.momentum > 0.0 {
            apply_update(&mut lookahead, &velocity, mu);
        }
        grad = {
            let mut g = grad;
            for (w, b) in &mut g.layers {
                *w = Mat::zeros(w.rows(), w.cols());
                b.iter_mut().for_each(|x| *x = T::zero());
            }
            g
        };
        let batch = if full_batch { m } else { cfg.batch_size };
        let inv = T::of(1.0 / batch as f64);
        let mut risk = accum::CompensatedSum::new();
        for b_idx in 0..batch {
            let i = if full_batch {
                b_idx
            } else {
                r.gen_range(0..m)
            };
            let pred =
                accumulate_gradient(&lookahead, train.x(i), train.label(i), loss, &mut grad, inv)?;
            risk.add(loss.value(pred, train.label(i)));
        }
        let batch_risk = risk.value() / T::of(batch as f64);
        if !batch_risk.is_finite() {
            return Err(Error::numerical(format!(
                "SGD diverged at iteration {it}: batch risk is not finite"
            )));
        }

        // v <- mu v - eta g; theta <- theta + v.
        velocity.scale_add(mu, &grad, -eta);
        apply_update(&mut model, &velocity, T::one());

        if cfg.eval_every > 0 && it % cfg.eval_every == 0 {
            let err = evaluation_error(&model, eval.unwrap_or(train), loss)?;
            if !err.is_finite() {
                return Err(Error::numerical(format!(
                    "SGD diverged at iteration {it}: evaluation error is not finite"
                )));
            }
            trace.push((it, err));
        }
    }
    Ok((model, trace))
}
