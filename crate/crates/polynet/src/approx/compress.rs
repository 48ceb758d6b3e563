//! Compressing a small sigmoid network into a squared-activation network.
//!
//! Each sigmoid unit is replaced by the fitted polynomial applied to the
//! unit's pre-activation, composed through the shared polynomial gadget grid.
//! With per-unit error `eps / max(1, ||w_out||_1)` the output error is at most
//! `eps` by the triangle inequality, and the pre-activations stay inside the
//! approximation domain because `||w||_1 + |b| <= L <= 4L` on `||x||_inf < 1`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{fit_sigmoid_poly, sigmoid};
use crate::net::gadget::affine_polynomial_combination;
use crate::net::GadgetNet;
use crate::{rng, Error, Result};

/// Validation caps: the construction targets small explicit nets.
pub const MAX_UNITS: usize = 5;
pub const MAX_INPUT_DIM: usize = 5;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SigmoidUnit {
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// One hidden layer of sigmoid units with a linear output.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SigmoidNet {
    pub units: Vec<SigmoidUnit>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
}

impl SigmoidNet {
    pub fn input_dim(&self) -> usize {
        self.units.first().map_or(0, |u| u.weights.len())
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut out = self.output_bias;
        for (unit, w) in self.units.iter().zip(&self.output_weights) {
            out += w * sigmoid(crate::linalg::dot(&unit.weights, x) + unit.bias);
        }
        Ok(out)
    }

    /// Largest per-unit `||w||_1 + |b|`.
    pub fn max_unit_l1(&self) -> f64 {
        self.units
            .iter()
            .map(|u| u.weights.iter().map(|w| w.abs()).sum::<f64>() + u.bias.abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompressionReport {
    pub epsilon: f64,
    /// Per-unit polynomial target, `epsilon / max(1, ||w_out||_1)`.
    pub unit_epsilon: f64,
    pub l_bound: f64,
    pub poly_degree: usize,
    pub hidden_neurons: usize,
    pub hidden_layers: usize,
    /// Largest observed `|f(x) - g(x)|` over the sampled points.
    pub sup_gap: f64,
    pub points: usize,
    pub passed: bool,
}

/// Builds the squared-activation replacement `g` for a sigmoid network `f`
/// and verifies `sup |f - g| <= epsilon` over `points` random inputs with
/// `||x||_inf < 1`.
pub fn compress_sigmoid_net(
    net: &SigmoidNet,
    l_bound: f64,
    epsilon: f64,
    size_budget: usize,
    points: usize,
    seed: u64,
) -> Result<(GadgetNet<f64>, CompressionReport)> {
    if net.units.is_empty() || net.units.len() > MAX_UNITS {
        return Err(Error::config(format!(
            "construction handles 1..={MAX_UNITS} sigmoid units"
        )));
    }
    let d = net.input_dim();
    if d == 0 || d > MAX_INPUT_DIM {
        return Err(Error::config(format!(
            "construction handles input dimension 1..={MAX_INPUT_DIM}"
        )));
    }
    if net.output_weights.len() != net.units.len() {
        return Err(Error::DimensionMismatch {
            expected: net.units.len(),
            got: net.output_weights.len(),
        });
    }
    if net.units.iter().any(|u| u.weights.len() != d) {
        return Err(Error::config("all units must share the input dimension"));
    }
    let unit_l1 = net.max_unit_l1();
    if unit_l1 > l_bound {
        return Err(Error::config(format!(
            "unit weight norm {unit_l1} exceeds the declared bound L = {l_bound}"
        )));
    }

    let out_l1: f64 = net.output_weights.iter().map(|w| w.abs()).sum();
    let unit_epsilon = epsilon / out_l1.max(1.0);
    let poly = fit_sigmoid_poly(unit_epsilon, l_bound, None)?;

    let units: Vec<(Vec<f64>, f64)> = net
        .units
        .iter()
        .map(|u| (u.weights.clone(), u.bias))
        .collect();
    let gadget = affine_polynomial_combination(
        d,
        &units,
        poly.coefficients.get(1..).unwrap_or(&[]),
        poly.coefficients[0],
        &net.output_weights,
        net.output_bias,
    )?;
    if gadget.hidden_neuron_count() > size_budget {
        return Err(Error::BudgetExceeded(format!(
            "compressed network needs {} squared neurons (budget {size_budget})",
            gadget.hidden_neuron_count()
        )));
    }

    let mut r = rng::seeded(seed, 0);
    let mut sup_gap = 0.0f64;
    for _ in 0..points {
        let x: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
        let f = net.evaluate(&x)?;
        let g = gadget.evaluate(&x)?[0];
        sup_gap = sup_gap.max((f - g).abs());
    }

    let report = CompressionReport {
        epsilon,
        unit_epsilon,
        l_bound,
        poly_degree: poly.degree,
        hidden_neurons: gadget.hidden_neuron_count(),
        hidden_layers: gadget.hidden_layer_count(),
        sup_gap,
        points,
        passed: sup_gap <= epsilon,
    };
    Ok((gadget, report))
}
