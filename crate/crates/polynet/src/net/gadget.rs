//! Exact gadget networks built from squared activations.
//!
//! The identities
//!
//! ```text
//! x        = ((x+1)^2 - (x-1)^2) / 4
//! x1 * x2  = ((x1+x2)/2)^2 - ((x1-x2)/2)^2
//! ```
//!
//! let a network whose only nonlinearity is `z -> z^2` compute identities,
//! products, powers (by repeated squaring with identity padding to keep the
//! layers aligned), and arbitrary polynomials — exactly, not approximately.
//! Gadgets store explicit layer/weight structure so depth and size claims are
//! assertable by counting.
//!
//! A neuron may read the input and any earlier layer (the network is a layered
//! DAG). The gadget constructors below wire strictly layer-to-layer and pad
//! with identity pairs; [`expand_to_gadget`] uses input skips, which is what
//! brings a degree-3 neuron down to four squared neurons.

use std::collections::BTreeMap;

use crate::linalg::dot;
use crate::{Error, Result, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GadgetActivation {
    Squared,
    Identity,
}

#[derive(Clone, Debug)]
pub struct GadgetNeuron<T> {
    /// Weights over the concatenated signal vector (inputs, then every
    /// previous layer's outputs in order). May be shorter than the full
    /// prefix; missing entries are zero.
    pub weights: Vec<T>,
    pub bias: T,
    pub activation: GadgetActivation,
}

impl<T: Scalar> GadgetNeuron<T> {
    fn eval(&self, signals: &[T]) -> T {
        let z = dot(&self.weights, &signals[..self.weights.len()]) + self.bias;
        match self.activation {
            GadgetActivation::Squared => z * z,
            GadgetActivation::Identity => z,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GadgetNet<T> {
    input_dim: usize,
    hidden: Vec<Vec<GadgetNeuron<T>>>,
    output: Vec<GadgetNeuron<T>>,
}

impl<T: Scalar> GadgetNet<T> {
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_layer_count(&self) -> usize {
        self.hidden.len()
    }

    pub fn hidden_neuron_count(&self) -> usize {
        self.hidden.iter().map(Vec::len).sum()
    }

    pub fn output_dim(&self) -> usize {
        self.output.len()
    }

    pub fn hidden_layers(&self) -> &[Vec<GadgetNeuron<T>>] {
        &self.hidden
    }

    /// Forward pass: `z -> z^2` at every hidden neuron, identity at the
    /// output layer.
    pub fn evaluate(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let mut signals = x.to_vec();
        for layer in &self.hidden {
            let new: Vec<T> = layer.iter().map(|n| n.eval(&signals)).collect();
            signals.extend(new);
        }
        Ok(self.output.iter().map(|n| n.eval(&signals)).collect())
    }

    /// Convenience for single-input single-output gadgets.
    pub fn evaluate_scalar(&self, x: T) -> Result<T> {
        let out = self.evaluate(&[x])?;
        Ok(out[0])
    }
}

/// Virtual value during construction: a linear combination of already-built
/// signals plus a constant. Consumable by any later layer.
#[derive(Clone, Debug)]
struct Tap<T> {
    terms: Vec<(usize, T)>,
    bias: T,
}

impl<T: Scalar> Tap<T> {
    fn input(i: usize) -> Self {
        Tap {
            terms: vec![(i, T::one())],
            bias: T::zero(),
        }
    }

    fn affine(weights: &[T], bias: T) -> Self {
        Tap {
            terms: weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != T::zero())
                .map(|(i, &w)| (i, w))
                .collect(),
            bias,
        }
    }

    fn scaled(&self, c: T) -> Self {
        Tap {
            terms: self.terms.iter().map(|&(i, w)| (i, w * c)).collect(),
            bias: self.bias * c,
        }
    }

    fn offset(&self, b: T) -> Self {
        Tap {
            terms: self.terms.clone(),
            bias: self.bias + b,
        }
    }

    fn plus(&self, other: &Tap<T>) -> Self {
        let mut merged: BTreeMap<usize, T> = BTreeMap::new();
        for &(i, w) in self.terms.iter().chain(&other.terms) {
            *merged.entry(i).or_insert_with(T::zero) += w;
        }
        Tap {
            terms: merged.into_iter().collect(),
            bias: self.bias + other.bias,
        }
    }

    fn minus(&self, other: &Tap<T>) -> Self {
        self.plus(&other.scaled(-T::one()))
    }
}

struct GadgetBuilder<T> {
    input_dim: usize,
    closed: Vec<Vec<GadgetNeuron<T>>>,
    open: Option<Vec<GadgetNeuron<T>>>,
    /// Signals visible to neurons of the open layer.
    frontier: usize,
}

impl<T: Scalar> GadgetBuilder<T> {
    fn new(input_dim: usize) -> Self {
        GadgetBuilder {
            input_dim,
            closed: Vec::new(),
            open: None,
            frontier: input_dim,
        }
    }

    fn open_layer(&mut self) {
        assert!(self.open.is_none(), "layer already open");
        self.open = Some(Vec::new());
    }

    fn close_layer(&mut self) {
        let layer = self.open.take().expect("no layer open");
        self.frontier += layer.len();
        self.closed.push(layer);
    }

    fn neuron_from_tap(&self, tap: &Tap<T>) -> GadgetNeuron<T> {
        let mut weights = vec![T::zero(); self.frontier];
        for &(i, w) in &tap.terms {
            assert!(i < self.frontier, "tap references an unbuilt signal");
            weights[i] += w;
        }
        GadgetNeuron {
            weights,
            bias: tap.bias,
            activation: GadgetActivation::Squared,
        }
    }

    /// Adds the neuron `(tap)^2` to the open layer.
    fn square(&mut self, tap: &Tap<T>) -> Tap<T> {
        let neuron = self.neuron_from_tap(tap);
        let layer = self.open.as_mut().expect("no layer open");
        let index = self.frontier + layer.len();
        layer.push(neuron);
        Tap {
            terms: vec![(index, T::one())],
            bias: T::zero(),
        }
    }

    /// Carries a value to the next layer with the identity pair
    /// `((t+1)/2)^2 - ((t-1)/2)^2 = t`. Two squared neurons.
    fn carry(&mut self, tap: &Tap<T>) -> Tap<T> {
        let half = tap.scaled(T::of(0.5));
        let plus = self.square(&half.offset(T::of(0.5)));
        let minus = self.square(&half.offset(T::of(-0.5)));
        plus.minus(&minus)
    }

    /// Product of two values via `((a+b)/2)^2 - ((a-b)/2)^2 = a*b`. Two
    /// squared neurons.
    fn mul(&mut self, a: &Tap<T>, b: &Tap<T>) -> Tap<T> {
        let sum = a.plus(b).scaled(T::of(0.5));
        let diff = a.minus(b).scaled(T::of(0.5));
        let plus = self.square(&sum);
        let minus = self.square(&diff);
        plus.minus(&minus)
    }

    fn finish(mut self, outputs: Vec<Tap<T>>) -> GadgetNet<T> {
        assert!(self.open.is_none(), "close the last layer before finishing");
        let output = outputs
            .iter()
            .map(|tap| {
                let mut n = self.neuron_from_tap(tap);
                n.activation = GadgetActivation::Identity;
                n
            })
            .collect();
        let hidden = std::mem::take(&mut self.closed);
        GadgetNet {
            input_dim: self.input_dim,
            hidden,
            output,
        }
    }
}

/// Gadget computing `x -> x` exactly with two squared neurons.
pub fn identity_gadget<T: Scalar>() -> GadgetNet<T> {
    let mut b = GadgetBuilder::new(1);
    let x = Tap::input(0);
    b.open_layer();
    let carried = b.carry(&x);
    b.close_layer();
    b.finish(vec![carried])
}

/// Gadget computing `(x1, x2) -> x1 * x2` exactly with two squared neurons.
pub fn product_gadget<T: Scalar>() -> GadgetNet<T> {
    let mut b = GadgetBuilder::new(2);
    let x1 = Tap::input(0);
    let x2 = Tap::input(1);
    b.open_layer();
    let prod = b.mul(&x1, &x2);
    b.close_layer();
    b.finish(vec![prod])
}

fn floor_log2(t: u32) -> usize {
    (31 - t.leading_zeros()) as usize
}

/// Builds, on a shared layer grid, the values `x^k` for every requested
/// exponent: a repeated-squaring chain materializes `x^(2^j)`, identity pairs
/// carry needed powers to the chain's final layer, and pairwise products
/// (left-to-right, odd leftover carried) reduce each exponent's factor list.
/// Returns one tap per requested exponent, all aligned on the final layer.
fn monomial_taps<T: Scalar>(
    b: &mut GadgetBuilder<T>,
    x: &Tap<T>,
    exponents: &[u32],
) -> Vec<Tap<T>> {
    monomial_taps_multi(b, std::slice::from_ref(x), exponents)
        .pop()
        .unwrap()
}

/// Gadget computing `x -> x^t` exactly.
pub fn power_gadget<T: Scalar>(t: u32) -> Result<GadgetNet<T>> {
    if t == 0 {
        return Err(Error::config("power gadget requires T >= 1"));
    }
    let mut b = GadgetBuilder::new(1);
    let x = Tap::input(0);
    let taps = monomial_taps(&mut b, &x, &[t]);
    Ok(b.finish(taps))
}

/// Gadget computing `x -> sum_k a_k x^k` (k starting at 1) exactly, combining
/// the power constructions on a shared layer grid.
pub fn polynomial_gadget<T: Scalar>(coeffs: &[T]) -> Result<GadgetNet<T>> {
    if coeffs.iter().all(|&a| a == T::zero()) {
        return Err(Error::config(
            "polynomial gadget requires at least one nonzero coefficient",
        ));
    }
    let exponents: Vec<u32> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, a)| **a != T::zero())
        .map(|(i, _)| (i + 1) as u32)
        .collect();
    let mut b = GadgetBuilder::new(1);
    let x = Tap::input(0);
    let taps = monomial_taps(&mut b, &x, &exponents);
    let mut out = Tap {
        terms: vec![],
        bias: T::zero(),
    };
    for (&k, tap) in exponents.iter().zip(&taps) {
        out = out.plus(&tap.scaled(coeffs[(k - 1) as usize]));
    }
    Ok(b.finish(vec![out]))
}

/// Single-output network computing
/// `out_bias + sum_i out_weights[i] * (unit_constant + sum_k coeffs[k-1] * (w_i^T x + b_i)^k)`:
/// the same polynomial applied to every unit's affine pre-activation, built on
/// one shared layer grid (every unit advances through identical layer
/// schedules, so no cross-unit padding is needed). Used to replace sigmoid
/// units by their polynomial approximant.
pub(crate) fn affine_polynomial_combination<T: Scalar>(
    input_dim: usize,
    units: &[(Vec<T>, T)],
    coeffs: &[T],
    unit_constant: T,
    out_weights: &[T],
    out_bias: T,
) -> Result<GadgetNet<T>> {
    if units.is_empty() || units.len() != out_weights.len() {
        return Err(Error::config(
            "need one output weight per unit and at least one unit",
        ));
    }
    let weight_sum = out_weights.iter().fold(T::zero(), |acc, &w| acc + w);
    let constant = out_bias + unit_constant * weight_sum;
    let exponents: Vec<u32> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, a)| **a != T::zero())
        .map(|(i, _)| (i + 1) as u32)
        .collect();
    let mut b = GadgetBuilder::new(input_dim);
    if exponents.is_empty() {
        // Constant polynomial: no hidden layers at all.
        return Ok(b.finish(vec![Tap {
            terms: vec![],
            bias: constant,
        }]));
    }
    let taps: Vec<Tap<T>> = units
        .iter()
        .map(|(w, bias)| Tap::affine(w, *bias))
        .collect();
    let per_unit = monomial_taps_multi(&mut b, &taps, &exponents);
    let mut out = Tap {
        terms: vec![],
        bias: constant,
    };
    for (unit_taps, &c) in per_unit.iter().zip(out_weights) {
        for (&k, tap) in exponents.iter().zip(unit_taps) {
            out = out.plus(&tap.scaled(c * coeffs[(k - 1) as usize]));
        }
    }
    Ok(b.finish(vec![out]))
}

/// `monomial_taps` for several base values advancing in lockstep; returns one
/// tap list per base, all aligned on the final layer.
fn monomial_taps_multi<T: Scalar>(
    b: &mut GadgetBuilder<T>,
    bases: &[Tap<T>],
    exponents: &[u32],
) -> Vec<Vec<Tap<T>>> {
    debug_assert!(!bases.is_empty() && !exponents.is_empty());
    debug_assert!(exponents.iter().all(|&k| k >= 1));
    let kmax = floor_log2(*exponents.iter().max().unwrap());
    let needed_bits: Vec<usize> = (0..=kmax)
        .filter(|&j| exponents.iter().any(|&k| k >> j & 1 == 1))
        .collect();

    let mut bit_taps: Vec<BTreeMap<usize, Tap<T>>> = vec![BTreeMap::new(); bases.len()];
    let mut chains: Vec<Tap<T>> = bases.to_vec();
    if needed_bits.contains(&0) {
        for (u, chain) in chains.iter().enumerate() {
            bit_taps[u].insert(0, chain.clone());
        }
    }
    for layer in 1..=kmax {
        b.open_layer();
        for u in 0..bases.len() {
            let next = b.square(&chains[u]);
            for tap in bit_taps[u].values_mut() {
                *tap = b.carry(tap);
            }
            chains[u] = next;
        }
        b.close_layer();
        if needed_bits.contains(&layer) {
            for (u, chain) in chains.iter().enumerate() {
                bit_taps[u].insert(layer, chain.clone());
            }
        }
    }

    let mut lists: Vec<Vec<Vec<Tap<T>>>> = (0..bases.len())
        .map(|u| {
            exponents
                .iter()
                .map(|&k| {
                    (0..=kmax)
                        .filter(|&j| k >> j & 1 == 1)
                        .map(|j| bit_taps[u][&j].clone())
                        .collect::<Vec<_>>()
                })
                .collect()
        })
        .collect();
    while lists.iter().flatten().any(|l| l.len() > 1) {
        b.open_layer();
        for unit_lists in &mut lists {
            for list in unit_lists.iter_mut() {
                if list.len() > 1 {
                    let mut next = Vec::with_capacity(list.len().div_ceil(2));
                    for pair in list.chunks(2) {
                        if pair.len() == 2 {
                            next.push(b.mul(&pair[0], &pair[1]));
                        } else {
                            next.push(b.carry(&pair[0]));
                        }
                    }
                    *list = next;
                } else {
                    list[0] = b.carry(&list[0]);
                }
            }
        }
        b.close_layer();
    }
    lists
        .into_iter()
        .map(|unit_lists| {
            unit_lists
                .into_iter()
                .map(|mut l| l.pop().unwrap())
                .collect()
        })
        .collect()
}

/// Expands a polynomial network into an explicit squared-activation network.
///
/// Degree-1 terms fold into the output's input weights, a degree-2 neuron
/// becomes one squared neuron, and a degree-3 neuron becomes four: two for the
/// product of its first two forms, two more (reading the input through a skip
/// connection) for the product with the third. Total squared neurons are
/// therefore at most `4 * neurons + 1 <= 5 * neurons` including the output.
pub fn expand_to_gadget<T: Scalar>(net: &super::PolyNet<T>) -> GadgetNet<T> {
    let d = net.dim();
    let mut b = GadgetBuilder::new(d);
    let mut out = Tap::affine(net.direct_term(), net.bias());

    let mut cubic_pending: Vec<(T, Tap<T>, Tap<T>)> = Vec::new();
    let needs_layer1 = net.neurons().iter().any(|n| n.basis.degree() >= 2);
    if needs_layer1 {
        b.open_layer();
        for neuron in net.neurons() {
            let dirs = neuron.basis.directions();
            match neuron.basis.degree() {
                1 => {
                    out = out.plus(&Tap::affine(&dirs[0], T::zero()).scaled(neuron.coefficient));
                }
                2 => {
                    let s = b.square(&Tap::affine(&dirs[0], T::zero()));
                    out = out.plus(&s.scaled(neuron.coefficient));
                }
                3 => {
                    let w = Tap::affine(&dirs[0], T::zero());
                    let u = Tap::affine(&dirs[1], T::zero());
                    let v = Tap::affine(&dirs[2], T::zero());
                    let p = b.mul(&w, &u);
                    cubic_pending.push((neuron.coefficient, p, v));
                }
                _ => unreachable!("basis degree is 1..=3 by construction"),
            }
        }
        b.close_layer();
    } else {
        for neuron in net.neurons() {
            let dirs = neuron.basis.directions();
            out = out.plus(&Tap::affine(&dirs[0], T::zero()).scaled(neuron.coefficient));
        }
    }

    if !cubic_pending.is_empty() {
        b.open_layer();
        for (alpha, p, v) in &cubic_pending {
            let q = b.mul(p, v);
            out = out.plus(&q.scaled(*alpha));
        }
        b.close_layer();
    }
    b.finish(vec![out])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{BasisFunction, PolyNet};

    #[test]
    fn single_squared_neuron() {
        // One hidden neuron with weight e1: x -> x^2.
        let net = GadgetNet {
            input_dim: 1,
            hidden: vec![vec![GadgetNeuron {
                weights: vec![1.0],
                bias: 0.0,
                activation: GadgetActivation::Squared,
            }]],
            output: vec![GadgetNeuron {
                weights: vec![0.0, 1.0],
                bias: 0.0,
                activation: GadgetActivation::Identity,
            }],
        };
        assert_eq!(net.evaluate_scalar(3.0).unwrap(), 9.0);
    }

    #[test]
    fn identity_gadget_is_exact() {
        let g = identity_gadget::<f64>();
        assert_eq!(g.hidden_layer_count(), 1);
        assert_eq!(g.hidden_neuron_count(), 2);
        for &x in &[0.0, 1.0, -2.5, 0.7] {
            assert!((g.evaluate_scalar(x).unwrap() - x).abs() < 1e-12);
        }
    }

    #[test]
    fn product_gadget_is_exact() {
        let g = product_gadget::<f64>();
        assert_eq!(g.hidden_neuron_count(), 2);
        for &(a, b) in &[(0.0, 5.0), (2.0, 3.0), (-1.5, 4.0)] {
            assert!((g.evaluate(&[a, b]).unwrap()[0] - a * b).abs() < 1e-12);
        }
    }

    #[test]
    fn power_gadget_small_cases() {
        assert!((power_gadget::<f64>(1).unwrap().evaluate_scalar(0.3).unwrap() - 0.3).abs() < 1e-15);
        assert!((power_gadget::<f64>(2).unwrap().evaluate_scalar(3.0).unwrap() - 9.0).abs() < 1e-12);
        assert!((power_gadget::<f64>(5).unwrap().evaluate_scalar(2.0).unwrap() - 32.0).abs() < 1e-9);
    }

    #[test]
    fn power_gadget_rejects_zero() {
        assert!(power_gadget::<f64>(0).is_err());
    }

    #[test]
    fn polynomial_gadget_examples() {
        let p = polynomial_gadget(&[1.0f64]).unwrap();
        assert!((p.evaluate_scalar(0.4).unwrap() - 0.4).abs() < 1e-15);

        let p = polynomial_gadget(&[0.0f64, 1.0]).unwrap();
        assert!((p.evaluate_scalar(-3.0).unwrap() - 9.0).abs() < 1e-12);

        // 1*x - 2*x^2 + 0*x^3 + 1*x^4 at 1.5 = 1.5 - 4.5 + 5.0625 = 2.0625.
        let p = polynomial_gadget(&[1.0f64, -2.0, 0.0, 1.0]).unwrap();
        assert!((p.evaluate_scalar(1.5).unwrap() - 2.0625).abs() < 1e-9);
    }

    #[test]
    fn polynomial_gadget_rejects_all_zero() {
        assert!(polynomial_gadget::<f64>(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn expansion_matches_polynet() {
        let mut net = PolyNet::affine(0.3f64, vec![0.2, -0.1, 0.4]);
        net.push_neuron(0.9, BasisFunction::linear(vec![1.0, 2.0, -1.0]).unwrap())
            .unwrap();
        net.push_neuron(-1.2, BasisFunction::square(vec![0.5, 0.5, 1.0]).unwrap())
            .unwrap();
        net.push_neuron(
            0.7,
            BasisFunction::cubic(
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![1.0, 1.0, 1.0],
            )
            .unwrap(),
        )
        .unwrap();
        let gadget = expand_to_gadget(&net);
        // 1 squared for the degree-2 neuron, 4 for the degree-3 neuron.
        assert_eq!(gadget.hidden_neuron_count(), 5);
        assert!(gadget.hidden_neuron_count() < 5 * net.neurons().len());
        for x in [
            [0.0, 0.0, 0.0],
            [1.0, -1.0, 0.5],
            [0.3, 0.9, -0.7],
            [2.0, 3.0, 4.0],
        ] {
            let want = net.evaluate(&x).unwrap();
            let got = gadget.evaluate(&x).unwrap()[0];
            assert!((want - got).abs() < 1e-9 * want.abs().max(1.0));
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let g = product_gadget::<f64>();
        assert!(g.evaluate(&[1.0]).is_err());
    }
}
