//! Polynomial networks and their basis functions.
//!
//! A hidden neuron is a product of up to three unit-norm linear forms,
//! `g(x) = prod_{j<=degree} (w_j^T x)`; the network is
//! `f(x) = b + w0^T x + sum_i alpha_i g_i(x)`. The depth-2 class constrains
//! every basis function to degree 2 (a squared linear form); the depth-3 class
//! draws from degrees 1..=3.

pub(crate) mod gadget;

pub use gadget::{
    expand_to_gadget, identity_gadget, polynomial_gadget, power_gadget, product_gadget,
    GadgetActivation, GadgetNet, GadgetNeuron,
};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::accum::CompensatedSum;
use crate::data::Dataset;
use crate::linalg::{dot, norm2};
use crate::{Error, Result, Scalar};

/// Tolerance on the unit-norm invariant of basis directions.
pub const DIRECTION_NORM_TOL: f64 = 1e-9;

/// One hidden neuron: a product of `degree` (1..=3) unit-norm linear forms.
/// For degree 2 the two stored directions coincide.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisFunction<T> {
    directions: Vec<Vec<T>>,
}

impl<T: Scalar> BasisFunction<T> {
    /// `x -> w^T x`, normalizing `w`.
    pub fn linear(w: Vec<T>) -> Result<Self> {
        Self::from_unnormalized(vec![w])
    }

    /// `x -> (w^T x)^2`, normalizing `w`.
    pub fn square(w: Vec<T>) -> Result<Self> {
        let u = normalized(w)?;
        Ok(BasisFunction {
            directions: vec![u.clone(), u],
        })
    }

    /// `x -> (w^T x)(u^T x)(v^T x)`, normalizing each direction.
    pub fn cubic(w: Vec<T>, u: Vec<T>, v: Vec<T>) -> Result<Self> {
        Self::from_unnormalized(vec![w, u, v])
    }

    fn from_unnormalized(dirs: Vec<Vec<T>>) -> Result<Self> {
        let normalized: Result<Vec<Vec<T>>> = dirs.into_iter().map(normalized).collect();
        Self::from_directions(normalized?)
    }

    /// Builds from already-normalized directions; rejects degree outside
    /// 1..=3, inconsistent dimensions, and non-unit norms.
    pub fn from_directions(directions: Vec<Vec<T>>) -> Result<Self> {
        if directions.is_empty() || directions.len() > 3 {
            return Err(Error::InvalidModel(format!(
                "basis function degree must be 1..=3, got {}",
                directions.len()
            )));
        }
        let d = directions[0].len();
        if d == 0 {
            return Err(Error::InvalidModel("empty direction vector".into()));
        }
        for w in &directions {
            if w.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: w.len(),
                });
            }
            if w.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidModel("non-finite direction entry".into()));
            }
            let n = norm2(w).as_f64();
            if (n - 1.0).abs() > DIRECTION_NORM_TOL {
                return Err(Error::InvalidModel(format!(
                    "direction norm {n} deviates from 1 by more than {DIRECTION_NORM_TOL}"
                )));
            }
        }
        Ok(BasisFunction { directions })
    }

    pub fn degree(&self) -> usize {
        self.directions.len()
    }

    pub fn dim(&self) -> usize {
        self.directions[0].len()
    }

    pub fn directions(&self) -> &[Vec<T>] {
        &self.directions
    }

    /// Product of the `degree` inner products. The caller guarantees the
    /// dimension (checked by `PolyNet::evaluate`).
    pub fn evaluate(&self, x: &[T]) -> T {
        debug_assert_eq!(x.len(), self.dim());
        self.directions
            .iter()
            .fold(T::one(), |acc, w| acc * dot(w, x))
    }
}

fn normalized<T: Scalar>(mut w: Vec<T>) -> Result<Vec<T>> {
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidModel("non-finite direction entry".into()));
    }
    let n = norm2(&w);
    if n == T::zero() {
        return Err(Error::InvalidModel(
            "cannot normalize a zero direction".into(),
        ));
    }
    for x in &mut w {
        *x /= n;
    }
    Ok(w)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Neuron<T> {
    pub coefficient: T,
    pub basis: BasisFunction<T>,
}

/// `f(x) = bias + direct^T x + sum_i coefficient_i * basis_i(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyNet<T> {
    dim: usize,
    bias: T,
    direct: Vec<T>,
    neurons: Vec<Neuron<T>>,
}

impl<T: Scalar> PolyNet<T> {
    pub fn zero(dim: usize) -> Self {
        PolyNet {
            dim,
            bias: T::zero(),
            direct: vec![T::zero(); dim],
            neurons: Vec::new(),
        }
    }

    pub fn affine(bias: T, direct: Vec<T>) -> Self {
        PolyNet {
            dim: direct.len(),
            bias,
            direct,
            neurons: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bias(&self) -> T {
        self.bias
    }

    pub fn direct_term(&self) -> &[T] {
        &self.direct
    }

    pub fn neurons(&self) -> &[Neuron<T>] {
        &self.neurons
    }

    pub fn set_affine(&mut self, bias: T, direct: Vec<T>) -> Result<()> {
        if direct.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: direct.len(),
            });
        }
        self.bias = bias;
        self.direct = direct;
        Ok(())
    }

    pub fn push_neuron(&mut self, coefficient: T, basis: BasisFunction<T>) -> Result<()> {
        if basis.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: basis.dim(),
            });
        }
        self.neurons.push(Neuron { coefficient, basis });
        Ok(())
    }

    pub fn set_coefficients(&mut self, coeffs: &[T]) -> Result<()> {
        if coeffs.len() != self.neurons.len() {
            return Err(Error::DimensionMismatch {
                expected: self.neurons.len(),
                got: coeffs.len(),
            });
        }
        for (n, &c) in self.neurons.iter_mut().zip(coeffs) {
            n.coefficient = c;
        }
        Ok(())
    }

    /// Evaluates the defining sum with compensated accumulation, so the result
    /// is independent of neuron order up to ~1e-12 per term.
    pub fn evaluate(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut acc = CompensatedSum::new();
        acc.add(self.bias);
        acc.add(dot(&self.direct, x));
        for n in &self.neurons {
            acc.add(n.coefficient * n.basis.evaluate(x));
        }
        Ok(acc.value())
    }

    pub fn predict(&self, data: &Dataset<T>) -> Result<Vec<T>> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        (0..data.len()).map(|i| self.evaluate(data.x(i))).collect()
    }

    /// Largest basis degree present (0 for a purely affine network).
    pub fn max_degree(&self) -> usize {
        self.neurons.iter().map(|n| n.basis.degree()).max().unwrap_or(0)
    }

    /// Membership test for the constrained depth-2 comparator class:
    /// every basis has degree 2 and |alpha_i| <= 1.
    pub fn satisfies_p2k(&self) -> bool {
        self.neurons
            .iter()
            .all(|n| n.basis.degree() == 2 && n.coefficient.abs() <= T::one())
    }
}

#[derive(Serialize, Deserialize)]
struct NeuronDoc<T> {
    alpha: T,
    degree: usize,
    directions: Vec<Vec<T>>,
}

#[derive(Serialize, Deserialize)]
struct PolyNetDoc<T> {
    d: usize,
    bias: T,
    direct_term: Vec<T>,
    neurons: Vec<NeuronDoc<T>>,
}

impl<T: Scalar + Serialize> PolyNet<T> {
    /// Serializes to the model document
    /// `{d, bias, direct_term, neurons:[{alpha, degree, directions}]}`.
    pub fn to_json(&self) -> Result<String> {
        let doc = PolyNetDoc {
            d: self.dim,
            bias: self.bias,
            direct_term: self.direct.clone(),
            neurons: self
                .neurons
                .iter()
                .map(|n| NeuronDoc {
                    alpha: n.coefficient,
                    degree: n.basis.degree(),
                    directions: n.basis.directions().to_vec(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

impl<T: Scalar + DeserializeOwned> PolyNet<T> {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PolyNetDoc<T> = serde_json::from_str(text)?;
        if doc.direct_term.len() != doc.d {
            return Err(Error::InvalidModel(format!(
                "direct_term has length {} but d = {}",
                doc.direct_term.len(),
                doc.d
            )));
        }
        let mut net = PolyNet::affine(doc.bias, doc.direct_term);
        for n in doc.neurons {
            if n.directions.len() != n.degree {
                return Err(Error::InvalidModel(format!(
                    "neuron declares degree {} but stores {} directions",
                    n.degree,
                    n.directions.len()
                )));
            }
            net.push_neuron(n.alpha, BasisFunction::from_directions(n.directions)?)?;
        }
        Ok(net)
    }
}
