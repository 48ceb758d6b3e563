//! Greedy training of depth-2 and depth-3 polynomial networks.
//!
//! A polynomial network is a feed-forward network whose hidden activation is
//! `z -> z^2`, so the whole network computes a polynomial of its input. This
//! crate trains such networks with GECO, a forward greedy procedure: each step
//! selects one rank-1 basis function `x -> prod_j (w_j^T x)` that minimizes a
//! first-order approximation of the empirical risk (an eigenvalue problem for
//! degree 2, a randomized tensor-maximization problem for degree 3) and then
//! re-fits all output-layer weights by convex minimization.
//!
//! Alongside the trainers the crate ships the supporting constructions used to
//! study these networks:
//!
//! * [`net`] — network representation, evaluation, and the exact gadget
//!   networks (identity / product / power / polynomial) built from squared
//!   activations.
//! * [`linalg`] — matrix-free power iteration for the dominant eigenpair and
//!   the top singular pair, plus small dense support routines.
//! * [`loss`] — smooth convex losses with derivatives and smoothness constants.
//! * [`geco2`], [`geco3`] — the depth-2 and depth-3 trainers.
//! * [`baseline`] — SGD backprop baselines, the explicit linearization oracle,
//!   and the over-specification experiments.
//! * [`approx`] — Chebyshev polynomial approximation of the sigmoid and the
//!   associated size-bound calculators.
//! * [`data`] — CSV ingestion, synthetic teacher generators, splits.
//!
//! Numeric kernels are generic over the scalar type through [`Scalar`];
//! concrete `f64` (and `f32`) aliases live at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

pub mod accum;
pub mod approx;
pub mod baseline;
pub mod data;
pub mod error;
mod fit;
pub mod geco2;
pub mod geco3;
pub mod linalg;
pub mod loss;
pub mod net;
pub mod rng;

pub use error::{Error, Result};

/// Floating-point scalar for all numeric kernels: `f32` or `f64`.
pub trait Scalar:
    Float + NumAssign + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant into the scalar type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 constant converts to Scalar")
    }

    /// Widens the scalar to `f64` for reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub type BasisFunction64 = net::BasisFunction<f64>;
pub type PolyNet64 = net::PolyNet<f64>;
pub type GadgetNet64 = net::GadgetNet<f64>;
pub type Dataset64 = data::Dataset<f64>;
pub type MlpNet64 = baseline::MlpNet<f64>;

pub type BasisFunction32 = net::BasisFunction<f32>;
pub type PolyNet32 = net::PolyNet<f32>;
pub type Dataset32 = data::Dataset<f32>;
