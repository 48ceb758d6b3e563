//! Smooth convex scalar losses.
//!
//! The convergence guarantees of the greedy trainers are stated for convex,
//! beta-smooth losses; both losses here carry their exact smoothness constant.
//! The squared loss is scaled by 1/2 so that beta = 1, which keeps the
//! `r > 2*beta*k^2/eps` budget arithmetic free of stray constants.

use serde::{Deserialize, Serialize};

use crate::accum;
use crate::data::Dataset;
use crate::net::PolyNet;
use crate::{Error, Result, Scalar};

/// Threshold beyond which the logistic loss switches to its asymptotic
/// linear/zero branches; the switch error is below 1e-15.
const LOGISTIC_CUTOFF: f64 = 35.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    /// `l(p, y) = (p - y)^2 / 2`, beta = 1.
    Squared,
    /// `l(p, y) = ln(1 + exp(-y p))` for labels `y` in `{-1, +1}`, beta = 1/4.
    Logistic,
}

impl Loss {
    pub fn value<T: Scalar>(self, p: T, y: T) -> T {
        match self {
            Loss::Squared => {
                let d = p - y;
                d * d / T::of(2.0)
            }
            Loss::Logistic => {
                let z = y * p;
                let cut = T::of(LOGISTIC_CUTOFF);
                if z > cut {
                    (-z).exp()
                } else if z < -cut {
                    -z + z.exp()
                } else {
                    (-z).exp().ln_1p()
                }
            }
        }
    }

    /// Derivative with respect to the prediction `p`.
    pub fn derivative<T: Scalar>(self, p: T, y: T) -> T {
        match self {
            Loss::Squared => p - y,
            Loss::Logistic => {
                let z = y * p;
                let cut = T::of(LOGISTIC_CUTOFF);
                if z > cut {
                    -y * (-z).exp()
                } else if z < -cut {
                    -y
                } else {
                    -y / (T::one() + z.exp())
                }
            }
        }
    }

    /// Smoothness constant of the derivative.
    pub fn beta(self) -> f64 {
        match self {
            Loss::Squared => 1.0,
            Loss::Logistic => 0.25,
        }
    }
}

impl std::fmt::Display for Loss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Loss::Squared => write!(f, "squared"),
            Loss::Logistic => write!(f, "logistic"),
        }
    }
}

impl std::str::FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" => Ok(Loss::Squared),
            "logistic" => Ok(Loss::Logistic),
            other => Err(Error::config(format!(
                "unknown loss '{other}' (expected 'squared' or 'logistic')"
            ))),
        }
    }
}

/// Mean loss of fixed predictions against labels (compensated sum, so the
/// result is permutation-invariant to ~1e-12).
pub fn mean_loss<T: Scalar>(predictions: &[T], labels: &[T], loss: Loss) -> Result<T> {
    if predictions.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: predictions.len(),
        });
    }
    Ok(accum::mean(
        predictions
            .iter()
            .zip(labels)
            .map(|(&p, &y)| loss.value(p, y)),
    ))
}

/// Empirical risk `(1/m) sum_i l(f(x_i), y_i)`.
pub fn empirical_risk<T: Scalar>(net: &PolyNet<T>, data: &Dataset<T>, loss: Loss) -> Result<T> {
    let preds = net.predict(data)?;
    mean_loss(&preds, data.labels(), loss)
}

/// Per-example derivative vector `l'(f(x_i), y_i)`, the weights consumed by
/// the greedy steps.
pub fn risk_gradient_weights<T: Scalar>(
    net: &PolyNet<T>,
    data: &Dataset<T>,
    loss: Loss,
) -> Result<Vec<T>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let preds = net.predict(data)?;
    Ok(preds
        .iter()
        .zip(data.labels())
        .map(|(&p, &y)| loss.derivative(p, y))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squared_loss_values() {
        assert_eq!(Loss::Squared.value(0.0f64, 2.0), 2.0);
        assert_eq!(Loss::Squared.derivative(3.0f64, 1.0), 2.0);
    }

    #[test]
    fn logistic_at_zero() {
        let v = Loss::Logistic.value(0.0f64, 1.0);
        assert!((v - (2.0f64).ln()).abs() < 1e-15);
        assert!((Loss::Logistic.derivative(0.0f64, 1.0) + 0.5).abs() < 1e-15);
        assert!((Loss::Logistic.derivative(0.0f64, -1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn logistic_extreme_arguments_stay_finite() {
        for &p in &[-1e6f64, -40.0, 40.0, 1e6] {
            for &y in &[-1.0, 1.0] {
                assert!(Loss::Logistic.value(p, y).is_finite());
                assert!(Loss::Logistic.derivative(p, y).is_finite());
            }
        }
        // Linear branch: value ~ -yp for yp << 0.
        let v = Loss::Logistic.value(-100.0f64, 1.0);
        assert!((v - 100.0).abs() < 1e-12);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        use rand::Rng;
        let h = 1e-6f64;
        let mut rng = crate::rng::seeded(3, 0);
        for loss in [Loss::Squared, Loss::Logistic] {
            for _ in 0..1000 {
                let p: f64 = rng.gen_range(-10.0..10.0);
                let y: f64 = match loss {
                    Loss::Squared => rng.gen_range(-5.0..5.0),
                    Loss::Logistic => {
                        if rng.gen() {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                };
                let fd = (loss.value(p + h, y) - loss.value(p - h, y)) / (2.0 * h);
                let an = loss.derivative(p, y);
                assert!(
                    (fd - an).abs() <= 1e-5 * an.abs().max(1.0),
                    "{loss:?} p={p} y={y} fd={fd} an={an}"
                );
            }
        }
    }

    #[test]
    fn risk_is_permutation_invariant() {
        let (data, teacher) = crate::data::gen_teacher_p2k::<f64>(5, 2, 200, 8, 0.2).unwrap();
        let forward = empirical_risk(&teacher, &data, Loss::Squared).unwrap();
        // Same examples, reversed order.
        let rows: Vec<Vec<f64>> = (0..data.len()).rev().map(|i| data.x(i).to_vec()).collect();
        let labels: Vec<f64> = (0..data.len()).rev().map(|i| data.label(i)).collect();
        let reversed = crate::data::Dataset::from_rows(rows, labels).unwrap();
        let backward = empirical_risk(&teacher, &reversed, Loss::Squared).unwrap();
        assert!((forward - backward).abs() <= 1e-12 * forward.max(1.0));
    }

    #[test]
    fn zero_net_risk_examples() {
        let zero = PolyNet::<f64>::zero(2);
        let ds =
            crate::data::Dataset::from_rows(vec![vec![1.0, 2.0]], vec![2.0]).unwrap();
        // half * (0 - 2)^2 = 2.
        assert_eq!(empirical_risk(&zero, &ds, Loss::Squared).unwrap(), 2.0);
        let ds_bin =
            crate::data::Dataset::from_rows(vec![vec![1.0, 2.0], vec![0.5, -1.0]], vec![1.0, -1.0])
                .unwrap();
        let risk = empirical_risk(&zero, &ds_bin, Loss::Logistic).unwrap();
        assert!((risk - (2.0f64).ln()).abs() < 1e-15);
    }

    #[test]
    fn beta_smoothness_on_samples() {
        use rand::Rng;
        let mut rng = crate::rng::seeded(1, 0);
        for loss in [Loss::Squared, Loss::Logistic] {
            let beta = loss.beta();
            for _ in 0..500 {
                let p1: f64 = rng.gen_range(-20.0..20.0);
                let p2: f64 = rng.gen_range(-20.0..20.0);
                let y: f64 = if rng.gen() { 1.0 } else { -1.0 };
                let lhs = (loss.derivative(p1, y) - loss.derivative(p2, y)).abs();
                assert!(lhs <= beta * (p1 - p2).abs() + 1e-12);
            }
        }
    }

    #[test]
    fn convexity_on_samples() {
        use rand::Rng;
        let mut rng = crate::rng::seeded(2, 0);
        for loss in [Loss::Squared, Loss::Logistic] {
            for _ in 0..500 {
                let p1: f64 = rng.gen_range(-10.0..10.0);
                let p2: f64 = rng.gen_range(-10.0..10.0);
                let y: f64 = if rng.gen() { 1.0 } else { -1.0 };
                let lam: f64 = rng.gen();
                let mid = loss.value(lam * p1 + (1.0 - lam) * p2, y);
                let chord = lam * loss.value(p1, y) + (1.0 - lam) * loss.value(p2, y);
                assert!(mid <= chord + 1e-12);
            }
        }
    }

    #[test]
    fn mean_loss_rejects_empty() {
        assert!(matches!(
            mean_loss::<f64>(&[], &[], Loss::Squared),
            Err(Error::EmptyDataset)
        ));
    }
}
