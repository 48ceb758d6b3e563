//! Polynomial approximation of the sigmoid and the associated network-size
//! bound formulas.
//!
//! The driving fact: on `|x| <= 4L` the sigmoid admits a degree-`T`
//! polynomial approximation with
//! `T = log2(2L^4 + exp(7L ln(4L/eps + 3))) + 2 log2(8/eps)`, which is what
//! lets sigmoid networks be traded for squared-activation networks at a
//! `log log(1/eps)` depth overhead. The formulas manipulate powers of two, so
//! every `log` here is base 2; `exp`/`ln` stay natural, as written.
//!
//! The fit itself is Chebyshev interpolation of `x -> sigmoid(4Lx)` on
//! `[-1, 1]`, converted to monomial coefficients with compensated
//! accumulation, then trimmed to the smallest degree whose sup-error on the
//! 10^4-point grid still passes — the grid check is the arbiter, not the
//! analytic degree bound, which is loose by orders of magnitude. Everything
//! here works in `f64`: the contracts are precision statements about IEEE
//! doubles.

mod compress;

pub use compress::{compress_sigmoid_net, CompressionReport, SigmoidNet, SigmoidUnit};

use serde::{Deserialize, Serialize};

use crate::accum::CompensatedSum;
use crate::{Error, Result};

/// Grid size for the sup-error checks.
pub const GRID_POINTS: usize = 10_000;

/// Interpolation degree cap. Chebyshev coefficients of `sigmoid(4Lx)` decay
/// geometrically and sit below f64 epsilon well before degree 128, while the
/// monomial conversion becomes unevaluable far above it; capping is inert for
/// the function being fitted.
const MAX_INTERP_DEGREE: usize = 128;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn check_domain(epsilon: f64, l_bound: f64) -> Result<()> {
    if !(0.0 < epsilon && epsilon < 1.0) {
        return Err(Error::config("epsilon must lie in (0, 1)"));
    }
    if l_bound < 3.0 {
        return Err(Error::config("L must be at least 3"));
    }
    Ok(())
}

/// Degree bound `T = ceil(log2(2L^4 + exp(7L ln(4L/eps + 3))) + 2 log2(8/eps))`
/// for approximating the sigmoid to `eps` on `|x| <= 4L`. Evaluated in log
/// space so large `L` cannot overflow.
pub fn lemma_degree(epsilon: f64, l_bound: f64) -> Result<u64> {
    check_domain(epsilon, l_bound)?;
    let l = l_bound;
    let a = (2.0 * l.powi(4)).ln();
    let b = 7.0 * l * (4.0 * l / epsilon + 3.0).ln();
    let log2_inner = log_add_exp(a, b) / std::f64::consts::LN_2;
    let t = log2_inner + 2.0 * (8.0 / epsilon).log2();
    if !t.is_finite() || t >= u64::MAX as f64 {
        return Err(Error::numerical("degree bound overflows"));
    }
    Ok(t.ceil() as u64)
}

/// Polynomial `p(x) = sum_j a_j x^j` with
/// `sup_{|x| <= 4L} |p(x) - sigmoid(x)| <= epsilon`, verified on the
/// 10^4-point grid at construction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SigmoidApprox {
    #[serde(rename = "L")]
    pub l_bound: f64,
    pub epsilon: f64,
    /// Degree actually used after trimming.
    pub degree: usize,
    /// Monomial coefficients `a_0..a_degree` of `p` in `x`.
    pub coefficients: Vec<f64>,
}

impl SigmoidApprox {
    /// Domain half-width `4L`.
    pub fn half_width(&self) -> f64 {
        4.0 * self.l_bound
    }

    /// Horner evaluation of `p(x)`.
    pub fn evaluate(&self, x: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, &a| acc * x + a)
    }

    /// Sup error against the sigmoid over the uniform grid on `|x| <= 4L`.
    pub fn grid_sup_error(&self) -> f64 {
        let hw = self.half_width();
        let mut sup = 0.0f64;
        for k in 0..GRID_POINTS {
            let x = -hw + 2.0 * hw * (k as f64) / (GRID_POINTS - 1) as f64;
            sup = sup.max((self.evaluate(x) - sigmoid(x)).abs());
        }
        sup
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Chebyshev coefficients `c_0..c_n` of `f` on `[-1, 1]` from the
/// Chebyshev-Gauss nodes, normalized so the interpolant is `sum_j c_j T_j`.
fn chebyshev_coeffs(f: impl Fn(f64) -> f64, degree: usize) -> Vec<f64> {
    let n = degree + 1;
    let samples: Vec<f64> = (0..n)
        .map(|k| f((std::f64::consts::PI * (k as f64 + 0.5) / n as f64).cos()))
        .collect();
    (0..n)
        .map(|j| {
            let mut acc = CompensatedSum::new();
            for (k, &fk) in samples.iter().enumerate() {
                acc.add(fk * (std::f64::consts::PI * j as f64 * (k as f64 + 0.5) / n as f64).cos());
            }
            let scale = if j == 0 { 1.0 } else { 2.0 } / n as f64;
            acc.value() * scale
        })
        .collect()
}

/// Converts `sum_j c_j T_j(t)` into monomial coefficients of `t`, with
/// compensated accumulation: the Chebyshev-to-monomial change of basis has
/// coefficients up to `2^degree` and cancels heavily.
fn chebyshev_to_monomial(cheb: &[f64]) -> Vec<f64> {
    let n = cheb.len();
    let mut acc: Vec<CompensatedSum<f64>> = vec![CompensatedSum::new(); n];
    // Rolling monomial representations of T_{j-1}, T_j.
    let mut t_prev = vec![0.0; n];
    let mut t_cur = vec![0.0; n];
    t_prev[0] = 1.0;
    if n > 1 {
        t_cur[1] = 1.0;
    }
    acc[0].add(cheb[0]);
    if n > 1 {
        acc[1].add(cheb[1]);
    }
    for j in 2..n {
        // T_j = 2 t T_{j-1} - T_{j-2}
        let mut t_next = vec![0.0; n];
        for i in 0..j {
            t_next[i + 1] += 2.0 * t_cur[i];
        }
        for i in 0..n {
            t_next[i] -= t_prev[i];
        }
        for (a, &coef) in acc.iter_mut().zip(&t_next) {
            if coef != 0.0 {
                a.add(cheb[j] * coef);
            }
        }
        t_prev = t_cur;
        t_cur = t_next;
    }
    acc.into_iter().map(|a| a.value()).collect()
}

/// Fits a polynomial sigmoid approximation: Chebyshev interpolation of
/// `x -> sigmoid(4Lx)` at degree `max(lemma_degree, override)` (capped at
/// [`MAX_INTERP_DEGREE`]), rescaled to `|x| <= 4L`, trimmed to the smallest
/// degree whose grid sup-error stays within `epsilon`.
pub fn fit_sigmoid_poly(
    epsilon: f64,
    l_bound: f64,
    degree_override: Option<usize>,
) -> Result<SigmoidApprox> {
    check_domain(epsilon, l_bound)?;
    let requested = lemma_degree(epsilon, l_bound)?.max(degree_override.unwrap_or(0) as u64);
    let n_interp = (requested as usize).min(MAX_INTERP_DEGREE);
    let hw = 4.0 * l_bound;
    let cheb = chebyshev_coeffs(|t| sigmoid(hw * t), n_interp);

    let mut worst = f64::INFINITY;
    for degree in 0..=n_interp {
        let beta = chebyshev_to_monomial(&cheb[..=degree]);
        // p(x) = p0(x / 4L).
        let mut coeffs = beta;
        let mut scale = 1.0;
        for a in coeffs.iter_mut() {
            *a *= scale;
            scale /= hw;
        }
        let candidate = SigmoidApprox {
            l_bound,
            epsilon,
            degree,
            coefficients: coeffs,
        };
        let err = candidate.grid_sup_error();
        worst = worst.min(err);
        if err <= epsilon {
            return Ok(candidate);
        }
    }
    Err(Error::numerical(format!(
        "no degree up to {n_interp} meets eps={epsilon} at L={l_bound} \
         (best grid sup-error {worst:.3e}); the monomial representation is \
         numerically out of reach for these parameters"
    )))
}

/// Evaluated size bounds for approximating a depth-`t` sigmoid network.
///
/// `b_t` sits in `~O(log L * log(L^t / eps))` and `b_n` in
/// `~O(L * log(L^t / eps))`; the fields hold the exact evaluated closed forms
/// those classes summarize.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BoundReport {
    pub t: u32,
    #[serde(rename = "L")]
    pub l_bound: f64,
    pub epsilon: f64,
    /// Per-unit polynomial degree `T` with the `(4L)^t` error inflation.
    pub degree: u64,
    /// Depth multiplier `B_t = ceil(1 + log2 T + log2 log2 T)`.
    pub b_t: u64,
    /// Size multiplier `B_n = ceil(1 + 2T(2 log2 T + log2 T log2 log2 T))`.
    pub b_n: u64,
}

/// Evaluates `T`, `B_t`, `B_n` for given `(t, L, epsilon)`.
///
/// `T` uses the inflated target `eps / (4L)^(t-1)` that the layer-by-layer
/// error argument needs:
/// `T = log2(2L^4 + exp(7L ln((4L)^t/eps + 3))) + 2 log2(8 (4L)^(t-1)/eps)`.
pub fn theorem4_bounds(t: u32, l_bound: f64, epsilon: f64) -> Result<BoundReport> {
    check_domain(epsilon, l_bound)?;
    if t < 1 {
        return Err(Error::config("t must be at least 1"));
    }
    let l = l_bound;
    let log_4l = (4.0 * l).ln();
    let a = (2.0 * l.powi(4)).ln();
    // ln((4L)^t / eps + 3), stable for large t.
    let b_exp = log_add_exp(t as f64 * log_4l - epsilon.ln(), 3.0f64.ln());
    let b = 7.0 * l * b_exp;
    let log2_inner = log_add_exp(a, b) / std::f64::consts::LN_2;
    let tail = 2.0 * (3.0 + (t as f64 - 1.0) * (4.0 * l).log2() - epsilon.log2());
    let t_real = log2_inner + tail;
    if !t_real.is_finite() || t_real >= u64::MAX as f64 {
        return Err(Error::numerical("degree bound overflows"));
    }
    let degree = t_real.ceil() as u64;
    let log2_t = (degree as f64).log2();
    let log2_log2_t = log2_t.log2();
    let b_t = (1.0 + log2_t + log2_log2_t).ceil() as u64;
    let b_n = (1.0 + 2.0 * degree as f64 * (2.0 * log2_t + log2_t * log2_log2_t)).ceil() as u64;
    Ok(BoundReport {
        t,
        l_bound,
        epsilon,
        degree,
        b_t,
        b_n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values computed with 60-digit arithmetic from the closed
    // forms before this module was written.
    #[test]
    fn lemma_degree_reference_values() {
        assert_eq!(lemma_degree(0.5, 3.0).unwrap(), 108);
        assert_eq!(lemma_degree(0.2, 3.0).unwrap(), 137);
        assert_eq!(lemma_degree(0.1, 3.0).unwrap(), 159);
    }

    #[test]
    fn lemma_degree_monotone_in_eps() {
        let mut prev = 0;
        for eps in [0.9, 0.5, 0.25, 0.1, 0.05, 0.01] {
            let t = lemma_degree(eps, 3.0).unwrap();
            assert!(t >= prev, "T({eps}) = {t} < {prev}");
            prev = t;
        }
        assert!(lemma_degree(0.9, 3.0).unwrap() <= lemma_degree(0.1, 3.0).unwrap());
    }

    #[test]
    fn lemma_degree_domain_checks() {
        assert!(lemma_degree(0.0, 3.0).is_err());
        assert!(lemma_degree(1.0, 3.0).is_err());
        assert!(lemma_degree(0.5, 2.0).is_err());
    }

    #[test]
    fn theorem4_reference_values() {
        let r = theorem4_bounds(2, 3.0, 0.5).unwrap();
        assert_eq!(r.degree, 188);
        assert_eq!(r.b_t, 12);
        assert_eq!(r.b_n, 13969);
        // t = 1 reduces to the plain lemma degree.
        let r1 = theorem4_bounds(1, 3.0, 0.5).unwrap();
        assert_eq!(r1.degree, 108);
        assert_eq!(r1.b_t, 11);
        assert_eq!(r1.b_n, 6941);
    }

    #[test]
    fn theorem4_monotone_in_eps() {
        let coarse = theorem4_bounds(2, 3.0, 0.5).unwrap();
        let fine = theorem4_bounds(2, 3.0, 0.05).unwrap();
        assert!(fine.degree >= coarse.degree);
        assert!(fine.b_n >= coarse.b_n);
    }

    #[test]
    fn fit_meets_grid_invariant() {
        for eps in [0.5, 0.2, 0.1] {
            let approx = fit_sigmoid_poly(eps, 3.0, None).unwrap();
            let err = approx.grid_sup_error();
            assert!(err <= eps, "eps={eps}: grid error {err}");
            assert!((approx.evaluate(0.0) - 0.5).abs() <= eps);
        }
    }

    #[test]
    fn fit_respects_degree_override_direction() {
        // Override below the lemma degree must not loosen anything.
        let a = fit_sigmoid_poly(0.2, 3.0, Some(4)).unwrap();
        assert!(a.grid_sup_error() <= 0.2);
    }

    #[test]
    fn sigmoid_symmetry_identity() {
        // sigma(x) + sigma(-x) = 1, the identity the oracle leans on.
        for x in [-10.0, -1.0, 0.0, 0.3, 7.0] {
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn serialization_uses_spec_field_names() {
        let approx = fit_sigmoid_poly(0.5, 3.0, None).unwrap();
        let json = approx.to_json().unwrap();
        assert!(json.contains("\"L\""));
        assert!(json.contains("\"epsilon\""));
        assert!(json.contains("\"degree\""));
        assert!(json.contains("\"coefficients\""));
        let back = SigmoidApprox::from_json(&json).unwrap();
        assert_eq!(back.coefficients, approx.coefficients);
    }

    #[test]
    fn chebyshev_machinery_reproduces_a_polynomial() {
        // f(t) = 3t^2 - t + 0.25 is degree 2; the fit should recover it.
        let cheb = chebyshev_coeffs(|t| 3.0 * t * t - t + 0.25, 6);
        let mono = chebyshev_to_monomial(&cheb);
        assert!((mono[0] - 0.25).abs() < 1e-12);
        assert!((mono[1] + 1.0).abs() < 1e-12);
        assert!((mono[2] - 3.0).abs() < 1e-12);
        for c in &mono[3..] {
            assert!(c.abs() < 1e-12);
        }
    }
}
