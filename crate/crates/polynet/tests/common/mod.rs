//! Shared helpers for the integration suites: independent reference routes
//! (symbolic polynomial expansion, dense eigen/singular references) that the
//! iterative implementations are checked against.

#![allow(dead_code)]

use std::collections::BTreeMap;

use polynet::linalg::dense::{jacobi_sym_eigen, singular_values, Mat};
use polynet::linalg::LinearOperator;
use polynet::net::PolyNet;
use polynet::rng;

/// Expands a polynomial network into its monomial coefficient map
/// (sorted variable indices with repetition -> coefficient). Independent of
/// `PolyNet::evaluate`: it multiplies out every neuron symbolically.
pub fn expand_to_monomials(net: &PolyNet<f64>) -> BTreeMap<Vec<u16>, f64> {
    let mut map: BTreeMap<Vec<u16>, f64> = BTreeMap::new();
    let mut add = |mono: Vec<u16>, coeff: f64| {
        *map.entry(mono).or_insert(0.0) += coeff;
    };
    add(vec![], net.bias());
    for (j, &w) in net.direct_term().iter().enumerate() {
        if w != 0.0 {
            add(vec![j as u16], w);
        }
    }
    for neuron in net.neurons() {
        let alpha = neuron.coefficient;
        let dirs = neuron.basis.directions();
        let d = net.dim();
        match neuron.basis.degree() {
            1 => {
                for a in 0..d {
                    add(vec![a as u16], alpha * dirs[0][a]);
                }
            }
            2 => {
                for a in 0..d {
                    for b in 0..d {
                        let mut mono = vec![a as u16, b as u16];
                        mono.sort_unstable();
                        add(mono, alpha * dirs[0][a] * dirs[1][b]);
                    }
                }
            }
            3 => {
                for a in 0..d {
                    for b in 0..d {
                        for c in 0..d {
                            let mut mono = vec![a as u16, b as u16, c as u16];
                            mono.sort_unstable();
                            add(mono, alpha * dirs[0][a] * dirs[1][b] * dirs[2][c]);
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
    }
    map
}

/// Evaluates a monomial coefficient map at `x` (plain summation; the oracle
/// route).
pub fn eval_monomials(map: &BTreeMap<Vec<u16>, f64>, x: &[f64]) -> f64 {
    map.iter()
        .map(|(mono, c)| c * mono.iter().fold(1.0, |acc, &v| acc * x[v as usize]))
        .sum()
}

/// Random dense symmetric matrix with entries ~ N(0, 1) (symmetrized).
pub fn random_symmetric(d: usize, seed: u64) -> Mat<f64> {
    let mut r = rng::seeded(seed, 0);
    let mut m = Mat::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v: f64 = rng::standard_normal(&mut r);
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    m
}

pub fn random_dense(rows: usize, cols: usize, seed: u64) -> Mat<f64> {
    let mut r = rng::seeded(seed, 0);
    Mat::from_fn(rows, cols, |_, _| rng::standard_normal(&mut r))
}

/// Largest-|lambda| eigenpair by the dense Jacobi route.
pub fn dense_dominant_eigenpair(m: &Mat<f64>) -> (f64, Vec<f64>) {
    let (values, vectors) = jacobi_sym_eigen(m, 128).unwrap();
    let n = values.len();
    let idx = (0..n).max_by(|&a, &b| values[a].abs().partial_cmp(&values[b].abs()).unwrap()).unwrap();
    let v = (0..n).map(|i| vectors.get(i, idx)).collect();
    (values[idx], v)
}

/// Largest singular value by the dense one-sided Jacobi route.
pub fn dense_sigma_max(m: &Mat<f64>) -> f64 {
    singular_values(m).unwrap()[0]
}

/// `|u^T (M v) - v^T (M u)|` for an operator claimed symmetric.
pub fn symmetry_defect(op: &impl LinearOperator<f64>, u: &[f64], v: &[f64]) -> f64 {
    let d = op.rows();
    let mut mv = vec![0.0; d];
    let mut mu = vec![0.0; d];
    op.apply(v, &mut mv);
    op.apply(u, &mut mu);
    (polynet::linalg::dot(u, &mv) - polynet::linalg::dot(v, &mu)).abs()
}
