//! Trainer-level properties: monotone traces, class containment, the tensor
//! approximation ratio at small dimension, and structural expansion of the
//! trained depth-3 networks.

mod common;

use polynet::data::{gen_from_teacher, gen_teacher_p2k};
use polynet::geco2::{geco2_train, TrainConfig};
use polynet::geco3::{geco3_train, tensor_ratio_experiment, TensorConfig};
use polynet::loss::Loss;
use polynet::net::{expand_to_gadget, BasisFunction, PolyNet};
use polynet::rng;

#[test]
fn geco2_trace_is_monotone_on_noisy_data() {
    let (data, _) = gen_teacher_p2k::<f64>(8, 3, 500, 31, 0.1).unwrap();
    let cfg = TrainConfig {
        r: 12,
        seed: 4,
        ..TrainConfig::default()
    };
    let (net, trace) = geco2_train(&data, Loss::Squared, &cfg).unwrap();
    assert!(trace.max_risk_increase() <= 1e-10);
    assert!(net.neurons().len() <= 12);
    assert!(net.max_degree() <= 2);
}

#[test]
fn tensor_ratio_holds_at_d2_and_d3() {
    // The guarantee: score >= (1-tau)/sqrt(2d) * optimum with probability
    // 1 - delta per trial; empirically over 200 trials the success fraction
    // must clear 1 - delta - 0.05 against the grid reference.
    for (d, grid_deg) in [(2usize, 1.0f64), (3, 3.0)] {
        let report = tensor_ratio_experiment(d, 50, 0.5, 0.1, 200, grid_deg, 99).unwrap();
        assert!(
            report.success_fraction >= 1.0 - 0.1 - 0.05,
            "d={d}: success fraction {}",
            report.success_fraction
        );
    }
}

#[test]
fn geco3_matches_geco2_on_degree_2_teacher() {
    // Data realizable in the depth-2 class: the wider search space of the
    // depth-3 trainer cannot do meaningfully worse.
    let (data, _) = gen_teacher_p2k::<f64>(6, 2, 800, 17, 0.0).unwrap();
    let cfg = TrainConfig {
        r: 25,
        seed: 8,
        ..TrainConfig::default()
    };
    let tcfg = TensorConfig {
        tau: 0.5,
        delta: 0.1,
        restarts_override: None,
        seed: 9,
    };
    let (_, trace2) = geco2_train(&data, Loss::Squared, &cfg).unwrap();
    let (_, trace3) = geco3_train(&data, Loss::Squared, &cfg, &tcfg).unwrap();
    let r2 = trace2.final_risk().unwrap();
    let r3 = trace3.final_risk().unwrap();
    assert!(trace3.max_risk_increase() <= 1e-10);
    assert!(r3 <= r2 + 0.05, "geco3 {r3} vs geco2 {r2}");
}

#[test]
fn trained_geco3_network_expands_into_sigma2_form() {
    let d = 4;
    let mut teacher = PolyNet::zero(d);
    let e = |i: usize| {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    };
    teacher
        .push_neuron(0.8, BasisFunction::cubic(e(0), e(1), e(2)).unwrap())
        .unwrap();
    teacher
        .push_neuron(-0.5, BasisFunction::square(e(3)).unwrap())
        .unwrap();
    let data = gen_from_teacher(&teacher, 1200, 5, 0.0).unwrap();
    let cfg = TrainConfig {
        r: 10,
        seed: 2,
        ..TrainConfig::default()
    };
    let tcfg = TensorConfig {
        tau: 0.3,
        delta: 0.1,
        restarts_override: None,
        seed: 3,
    };
    let (net, _) = geco3_train(&data, Loss::Squared, &cfg, &tcfg).unwrap();
    assert!(!net.neurons().is_empty());
    assert!(net.max_degree() <= 3);
    let gadget = expand_to_gadget(&net);
    // Expressible with at most five squared neurons per greedy neuron.
    assert!(gadget.hidden_neuron_count() < 5 * net.neurons().len().max(1));
    let mut r = rng::seeded(6, 0);
    for _ in 0..100 {
        let x: Vec<f64> = rng::gaussian_vec(&mut r, d);
        let want = net.evaluate(&x).unwrap();
        let got = gadget.evaluate(&x).unwrap()[0];
        assert!(
            (want - got).abs() <= 1e-9 * want.abs().max(1.0),
            "{want} vs {got}"
        );
    }
}

#[test]
fn first_greedy_step_matches_dense_eigensolver_route() {
    // Build the greedy-step matrix at the affine fit explicitly and compare
    // its dense dominant eigenvector with the trainer's first neuron.
    let teacher = polynet::data::fixed_p2k_teacher::<f64>(5).unwrap();
    let data = gen_from_teacher(&teacher, 2000, 7, 0.0).unwrap();
    let cfg = TrainConfig {
        r: 1,
        ..TrainConfig::default()
    };
    let (net, _) = geco2_train(&data, Loss::Squared, &cfg).unwrap();
    let learned = &net.neurons()[0].basis.directions()[0];

    // Affine least squares fit, residual weights, dense M.
    let refit =
        polynet::geco2::refit_output_weights::<f64>(&[], &data, Loss::Squared, 1e-8, 100).unwrap();
    let affine = PolyNet::affine(refit.bias, refit.direct);
    let weights = polynet::loss::risk_gradient_weights(&affine, &data, Loss::Squared).unwrap();
    let d = data.dim();
    let m = data.len() as f64;
    let mut dense = polynet::linalg::dense::Mat::zeros(d, d);
    for (i, &c) in weights.iter().enumerate() {
        let x = data.x(i);
        for a in 0..d {
            for b in 0..d {
                dense.set(a, b, dense.get(a, b) + c * x[a] * x[b] / m);
            }
        }
    }
    let (_, oracle_vec) = common::dense_dominant_eigenpair(&dense);
    let align = polynet::linalg::dot(learned, &oracle_vec).abs();
    assert!(align >= 1.0 - 1e-6, "alignment with dense route: {align}");
    // And both align with the planted teacher direction e1.
    assert!(learned[0].abs() >= 0.99);
}

#[test]
fn restarts_follow_the_formula_across_dimensions() {
    for delta in [0.5, 0.1, 0.01] {
        for d in [1usize, 2, 5, 20] {
            let cfg = TensorConfig {
                tau: 0.5,
                delta,
                restarts_override: None,
                seed: 0,
            };
            let want = (2.0 * d as f64 * (1.0 / delta).ln()).ceil() as usize;
            assert_eq!(cfg.restarts(d), want.max(1));
        }
    }
}
