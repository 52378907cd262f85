//! Contract tests for datasets, the SGD trainer, and its gradients.

use nalgebra::{DMatrix, DVector};
use lyapnet::net::{
    ActivationKind, LayerActivation, LayerParams, NetworkSpec, UpdateForm,
};
use lyapnet::trainer::{
    batch_gradients, init_mlp, make_dataset, mean_loss, train, Dataset, DatasetKind,
    TrainConfig,
};
use lyapnet::Error;

fn line_dataset() -> Dataset {
    // Noise-free y = 0.7·x + 0.2 on a symmetric grid.
    let xs: Vec<f64> = (0..21).map(|i| -1.0 + 0.1 * i as f64).collect();
    Dataset {
        inputs: xs.iter().map(|&x| DVector::from_vec(vec![x])).collect(),
        targets: xs
            .iter()
            .map(|&x| DVector::from_vec(vec![0.7 * x + 0.2]))
            .collect(),
        name: "line".into(),
    }
}

fn scalar_affine_net(w: f64, b: f64) -> NetworkSpec {
    NetworkSpec::new(
        UpdateForm::Plain,
        1.0,
        1,
        vec![LayerParams::new(
            DMatrix::from_row_slice(1, 1, &[w]),
            DVector::from_vec(vec![b]),
            LayerActivation::uniform(ActivationKind::Identity),
        )],
    )
    .unwrap()
}

#[test]
fn zero_learning_rate_changes_nothing() {
    let net = scalar_affine_net(0.1, -0.3);
    let cfg = TrainConfig {
        epochs: 5,
        learning_rate: 0.0,
        batch_size: 4,
        weight_decay: 0.01,
        seed: 1,
    };
    let (trained, history) = train(&net, &line_dataset(), &cfg).unwrap();
    assert_eq!(
        trained.to_json_string(),
        net.to_json_string(),
        "lr = 0 must return the network unchanged"
    );
    assert_eq!(history.len(), 6, "initial loss plus one entry per epoch");
    for h in &history {
        assert_eq!(*h, history[0], "constant loss under lr = 0");
    }
}

#[test]
fn gradient_descent_solves_the_linear_least_squares_problem() {
    let net = scalar_affine_net(0.0, 0.0);
    let cfg = TrainConfig {
        epochs: 2000,
        learning_rate: 0.1,
        batch_size: 21,
        weight_decay: 0.0,
        seed: 1,
    };
    let (trained, history) = train(&net, &line_dataset(), &cfg).unwrap();
    let w = trained.layers[0].weights[(0, 0)];
    let b = trained.layers[0].bias[0];
    assert!((w - 0.7).abs() < 1e-6, "weight converged to {w}");
    assert!((b - 0.2).abs() < 1e-6, "bias converged to {b}");
    assert!(history.last().unwrap() < &1e-12, "noise-free fit reaches ~zero loss");
    assert!(
        history.windows(2).all(|p| p[1] <= p[0] + 1e-12),
        "full-batch descent on a convex quadratic is monotone"
    );
}

#[test]
fn weight_decay_shrinks_weight_norms() {
    let data = make_dataset(DatasetKind::NoisySine, 32, 0.1, 11).unwrap();
    let net0 = init_mlp(
        1,
        8,
        1,
        3,
        ActivationKind::Tanh { steepness: 1.0 },
        UpdateForm::Plain,
        1.0,
        0.5,
        21,
    )
    .unwrap();
    let run = |wd: f64| {
        let cfg = TrainConfig {
            epochs: 60,
            learning_rate: 0.05,
            batch_size: 8,
            weight_decay: wd,
            seed: 5,
        };
        let (trained, _) = train(&net0, &data, &cfg).unwrap();
        trained
            .layers
            .iter()
            .map(|l| l.weights.norm_squared())
            .sum::<f64>()
    };
    let free = run(0.0);
    let light = run(0.01);
    let heavy = run(0.1);
    assert!(
        light < free && heavy < light,
        "‖W‖² must fall as decay rises: {free} → {light} → {heavy}"
    );
}

#[test]
fn noisy_sine_matches_its_description() {
    let clean = make_dataset(DatasetKind::NoisySine, 200, 0.0, 3).unwrap();
    assert_eq!(clean.len(), 200);
    for (x, t) in clean.inputs.iter().zip(&clean.targets) {
        assert_eq!(x.len(), 1);
        assert!(x[0] > -std::f64::consts::PI && x[0] < std::f64::consts::PI);
        assert!(
            (t[0] - x[0].sin()).abs() < 1e-15,
            "noise = 0 gives the exact sine"
        );
    }

    // With noise, the residual variance lands in the documented band.
    let noisy = make_dataset(DatasetKind::NoisySine, 4000, 0.1, 4).unwrap();
    let residuals: Vec<f64> = noisy
        .inputs
        .iter()
        .zip(&noisy.targets)
        .map(|(x, t)| t[0] - x[0].sin())
        .collect();
    let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
    let var = residuals.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>()
        / residuals.len() as f64;
    assert!(
        (0.005..=0.02).contains(&var),
        "σ = 0.1 noise has variance ≈ 0.01, got {var}"
    );
}

#[test]
fn two_clusters_are_linearly_separable_one_hot_pairs() {
    let data = make_dataset(DatasetKind::TwoClusters, 100, 0.1, 9).unwrap();
    for (i, (x, t)) in data.inputs.iter().zip(&data.targets).enumerate() {
        assert_eq!(x.len(), 2);
        assert_eq!(t.len(), 2);
        let class = i % 2;
        assert_eq!(t[class], 1.0, "one-hot target for class {class}");
        assert_eq!(t[1 - class], 0.0);
        // Class 0 sits at (−1, −1), class 1 at (1, 1); σ = 0.1 keeps the
        // diagonal-sign separation clean.
        let proj = x[0] + x[1];
        assert!(
            if class == 0 { proj < 0.0 } else { proj > 0.0 },
            "sample {i} at ({}, {}) is on the wrong side",
            x[0],
            x[1]
        );
    }
}

#[test]
fn batch_gradients_match_finite_differences() {
    for (form, dt) in [(UpdateForm::Plain, 1.0), (UpdateForm::Residual, 0.5)] {
        // Residual layers must be square, so the hidden width matches the
        // data dimensions there.
        let hidden = if form == UpdateForm::Residual { 2 } else { 3 };
        let net = init_mlp(
            2,
            hidden,
            2,
            3,
            ActivationKind::Tanh { steepness: 1.0 },
            form,
            dt,
            0.6,
            77,
        )
        .unwrap();
        let data = Dataset {
            inputs: vec![
                DVector::from_vec(vec![0.3, -0.4]),
                DVector::from_vec(vec![-0.8, 0.1]),
                DVector::from_vec(vec![0.5, 0.9]),
            ],
            targets: vec![
                DVector::from_vec(vec![0.1, 0.0]),
                DVector::from_vec(vec![-0.3, 0.2]),
                DVector::from_vec(vec![0.0, 0.7]),
            ],
            name: "fd-check".into(),
        };
        let batch = [0usize, 1, 2];
        let grads = batch_gradients(&net, &data, &batch).unwrap();

        // Independent oracle: central differences of the batch loss.
        let batch_loss = |n: &NetworkSpec| -> f64 {
            data.inputs
                .iter()
                .zip(&data.targets)
                .map(|(x, t)| {
                    let y = n.forward(x).unwrap().states.last().unwrap().clone();
                    0.5 * (&y - t).norm_squared()
                })
                .sum::<f64>()
                / data.len() as f64
        };
        let h = 1e-6;
        for (q, (gw, gb)) in grads.iter().enumerate() {
            for r in 0..gw.nrows() {
                for c in 0..gw.ncols() {
                    let mut plus = net.clone();
                    plus.layers[q].weights[(r, c)] += h;
                    let mut minus = net.clone();
                    minus.layers[q].weights[(r, c)] -= h;
                    let fd = (batch_loss(&plus) - batch_loss(&minus)) / (2.0 * h);
                    assert!(
                        (fd - gw[(r, c)]).abs() <= 1e-6 * fd.abs().max(1.0),
                        "{form:?} layer {q} W[{r},{c}]: analytic {} vs FD {fd}",
                        gw[(r, c)]
                    );
                }
            }
            for r in 0..gb.len() {
                let mut plus = net.clone();
                plus.layers[q].bias[r] += h;
                let mut minus = net.clone();
                minus.layers[q].bias[r] -= h;
                let fd = (batch_loss(&plus) - batch_loss(&minus)) / (2.0 * h);
                assert!(
                    (fd - gb[r]).abs() <= 1e-6 * fd.abs().max(1.0),
                    "{form:?} layer {q} b[{r}]: analytic {} vs FD {fd}",
                    gb[r]
                );
            }
        }
    }
}

#[test]
fn init_mlp_builds_the_documented_architecture() {
    let net = init_mlp(
        1,
        8,
        1,
        4,
        ActivationKind::Tanh { steepness: 1.0 },
        UpdateForm::Plain,
        1.0,
        0.5,
        3,
    )
    .unwrap();
    assert_eq!(net.depth(), 4);
    let dims: Vec<(usize, usize)> = net
        .layers
        .iter()
        .map(|l| (l.weights.nrows(), l.weights.ncols()))
        .collect();
    assert_eq!(dims, vec![(8, 1), (8, 8), (8, 8), (1, 8)]);
    assert_eq!(
        net.layers.last().unwrap().activation.kind,
        ActivationKind::Identity,
        "linear readout"
    );
    for layer in &net.layers[..3] {
        assert_eq!(layer.activation.kind, ActivationKind::Tanh { steepness: 1.0 });
    }
    for layer in &net.layers {
        assert!(layer.bias.iter().all(|b| *b == 0.0), "biases start at zero");
    }
    assert!(init_mlp(
        1,
        8,
        1,
        1,
        ActivationKind::Tanh { steepness: 1.0 },
        UpdateForm::Plain,
        1.0,
        0.5,
        3
    )
    .is_err(), "at least two transitions (hidden + readout)");
}

#[test]
fn training_is_deterministic_in_the_seed() {
    let data = make_dataset(DatasetKind::NoisySine, 24, 0.1, 8).unwrap();
    let net0 = init_mlp(
        1,
        6,
        1,
        2,
        ActivationKind::Tanh { steepness: 1.0 },
        UpdateForm::Plain,
        1.0,
        0.5,
        42,
    )
    .unwrap();
    let cfg = TrainConfig {
        epochs: 25,
        learning_rate: 0.05,
        batch_size: 5,
        weight_decay: 0.0,
        seed: 17,
    };
    let (a, ha) = train(&net0, &data, &cfg).unwrap();
    let (b, hb) = train(&net0, &data, &cfg).unwrap();
    assert_eq!(a.to_json_string(), b.to_json_string());
    assert_eq!(ha, hb);

    let mut other = cfg.clone();
    other.seed = 18;
    let (_, hc) = train(&net0, &data, &other).unwrap();
    assert_ne!(ha, hc, "the shuffle order must depend on the seed");
}

#[test]
fn divergence_is_reported_with_the_epoch() {
    let net = scalar_affine_net(1.0, 0.0);
    let cfg = TrainConfig {
        epochs: 400,
        learning_rate: 10.0,
        batch_size: 21,
        weight_decay: 0.0,
        seed: 1,
    };
    match train(&net, &line_dataset(), &cfg) {
        Err(Error::TrainingDiverged { epoch }) => assert!(epoch < 400),
        other => panic!("lr = 10 on a linear problem must diverge, got {other:?}"),
    }
}

#[test]
fn invalid_training_configs_are_rejected() {
    let data = line_dataset();
    let net = scalar_affine_net(0.0, 0.0);
    let run = |cfg: TrainConfig| train(&net, &data, &cfg);
    assert!(run(TrainConfig {
        epochs: 1,
        learning_rate: -0.1,
        batch_size: 1,
        weight_decay: 0.0,
        seed: 0
    })
    .is_err());
    assert!(run(TrainConfig {
        epochs: 1,
        learning_rate: 0.1,
        batch_size: 0,
        weight_decay: 0.0,
        seed: 0
    })
    .is_err());
    assert!(run(TrainConfig {
        epochs: 1,
        learning_rate: 0.1,
        batch_size: 1,
        weight_decay: -1.0,
        seed: 0
    })
    .is_err());
}

#[test]
fn mean_loss_matches_a_hand_computation() {
    let net = scalar_affine_net(2.0, 1.0);
    let data = Dataset {
        inputs: vec![
            DVector::from_vec(vec![1.0]),
            DVector::from_vec(vec![-1.0]),
        ],
        targets: vec![
            DVector::from_vec(vec![0.0]),
            DVector::from_vec(vec![0.0]),
        ],
        name: "hand".into(),
    };
    // Outputs 3 and −1 → ½(9) and ½(1) → mean 2.5.
    let loss = mean_loss(&net, &data).unwrap();
    assert!((loss - 2.5).abs() < 1e-15);
}
