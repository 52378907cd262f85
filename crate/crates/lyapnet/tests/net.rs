//! Contract tests for the network model: JSON schema strictness,
//! activation analytics, and forward-pass semantics against independent
//! scalar-loop oracles.

use nalgebra::{DMatrix, DVector};
use lyapnet::net::{
    ActivationKind, LayerActivation, LayerParams, NetworkSpec, UpdateForm,
};
use lyapnet::Error;

fn two_layer_tanh() -> NetworkSpec {
    NetworkSpec::new(
        UpdateForm::Plain,
        1.0,
        2,
        vec![
            LayerParams::new(
                DMatrix::from_row_slice(3, 2, &[0.5, -1.0, 0.25, 0.75, -0.5, 1.5]),
                DVector::from_vec(vec![0.1, -0.2, 0.3]),
                LayerActivation::uniform(ActivationKind::Tanh { steepness: 1.0 }),
            ),
            LayerParams::new(
                DMatrix::from_row_slice(2, 3, &[1.0, 0.0, -0.5, 0.25, -0.75, 0.5]),
                DVector::from_vec(vec![0.0, 0.05]),
                LayerActivation::uniform(ActivationKind::Sigmoid { steepness: 2.0 }),
            ),
        ],
    )
    .expect("valid network")
}

#[test]
fn json_round_trip_is_byte_identical() {
    let net = two_layer_tanh();
    let text = net.to_json_string();
    let back = NetworkSpec::from_json_str(&text).expect("own output parses");
    assert_eq!(back.to_json_string(), text, "serialize∘parse must be a fixed point");
    assert_eq!(back.depth(), 2);
    assert_eq!(back.input_dim, 2);
}

#[test]
fn the_documented_json_layout_parses() {
    // Field names and nesting are a stable interface; this literal is the
    // layout external tools produce.
    let text = r#"{
        "update_form": "plain",
        "dt": 1.0,
        "input_dim": 2,
        "layers": [
            {
                "weights": [[1.0, 0.5], [-0.25, 2.0]],
                "bias": [0.0, -1.0],
                "activation": {"kind": "tanh", "param": 1.0}
            }
        ]
    }"#;
    let net = NetworkSpec::from_json_str(text).expect("documented layout parses");
    assert_eq!(net.layers[0].weights[(1, 0)], -0.25);
    assert_eq!(net.layers[0].bias[1], -1.0);
    assert_eq!(
        net.layers[0].activation.kind,
        ActivationKind::Tanh { steepness: 1.0 }
    );
}

#[test]
fn residual_form_and_identity_tail_parse() {
    let text = r#"{
        "update_form": "residual",
        "dt": 0.25,
        "input_dim": 2,
        "layers": [
            {
                "weights": [[1.0, 0.0], [0.0, 1.0]],
                "bias": [0.0, 0.0],
                "activation": {"kind": "relu", "identity_tail": 1}
            }
        ]
    }"#;
    let net = NetworkSpec::from_json_str(text).expect("residual + tail parses");
    assert_eq!(net.update_form, UpdateForm::Residual);
    assert_eq!(net.dt, 0.25);
    assert_eq!(net.layers[0].activation.identity_tail, 1);
}

#[test]
fn unknown_and_missing_fields_are_rejected() {
    let unknown = r#"{
        "update_form": "plain", "dt": 1.0, "input_dim": 1, "extra": 3,
        "layers": [{"weights": [[1.0]], "bias": [0.0], "activation": {"kind": "relu"}}]
    }"#;
    match NetworkSpec::from_json_str(unknown) {
        Err(Error::Json { source, .. }) => assert!(
            source.to_string().contains("extra"),
            "diagnostic should name the offending field: {source}"
        ),
        other => panic!("unknown top-level field must be rejected, got {other:?}"),
    }

    let unknown_layer = r#"{
        "update_form": "plain", "dt": 1.0, "input_dim": 1,
        "layers": [{"weights": [[1.0]], "bias": [0.0], "activation": {"kind": "relu"}, "note": "x"}]
    }"#;
    assert!(NetworkSpec::from_json_str(unknown_layer).is_err());

    let missing = r#"{
        "update_form": "plain", "dt": 1.0,
        "layers": [{"weights": [[1.0]], "bias": [0.0], "activation": {"kind": "relu"}}]
    }"#;
    assert!(
        NetworkSpec::from_json_str(missing).is_err(),
        "missing input_dim must be rejected"
    );
}

#[test]
fn structural_validation_rejects_bad_networks() {
    // Ragged weight rows.
    let ragged = r#"{
        "update_form": "plain", "dt": 1.0, "input_dim": 2,
        "layers": [{"weights": [[1.0, 2.0], [3.0]], "bias": [0.0, 0.0], "activation": {"kind": "relu"}}]
    }"#;
    assert!(NetworkSpec::from_json_str(ragged).is_err(), "ragged rows rejected");

    // Bias length != row count.
    let bias = r#"{
        "update_form": "plain", "dt": 1.0, "input_dim": 2,
        "layers": [{"weights": [[1.0, 2.0]], "bias": [0.0, 0.0], "activation": {"kind": "relu"}}]
    }"#;
    assert!(NetworkSpec::from_json_str(bias).is_err(), "bias length mismatch rejected");

    // Layer widths must telescope.
    let telescope = r#"{
        "update_form": "plain", "dt": 1.0, "input_dim": 2,
        "layers": [
            {"weights": [[1.0, 2.0]], "bias": [0.0], "activation": {"kind": "relu"}},
            {"weights": [[1.0, 2.0]], "bias": [0.0], "activation": {"kind": "relu"}}
        ]
    }"#;
    assert!(NetworkSpec::from_json_str(telescope).is_err(), "dim mismatch rejected");

    // Residual layers must be square.
    let residual = r#"{
        "update_form": "residual", "dt": 1.0, "input_dim": 2,
        "layers": [{"weights": [[1.0, 2.0]], "bias": [0.0], "activation": {"kind": "relu"}}]
    }"#;
    assert!(NetworkSpec::from_json_str(residual).is_err(), "non-square residual rejected");

    // identity_tail larger than the layer.
    let tail = r#"{
        "update_form": "plain", "dt": 1.0, "input_dim": 1,
        "layers": [{"weights": [[1.0]], "bias": [0.0], "activation": {"kind": "relu", "identity_tail": 2}}]
    }"#;
    assert!(NetworkSpec::from_json_str(tail).is_err(), "oversized identity_tail rejected");
}

#[test]
fn activation_param_rules() {
    assert!(ActivationKind::from_parts("relu", Some(1.0)).is_err(), "relu takes no param");
    assert!(ActivationKind::from_parts("identity", Some(2.0)).is_err());
    assert!(ActivationKind::from_parts("tanh", Some(-1.0)).is_err(), "param must be > 0");
    assert!(ActivationKind::from_parts("tanh", Some(f64::NAN)).is_err());
    assert!(ActivationKind::from_parts("spline", None).is_err(), "unknown kind");

    // Defaults when the param is omitted.
    assert_eq!(
        ActivationKind::from_parts("sigmoid", None).unwrap(),
        ActivationKind::Sigmoid { steepness: 1.0 }
    );
    assert_eq!(
        ActivationKind::from_parts("steep_step", None).unwrap(),
        ActivationKind::SteepStep { steepness: 50.0 }
    );
    assert_eq!(
        ActivationKind::from_parts("elu", None).unwrap(),
        ActivationKind::Elu { alpha: 1.0 }
    );
    assert_eq!(
        ActivationKind::from_parts("swish", None).unwrap(),
        ActivationKind::Swish { beta: 1.0 }
    );
}

#[test]
fn activation_values_match_closed_forms() {
    let sig = ActivationKind::Sigmoid { steepness: 1.0 };
    assert_eq!(sig.apply(0.0), 0.5);
    assert!((sig.derivative(0.0) - 0.25).abs() < 1e-15, "σ′(0) = 1/4");
    // Steepness k scales the slope: σ_k′(0) = k/4.
    let sig3 = ActivationKind::Sigmoid { steepness: 3.0 };
    assert!((sig3.derivative(0.0) - 0.75).abs() < 1e-15);
    // Extreme arguments saturate without overflow.
    assert_eq!(sig.apply(800.0), 1.0);
    assert_eq!(sig.apply(-800.0), 0.0);
    assert_eq!(sig.derivative(-800.0), 0.0);

    let tanh = ActivationKind::Tanh { steepness: 2.0 };
    assert_eq!(tanh.apply(0.0), 0.0);
    assert!((tanh.derivative(0.0) - 2.0).abs() < 1e-15, "tanh_k′(0) = k");
    assert!((tanh.apply(0.5) - (1.0f64).tanh()).abs() < 1e-15);

    let relu = ActivationKind::Relu;
    assert_eq!(relu.apply(-1.5), 0.0);
    assert_eq!(relu.apply(2.5), 2.5);
    assert_eq!(relu.derivative(0.0), 0.0, "the kink derivative is pinned to 0");
    assert_eq!(relu.derivative(1e-300), 1.0);

    let elu = ActivationKind::Elu { alpha: 0.7 };
    assert_eq!(elu.apply(1.5), 1.5);
    assert!((elu.apply(-1.0) - 0.7 * ((-1.0f64).exp() - 1.0)).abs() < 1e-15);
    assert!((elu.derivative(0.0) - 0.7).abs() < 1e-15, "ELU′ is continuous at 0");
    assert!((elu.derivative(-2.0) - 0.7 * (-2.0f64).exp()).abs() < 1e-15);

    let swish = ActivationKind::Swish { beta: 1.0 };
    assert_eq!(swish.apply(0.0), 0.0);
    assert!((swish.derivative(0.0) - 0.5).abs() < 1e-15, "swish′(0) = 1/2");

    let step = ActivationKind::SteepStep { steepness: 50.0 };
    assert_eq!(step.apply(0.0), 0.5);
    assert!((step.derivative(0.0) - 12.5).abs() < 1e-12, "spike height = k/4");
    assert!(step.apply(1.0) > 1.0 - 1e-15, "saturates fast");

    let id = ActivationKind::Identity;
    assert_eq!(id.apply(-3.25), -3.25);
    assert_eq!(id.derivative(-3.25), 1.0);
}

#[test]
fn activation_derivatives_match_finite_differences() {
    let kinds = [
        ActivationKind::Identity,
        ActivationKind::Sigmoid { steepness: 1.0 },
        ActivationKind::Sigmoid { steepness: 3.0 },
        ActivationKind::Tanh { steepness: 1.0 },
        ActivationKind::SteepStep { steepness: 50.0 },
        ActivationKind::Elu { alpha: 1.0 },
        ActivationKind::Elu { alpha: 0.3 },
        ActivationKind::Swish { beta: 1.0 },
        ActivationKind::Swish { beta: 2.5 },
    ];
    let h = 1e-6;
    for kind in kinds {
        for z in [-1.3, -0.7, -0.1, 0.02, 0.4, 0.9] {
            let fd = (kind.apply(z + h) - kind.apply(z - h)) / (2.0 * h);
            let d = kind.derivative(z);
            assert!(
                (fd - d).abs() <= 1e-4 * d.abs().max(1.0),
                "{}: derivative {d} vs central difference {fd} at z = {z}",
                kind.name()
            );
        }
    }
    // ReLU away from the kink (central differences straddle z = 0).
    for z in [-2.0, -0.5, 0.5, 2.0] {
        let fd = (ActivationKind::Relu.apply(z + h) - ActivationKind::Relu.apply(z - h)) / (2.0 * h);
        assert!((fd - ActivationKind::Relu.derivative(z)).abs() < 1e-9);
    }
}

/// Scalar-loop forward pass, written independently of the library's
/// vectorized one.
fn scalar_forward(net: &NetworkSpec, y0: &[f64]) -> Vec<Vec<f64>> {
    let mut states = vec![y0.to_vec()];
    for layer in &net.layers {
        let y = states.last().unwrap().clone();
        let rows = layer.weights.nrows();
        let mut next = vec![0.0; rows];
        for r in 0..rows {
            let mut z = layer.bias[r];
            for c in 0..layer.weights.ncols() {
                z += layer.weights[(r, c)] * y[c];
            }
            let phi = layer.activation.row_kind(r, rows).apply(z);
            next[r] = match net.update_form {
                UpdateForm::Plain => phi,
                UpdateForm::Residual => y[r] + net.dt * phi,
            };
        }
        states.push(next);
    }
    states
}

#[test]
fn forward_matches_the_scalar_oracle() {
    let net = two_layer_tanh();
    let y0 = DVector::from_vec(vec![0.3, -0.8]);
    let traj = net.forward(&y0).expect("forward succeeds");
    let oracle = scalar_forward(&net, &[0.3, -0.8]);
    assert_eq!(traj.states.len(), 3, "depth-2 net has 3 states");
    for (q, (got, want)) in traj.states.iter().zip(&oracle).enumerate() {
        for (i, (&a, &b)) in got.iter().zip(want).enumerate() {
            assert!(
                (a - b).abs() <= 1e-15 * b.abs().max(1.0),
                "state {q}, component {i}: {a} vs oracle {b}"
            );
        }
    }
}

#[test]
fn residual_forward_matches_the_scalar_oracle() {
    let net = NetworkSpec::new(
        UpdateForm::Residual,
        0.25,
        2,
        vec![
            LayerParams::new(
                DMatrix::from_row_slice(2, 2, &[0.5, -1.0, 0.25, 0.75]),
                DVector::from_vec(vec![0.1, -0.2]),
                LayerActivation::uniform(ActivationKind::Swish { beta: 1.0 }),
            ),
            LayerParams::new(
                DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
                DVector::from_vec(vec![0.3, 0.0]),
                LayerActivation::uniform(ActivationKind::Elu { alpha: 1.0 }),
            ),
        ],
    )
    .unwrap();
    let traj = net.forward(&DVector::from_vec(vec![1.0, -0.5])).unwrap();
    let oracle = scalar_forward(&net, &[1.0, -0.5]);
    for (got, want) in traj.states.iter().zip(&oracle) {
        for (&a, &b) in got.iter().zip(want) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
    }
}

#[test]
fn identity_tail_rows_pass_through() {
    // 3 rows, tail of 2: row 0 is ReLU, rows 1–2 identity.
    let net = NetworkSpec::new(
        UpdateForm::Plain,
        1.0,
        3,
        vec![LayerParams::new(
            DMatrix::from_row_slice(3, 3, &[-1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, -3.0]),
            DVector::from_vec(vec![0.0, 0.0, 0.0]),
            LayerActivation {
                kind: ActivationKind::Relu,
                identity_tail: 2,
            },
        )],
    )
    .unwrap();
    let traj = net.forward(&DVector::from_vec(vec![1.0, 1.0, 1.0])).unwrap();
    let y1 = &traj.states[1];
    assert_eq!(y1[0], 0.0, "ReLU clips −1");
    assert_eq!(y1[1], 2.0, "identity row keeps the preactivation");
    assert_eq!(y1[2], -3.0, "identity row keeps negative values too");
}

#[test]
fn non_finite_states_are_reported_with_the_layer_index() {
    let net = NetworkSpec::new(
        UpdateForm::Plain,
        1.0,
        1,
        vec![
            LayerParams::new(
                DMatrix::from_row_slice(1, 1, &[1.0e308]),
                DVector::from_vec(vec![0.0]),
                LayerActivation::uniform(ActivationKind::Identity),
            ),
            LayerParams::new(
                DMatrix::from_row_slice(1, 1, &[1.0e308]),
                DVector::from_vec(vec![0.0]),
                LayerActivation::uniform(ActivationKind::Identity),
            ),
        ],
    )
    .unwrap();
    // y¹ = 1e308 is still finite; the second transition overflows.
    match net.forward(&DVector::from_vec(vec![1.0])) {
        Err(Error::NonFiniteState { layer, .. }) => assert_eq!(layer, 1),
        other => panic!("expected NonFiniteState, got {other:?}"),
    }
}

#[test]
fn save_and_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    let net = two_layer_tanh();
    net.save(&path).unwrap();
    let back = NetworkSpec::load(&path).unwrap();
    assert_eq!(back.to_json_string(), net.to_json_string());

    assert!(
        matches!(NetworkSpec::load(&dir.path().join("missing.json")), Err(Error::Io(_))),
        "missing file surfaces as an I/O error"
    );

    std::fs::write(dir.path().join("broken.json"), b"{ not json").unwrap();
    match NetworkSpec::load(&dir.path().join("broken.json")) {
        Err(Error::Json { path: p, .. }) => assert!(p.ends_with("broken.json")),
        other => panic!("expected a JSON error with the path, got {other:?}"),
    }
}

#[test]
fn constant_width_detects_rectangular_layers() {
    assert_eq!(two_layer_tanh().constant_width(), None, "2→3→2 is not constant");
    let square = NetworkSpec::new(
        UpdateForm::Plain,
        1.0,
        2,
        vec![LayerParams::new(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            LayerActivation::uniform(ActivationKind::Identity),
        )],
    )
    .unwrap();
    assert_eq!(square.constant_width(), Some(2));
}

#[test]
fn step_rejects_out_of_range_layers() {
    let net = two_layer_tanh();
    let y = DVector::from_vec(vec![0.0, 0.0]);
    assert!(matches!(
        net.step(2, &y),
        Err(Error::DepthOutOfRange { depth: 2, max: 1 })
    ));
}
