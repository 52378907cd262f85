//! Minimal SGD trainer on synthetic tasks.
//!
//! This exists to produce *trained* networks for spectral study, not to
//! chase benchmarks: plain stochastic gradient descent, mean-squared-error
//! loss (½‖y − t‖², averaged over samples), optional L2 weight decay added
//! to the gradient, seeded batch shuffling. Backpropagation mirrors the
//! forward maps in [`crate::net`]:
//!
//! ```text
//! plain:     dz = σ′(z) ⊙ dy′        residual:  dz = σ′(z) ⊙ dy′ · Δt
//!            dK = dz·yᵀ  dξ = dz               dK = dz·yᵀ  dξ = dz
//!            dy = Kᵀ·dz                        dy = dy′ + Kᵀ·dz
//! ```

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{NetworkSpec, UpdateForm};

/// A labeled synthetic sample set.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub inputs: Vec<DVector<f64>>,
    pub targets: Vec<DVector<f64>>,
    pub name: String,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// The two shipped tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    /// 1-D regression: x ~ U[−π, π], target sin(x) + N(0, noise²).
    NoisySine,
    /// 2-D classification: Gaussian blobs at ±(1, 1), one-hot targets,
    /// alternating class assignment, per-coordinate spread `noise`.
    TwoClusters,
}

/// Gradient-descent hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub seed: u64,
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        // learning_rate 0 is a valid no-op run (it leaves the network
        // exactly as constructed, which the CLI determinism tests rely on).
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be >= 0 and finite, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "weight_decay must be >= 0 and finite, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// Draw a seeded synthetic dataset.
pub fn make_dataset(kind: DatasetKind, n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidConfig("dataset size must be >= 1".into()));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "noise must be >= 0 and finite, got {noise}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    match kind {
        DatasetKind::NoisySine => {
            for _ in 0..n {
                let x: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                let eps: f64 = StandardNormal.sample(&mut rng);
                inputs.push(DVector::from_vec(vec![x]));
                targets.push(DVector::from_vec(vec![x.sin() + noise * eps]));
            }
        }
        DatasetKind::TwoClusters => {
            for i in 0..n {
                let class = i % 2;
                let center = if class == 0 { -1.0 } else { 1.0 };
                let e1: f64 = StandardNormal.sample(&mut rng);
                let e2: f64 = StandardNormal.sample(&mut rng);
                inputs.push(DVector::from_vec(vec![
                    center + noise * e1,
                    center + noise * e2,
                ]));
                let mut t = DVector::zeros(2);
                t[class] = 1.0;
                targets.push(t);
            }
        }
    }
    Ok(Dataset {
        inputs,
        targets,
        name: match kind {
            DatasetKind::NoisySine => "noisy_sine".to_owned(),
            DatasetKind::TwoClusters => "two_clusters".to_owned(),
        },
    })
}

/// Mean training loss of a network on a dataset.
pub fn mean_loss(net: &NetworkSpec, data: &Dataset) -> Result<f64> {
    let mut total = 0.0;
    for (x, t) in data.inputs.iter().zip(&data.targets) {
        let traj = net.forward(x)?;
        let err = traj.states.last().expect("non-empty trajectory") - t;
        total += 0.5 * err.norm_squared();
    }
    Ok(total / data.len() as f64)
}

/// Run SGD and return the trained network plus the loss history
/// (`history[0]` = loss before any update, one entry after each epoch).
pub fn train(
    net: &NetworkSpec,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<(NetworkSpec, Vec<f64>)> {
    cfg.validate()?;
    if data.is_empty() || data.inputs.len() != data.targets.len() {
        return Err(Error::InvalidConfig(
            "dataset inputs and targets must be non-empty and equal-length".into(),
        ));
    }
    if data.targets[0].len() != net.output_dim() {
        return Err(Error::DimensionMismatch {
            context: "train targets",
            expected: net.output_dim(),
            got: data.targets[0].len(),
        });
    }

    let mut net = net.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = Vec::with_capacity(cfg.epochs + 1);
    history.push(mean_loss(&net, data)?);

    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        // Seeded Fisher–Yates shuffle for the batch order.
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        for batch in order.chunks(cfg.batch_size) {
            let grads = batch_gradients(&net, data, batch)?;
            let lr = cfg.learning_rate;
            for (layer, (gw, gb)) in net.layers.iter_mut().zip(&grads) {
                if cfg.weight_decay > 0.0 {
                    layer.weights -= lr * (gw + cfg.weight_decay * &layer.weights);
                } else {
                    layer.weights -= lr * gw;
                }
                layer.bias -= lr * gb;
            }
        }
        let loss = mean_loss(&net, data)?;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        history.push(loss);
    }
    Ok((net, history))
}

/// Mean loss gradients over a batch, per layer: (dL/dK, dL/dξ).
pub fn batch_gradients(
    net: &NetworkSpec,
    data: &Dataset,
    batch: &[usize],
) -> Result<Vec<(DMatrix<f64>, DVector<f64>)>> {
    let mut grads: Vec<(DMatrix<f64>, DVector<f64>)> = net
        .layers
        .iter()
        .map(|l| {
            (
                DMatrix::zeros(l.out_dim(), l.in_dim()),
                DVector::zeros(l.out_dim()),
            )
        })
        .collect();
    let scale = 1.0 / batch.len() as f64;
    for &i in batch {
        let x = &data.inputs[i];
        let t = &data.targets[i];
        let traj = net.forward(x)?;

        // dL/dy at the output for the ½‖y − t‖² sample loss.
        let mut dy = (traj.states.last().expect("non-empty trajectory") - t) * scale;
        for q in (0..net.depth()).rev() {
            let layer = &net.layers[q];
            let y = &traj.states[q];
            let z = layer.preactivation(y);
            let d = layer.activation_derivative(&z);
            let dz = match net.update_form {
                UpdateForm::Plain => d.component_mul(&dy),
                UpdateForm::Residual => d.component_mul(&dy) * net.dt,
            };
            grads[q].0 += &dz * y.transpose();
            grads[q].1 += &dz;
            let back = layer.weights.transpose() * &dz;
            dy = match net.update_form {
                UpdateForm::Plain => back,
                UpdateForm::Residual => dy + back,
            };
        }
    }
    Ok(grads)
}

/// Fresh Gaussian-initialized network shaped input → hidden^(depth−1) →
/// output: `depth` transitions total, hidden layers at `activation`, and
/// an identity readout so regression targets are unbounded.
pub fn init_mlp(
    input_dim: usize,
    hidden_width: usize,
    output_dim: usize,
    depth: usize,
    activation: crate::net::ActivationKind,
    update_form: UpdateForm,
    dt: f64,
    init_scale: f64,
    seed: u64,
) -> Result<NetworkSpec> {
    use crate::net::{ActivationKind, LayerActivation, LayerParams};
    if depth < 2 {
        return Err(Error::InvalidConfig(
            "an MLP needs at least 2 transitions (hidden layer + readout)".into(),
        ));
    }
    if update_form == UpdateForm::Residual
        && !(input_dim == hidden_width && hidden_width == output_dim)
    {
        return Err(Error::InvalidConfig(
            "residual MLPs need equal input, hidden, and output widths".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = |rows: usize, cols: usize| {
        DMatrix::from_fn(rows, cols, |_, _| {
            let n: f64 = StandardNormal.sample(&mut rng);
            init_scale * n
        })
    };
    let mut dims = Vec::with_capacity(depth + 1);
    dims.push(input_dim);
    for _ in 0..depth - 1 {
        dims.push(hidden_width);
    }
    dims.push(output_dim);

    let mut layers = Vec::with_capacity(depth);
    for q in 0..depth {
        let weights = gauss(dims[q + 1], dims[q]);
        let bias = DVector::zeros(dims[q + 1]);
        let kind = if q == depth - 1 {
            ActivationKind::Identity
        } else {
            activation
        };
        layers.push(LayerParams::new(
            weights,
            bias,
            LayerActivation::uniform(kind),
        ));
    }
    NetworkSpec::new(update_form, dt, input_dim, layers)
}
