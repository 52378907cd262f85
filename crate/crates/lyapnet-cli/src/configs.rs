//! JSON config documents consumed by the CLI subcommands.
//!
//! Both structs reject unknown fields so typos fail loudly instead of
//! silently falling back to defaults.

use serde::Deserialize;
use std::path::Path;

use lyapnet::error::{Error, Result};
use lyapnet::generators::{GeneratorConfig, Normalization};
use lyapnet::net::{ActivationKind, UpdateForm};
use lyapnet::trainer::TrainConfig;

/// `lyapnet generate` config: the generator knobs plus optional
/// structural transforms, applied as prune → delay-embed.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateDoc {
    #[serde(rename = "width_D")]
    pub width_d: usize,
    #[serde(rename = "depth_N")]
    pub depth_n: usize,
    pub connectivity_p: f64,
    pub weight_scale_s: f64,
    pub normalization: Normalization,
    pub activation: ActivationKind,
    pub update_form: UpdateForm,
    pub dt: f64,
    pub seed: u64,
    /// Zero this fraction of each row's smallest-magnitude weights.
    #[serde(default)]
    pub prune_fraction: Option<f64>,
    /// Append the one-step delay coordinates after any pruning.
    #[serde(default)]
    pub delay_embed: bool,
}

impl GenerateDoc {
    pub fn generator(&self) -> GeneratorConfig {
        GeneratorConfig {
            width_d: self.width_d,
            depth_n: self.depth_n,
            connectivity_p: self.connectivity_p,
            weight_scale_s: self.weight_scale_s,
            normalization: self.normalization,
            activation: self.activation,
            update_form: self.update_form,
            dt: self.dt,
            seed: self.seed,
        }
    }
}

/// The dataset block of a `lyapnet train` config.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetDoc {
    pub n_train: usize,
    pub n_test: usize,
    pub noise: f64,
    pub seed: u64,
}

/// The optimizer block of a `lyapnet train` config.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainBlockDoc {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub seed: u64,
}

/// `lyapnet train` config: architecture + dataset + optimizer.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainDoc {
    pub hidden_width: usize,
    /// Transitions including the readout layer (≥ 2).
    pub depth: usize,
    pub activation: ActivationKind,
    #[serde(default = "default_plain")]
    pub update_form: UpdateForm,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub init_scale_s: f64,
    pub init_seed: u64,
    pub dataset: DatasetDoc,
    pub train: TrainBlockDoc,
}

fn default_plain() -> UpdateForm {
    UpdateForm::Plain
}

fn default_dt() -> f64 {
    1.0
}

impl TrainDoc {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            learning_rate: self.train.learning_rate,
            batch_size: self.train.batch_size,
            weight_decay: self.train.weight_decay,
            seed: self.train.seed,
        }
    }
}

/// Read and parse a JSON config file, attaching the path to diagnostics.
pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_owned(),
        source,
    })
}
