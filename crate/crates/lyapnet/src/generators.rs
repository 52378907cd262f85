//! Seeded network construction: random ensembles, delay embeddings,
//! magnitude pruning.
//!
//! [`generate`] draws constant-width networks whose weights are
//! Bernoulli-masked Gaussians — the ensemble family whose singular-value
//! scaling the experiments measure. Two normalizations are supported:
//!
//! * `None` — entries N(0, s²) where the mask fires; mean singular value
//!   of one layer grows as s·√D (quarter-circle law).
//! * `ColumnSum1` — masked entry *magnitudes* |N(0, s²)|, every column
//!   rescaled to sum exactly 1; mean singular value then falls as ~1/√D
//!   and the Frobenius norm is width-flat. (Signed rescaling would not do
//!   this: a signed Gaussian column sum concentrates near zero, giving the
//!   rescale factor a heavy-tailed distribution that wrecks the second
//!   moments the scaling law is about.)
//!
//! All sampling is ChaCha8-seeded and single-pass in a fixed order
//! (per layer: weight rows, then bias; degenerate ColumnSum1 columns are
//! resampled column-wise from the continuing stream), so identical configs
//! give byte-identical networks.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{
    ActivationKind, LayerActivation, LayerParams, NetworkSpec, UpdateForm,
};

/// Column treatment after masked Gaussian sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    None,
    ColumnSum1,
}

/// Everything that determines a generated network.
///
/// `depth_N` counts *states* y^[0..N−1] (so a network has depth_N − 1
/// transition layers; depth_N = 2 is the single-transition case the
/// scaling experiments use).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
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
}

impl GeneratorConfig {
    fn validate(&self) -> Result<()> {
        if self.width_d == 0 {
            return Err(Error::InvalidConfig("width_D must be >= 1".into()));
        }
        if self.depth_n < 2 {
            return Err(Error::InvalidConfig(
                "depth_N must be >= 2 (a network needs at least one transition)".into(),
            ));
        }
        if !(self.connectivity_p > 0.0 && self.connectivity_p <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "connectivity_p must be in (0, 1], got {}",
                self.connectivity_p
            )));
        }
        if !(self.weight_scale_s.is_finite() && self.weight_scale_s > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "weight_scale_s must be positive and finite, got {}",
                self.weight_scale_s
            )));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "dt must be positive and finite, got {}",
                self.dt
            )));
        }
        Ok(())
    }
}

const COLUMN_SUM_FLOOR: f64 = 1e-9;
const COLUMN_RESAMPLE_LIMIT: usize = 100;

/// Draw the network described by the config. Deterministic in the seed.
pub fn generate(cfg: &GeneratorConfig) -> Result<NetworkSpec> {
    cfg.validate()?;
    let d = cfg.width_d;
    let layers = cfg.depth_n - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let take_magnitude = cfg.normalization == Normalization::ColumnSum1;

    let mut built = Vec::with_capacity(layers);
    for _ in 0..layers {
        let mut weights = DMatrix::zeros(d, d);
        for r in 0..d {
            for c in 0..d {
                weights[(r, c)] = masked_entry(&mut rng, cfg, take_magnitude);
            }
        }
        let bias = DVector::from_fn(d, |_, _| {
            let n: f64 = StandardNormal.sample(&mut rng);
            cfg.weight_scale_s * n
        });
        if cfg.normalization == Normalization::ColumnSum1 {
            normalize_columns(&mut weights, &mut rng, cfg)?;
        }
        built.push(LayerParams::new(
            weights,
            bias,
            LayerActivation::uniform(cfg.activation),
        ));
    }
    NetworkSpec::new(cfg.update_form, cfg.dt, d, built)
}

fn masked_entry(rng: &mut ChaCha8Rng, cfg: &GeneratorConfig, take_magnitude: bool) -> f64 {
    let u: f64 = rng.random();
    if u < cfg.connectivity_p {
        let n: f64 = StandardNormal.sample(rng);
        let w = cfg.weight_scale_s * n;
        if take_magnitude {
            w.abs()
        } else {
            w
        }
    } else {
        0.0
    }
}

/// Rescale every column to sum exactly 1, resampling columns whose sum is
/// numerically degenerate (all entries masked out, possible at small p·D).
fn normalize_columns(
    weights: &mut DMatrix<f64>,
    rng: &mut ChaCha8Rng,
    cfg: &GeneratorConfig,
) -> Result<()> {
    let d = weights.nrows();
    for c in 0..d {
        let mut retries = 0;
        loop {
            let sum: f64 = weights.column(c).sum();
            if sum >= COLUMN_SUM_FLOOR {
                weights.column_mut(c).scale_mut(1.0 / sum);
                break;
            }
            if retries >= COLUMN_RESAMPLE_LIMIT {
                return Err(Error::DegenerateColumn { column: c, retries });
            }
            retries += 1;
            for r in 0..d {
                weights[(r, c)] = masked_entry(rng, cfg, true);
            }
        }
    }
    Ok(())
}

/// Widen a plain constant-width network with recorder rows: the new state
/// is (y ⊕ x) with x^[j] = y^[j−1].
///
/// Each transition becomes
///
/// ```text
/// [ y' ]   [ σ(K·y + ξ) ]          [ K  0 ]        [ ξ ]
/// [ x' ] = [     y      ]   W2 =   [ I  0 ] , b2 = [ 0 ]
/// ```
///
/// where the x rows carry an identity activation tail. x never feeds back
/// into y here, so the y-block trajectory is bit-identical to the original
/// network's; [`delay_embed_with_feedback`] adds a coupling block for
/// experiments that want the recorder to act back.
pub fn delay_embed(net: &NetworkSpec) -> Result<NetworkSpec> {
    let width = embed_width(net)?;
    build_embedding(net, width, None)
}

/// Delay embedding with a feedback block F: the y rows read F·x in
/// addition to K·y, i.e. W2 = [[K, F], [I, 0]].
pub fn delay_embed_with_feedback(net: &NetworkSpec, feedback: &DMatrix<f64>) -> Result<NetworkSpec> {
    let width = embed_width(net)?;
    if feedback.nrows() != width || feedback.ncols() != width {
        return Err(Error::DimensionMismatch {
            context: "delay_embed feedback block",
            expected: width,
            got: feedback.nrows().max(feedback.ncols()),
        });
    }
    build_embedding(net, width, Some(feedback))
}

fn embed_width(net: &NetworkSpec) -> Result<usize> {
    if net.update_form != UpdateForm::Plain {
        return Err(Error::InvalidConfig(
            "delay embedding is defined for plain update networks \
             (the recorder rows copy state; residual updates have no such copy)"
                .into(),
        ));
    }
    net.constant_width().ok_or_else(|| {
        Error::InvalidConfig("delay embedding needs a constant-width network".into())
    })
}

fn build_embedding(
    net: &NetworkSpec,
    d: usize,
    feedback: Option<&DMatrix<f64>>,
) -> Result<NetworkSpec> {
    let layers = net
        .layers
        .iter()
        .map(|layer| {
            let mut w2 = DMatrix::zeros(2 * d, 2 * d);
            w2.view_mut((0, 0), (d, d)).copy_from(&layer.weights);
            if let Some(f) = feedback {
                w2.view_mut((0, d), (d, d)).copy_from(f);
            }
            for i in 0..d {
                w2[(d + i, i)] = 1.0;
            }
            let mut b2 = DVector::zeros(2 * d);
            b2.rows_mut(0, d).copy_from(&layer.bias);
            LayerParams::new(
                w2,
                b2,
                LayerActivation {
                    kind: layer.activation.kind,
                    identity_tail: layer.activation.identity_tail + d,
                },
            )
        })
        .collect();
    NetworkSpec::new(UpdateForm::Plain, net.dt, 2 * d, layers)
}

/// Zero the given fraction of smallest-magnitude entries in every weight
/// row (ties broken by column index, lower columns pruned first). The
/// `seed` parameter is accepted for interface compatibility; magnitude
/// pruning is fully deterministic and ignores it.
pub fn prune(net: &NetworkSpec, fraction: f64, _seed: u64) -> Result<NetworkSpec> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidConfig(format!(
            "prune fraction must be in [0, 1), got {fraction}"
        )));
    }
    let mut out = net.clone();
    for layer in &mut out.layers {
        let cols = layer.weights.ncols();
        let kill = (fraction * cols as f64).floor() as usize;
        if kill == 0 {
            continue;
        }
        for r in 0..layer.weights.nrows() {
            let mut order: Vec<usize> = (0..cols).collect();
            order.sort_by(|&a, &b| {
                let ma = layer.weights[(r, a)].abs();
                let mb = layer.weights[(r, b)].abs();
                ma.partial_cmp(&mb)
                    .expect("validated weights are never NaN")
                    .then(a.cmp(&b))
            });
            for &c in order.iter().take(kill) {
                layer.weights[(r, c)] = 0.0;
            }
        }
    }
    Ok(out)
}
