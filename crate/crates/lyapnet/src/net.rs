//! Feedforward networks as discrete dynamical systems.
//!
//! A network is a sequence of layer maps acting on a state vector y:
//!
//! ```text
//! plain:     y' = σ(K·y + ξ)
//! residual:  y' = y + σ(K·y + ξ)·Δt
//! ```
//!
//! with per-layer weights K, bias ξ, and a pointwise activation σ. Running
//! the layers in order from an input state produces a [`Trajectory`] — the
//! object the spectral machinery differentiates along.
//!
//! Networks round-trip through a strict JSON format (unknown fields
//! rejected, dimensions validated on load):
//!
//! ```json
//! {
//!   "update_form": "plain",
//!   "dt": 1.0,
//!   "input_dim": 2,
//!   "layers": [
//!     {
//!       "weights": [[0.3, -1.2], [0.0, 0.5]],
//!       "bias": [0.0, 0.1],
//!       "activation": {"kind": "tanh", "param": 1.0}
//!     }
//!   ]
//! }
//! ```
//!
//! The activation object accepts one optional extension, `identity_tail`:
//! the last `identity_tail` rows of the layer skip σ and pass their
//! preactivation through unchanged. Ordinary networks omit it; delay
//! embeddings (see [`crate::generators::delay_embed`]) need it for their
//! recorder rows, which copy state rather than squash it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};

/// Pointwise activation functions and their derivatives.
///
/// Parameters are baked into the variant: steepness β for the S-shaped
/// kinds (σ and tanh evaluate at β·z), α for ELU's negative branch, β for
/// Swish's internal sigmoid. `SteepStep` is a sigmoid meant to be run at
/// large β, approximating a step with a derivative spike of height β/4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationKind {
    Identity,
    Sigmoid { steepness: f64 },
    Tanh { steepness: f64 },
    SteepStep { steepness: f64 },
    Relu,
    Elu { alpha: f64 },
    Swish { beta: f64 },
}

/// Numerically stable logistic function 1/(1+e^{-x}).
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl ActivationKind {
    /// σ(z).
    pub fn apply(&self, z: f64) -> f64 {
        match *self {
            ActivationKind::Identity => z,
            ActivationKind::Sigmoid { steepness } | ActivationKind::SteepStep { steepness } => {
                sigmoid(steepness * z)
            }
            ActivationKind::Tanh { steepness } => (steepness * z).tanh(),
            ActivationKind::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            ActivationKind::Elu { alpha } => {
                if z > 0.0 {
                    z
                } else {
                    alpha * (z.exp() - 1.0)
                }
            }
            ActivationKind::Swish { beta } => z * sigmoid(beta * z),
        }
    }

    /// σ′(z).
    ///
    /// Conventions at the non-smooth points: ReLU′(0) = 0 (the kink sits on
    /// the zero branch), ELU′(0) = α (the negative branch's limit; equal to
    /// the positive branch's 1 exactly when α = 1).
    pub fn derivative(&self, z: f64) -> f64 {
        match *self {
            ActivationKind::Identity => 1.0,
            ActivationKind::Sigmoid { steepness } | ActivationKind::SteepStep { steepness } => {
                let s = sigmoid(steepness * z);
                steepness * s * (1.0 - s)
            }
            ActivationKind::Tanh { steepness } => {
                let t = (steepness * z).tanh();
                steepness * (1.0 - t * t)
            }
            ActivationKind::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Elu { alpha } => {
                if z > 0.0 {
                    1.0
                } else {
                    alpha * z.exp()
                }
            }
            ActivationKind::Swish { beta } => {
                let s = sigmoid(beta * z);
                s + beta * z * s * (1.0 - s)
            }
        }
    }

    /// Whether σ is differentiable everywhere (ReLU's kink is the one
    /// exception in the catalogue; ELU is C¹ for every α).
    pub fn is_smooth(&self) -> bool {
        !matches!(self, ActivationKind::Relu)
    }

    /// The JSON `kind` tag.
    pub fn name(&self) -> &'static str {
        match self {
            ActivationKind::Identity => "identity",
            ActivationKind::Sigmoid { .. } => "sigmoid",
            ActivationKind::Tanh { .. } => "tanh",
            ActivationKind::SteepStep { .. } => "steep_step",
            ActivationKind::Relu => "relu",
            ActivationKind::Elu { .. } => "elu",
            ActivationKind::Swish { .. } => "swish",
        }
    }

    /// The JSON `param` value; `None` for parameterless kinds.
    pub fn param(&self) -> Option<f64> {
        match *self {
            ActivationKind::Identity | ActivationKind::Relu => None,
            ActivationKind::Sigmoid { steepness }
            | ActivationKind::Tanh { steepness }
            | ActivationKind::SteepStep { steepness } => Some(steepness),
            ActivationKind::Elu { alpha } => Some(alpha),
            ActivationKind::Swish { beta } => Some(beta),
        }
    }

    /// Build from the JSON `kind`/`param` pair.
    ///
    /// Parameterless kinds reject a supplied param; parameterized kinds
    /// default when it is omitted (sigmoid/tanh 1, steep_step 50, elu 1,
    /// swish 1) and require it positive and finite when given.
    pub fn from_parts(kind: &str, param: Option<f64>) -> Result<Self> {
        if let Some(p) = param {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "activation param must be positive and finite, got {p}"
                )));
            }
        }
        match kind {
            "identity" | "relu" => {
                if param.is_some() {
                    return Err(Error::InvalidConfig(format!(
                        "activation kind {kind:?} takes no param"
                    )));
                }
                Ok(match kind {
                    "identity" => ActivationKind::Identity,
                    _ => ActivationKind::Relu,
                })
            }
            "sigmoid" => Ok(ActivationKind::Sigmoid {
                steepness: param.unwrap_or(1.0),
            }),
            "tanh" => Ok(ActivationKind::Tanh {
                steepness: param.unwrap_or(1.0),
            }),
            "steep_step" => Ok(ActivationKind::SteepStep {
                steepness: param.unwrap_or(50.0),
            }),
            "elu" => Ok(ActivationKind::Elu {
                alpha: param.unwrap_or(1.0),
            }),
            "swish" => Ok(ActivationKind::Swish {
                beta: param.unwrap_or(1.0),
            }),
            other => Err(Error::InvalidConfig(format!(
                "unknown activation kind {other:?} \
                 (expected identity, sigmoid, tanh, steep_step, relu, elu, or swish)"
            ))),
        }
    }
}

// In configs an activation stands alone as {"kind": ..., "param": ...}
// (no identity_tail — that is a network-file concern).
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActKindJson {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    param: Option<f64>,
}

impl Serialize for ActivationKind {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ActKindJson {
            kind: self.name().to_owned(),
            param: self.param(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ActivationKind {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = ActKindJson::deserialize(deserializer)?;
        ActivationKind::from_parts(&raw.kind, raw.param).map_err(serde::de::Error::custom)
    }
}

/// How a layer's rows map preactivation to output.
///
/// All rows use `kind` except the last `identity_tail` rows, which pass
/// their preactivation through unchanged (σ = id, σ′ = 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerActivation {
    pub kind: ActivationKind,
    pub identity_tail: usize,
}

impl LayerActivation {
    /// Every row uses `kind`.
    pub fn uniform(kind: ActivationKind) -> Self {
        LayerActivation {
            kind,
            identity_tail: 0,
        }
    }

    /// The kind governing `row` in a layer with `rows` rows.
    pub fn row_kind(&self, row: usize, rows: usize) -> ActivationKind {
        if row >= rows - self.identity_tail {
            ActivationKind::Identity
        } else {
            self.kind
        }
    }
}

/// Plain (y′ = σ(Ky+ξ)) or residual (y′ = y + σ(Ky+ξ)·Δt) layer update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateForm {
    Plain,
    Residual,
}

/// One layer: weights K (D_out × D_in), bias ξ (D_out), activation.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub activation: LayerActivation,
}

impl LayerParams {
    pub fn new(weights: DMatrix<f64>, bias: DVector<f64>, activation: LayerActivation) -> Self {
        LayerParams {
            weights,
            bias,
            activation,
        }
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    /// z = K·y + ξ.
    pub fn preactivation(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.weights * y + &self.bias
    }

    /// σ applied row-wise to a preactivation.
    pub fn activate(&self, z: &DVector<f64>) -> DVector<f64> {
        let rows = z.len();
        DVector::from_fn(rows, |i, _| self.activation.row_kind(i, rows).apply(z[i]))
    }

    /// σ′ row-wise — the diagonal of the activation's Jacobian at z.
    pub fn activation_derivative(&self, z: &DVector<f64>) -> DVector<f64> {
        let rows = z.len();
        DVector::from_fn(rows, |i, _| {
            self.activation.row_kind(i, rows).derivative(z[i])
        })
    }
}

/// A full network: ordered layers plus the update form and Δt they share.
///
/// Structural invariants (checked by [`NetworkSpec::new`] and on every
/// JSON load): at least one layer, consecutive dimensions telescope from
/// `input_dim`, bias lengths match row counts, every entry finite, Δt
/// positive and finite, residual layers square, identity tails within
/// their layers.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub update_form: UpdateForm,
    pub dt: f64,
    pub input_dim: usize,
    pub layers: Vec<LayerParams>,
}

impl NetworkSpec {
    pub fn new(
        update_form: UpdateForm,
        dt: f64,
        input_dim: usize,
        layers: Vec<LayerParams>,
    ) -> Result<Self> {
        let net = NetworkSpec {
            update_form,
            dt,
            input_dim,
            layers,
        };
        net.validate()?;
        Ok(net)
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidNetwork("input_dim must be >= 1".into()));
        }
        if self.layers.is_empty() {
            return Err(Error::InvalidNetwork("network has no layers".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidNetwork(format!(
                "dt must be positive and finite, got {}",
                self.dt
            )));
        }
        let mut dim = self.input_dim;
        for (q, layer) in self.layers.iter().enumerate() {
            if layer.in_dim() != dim {
                return Err(Error::InvalidNetwork(format!(
                    "layer {q} expects input dim {}, previous width is {dim}",
                    layer.in_dim()
                )));
            }
            if layer.bias.len() != layer.out_dim() {
                return Err(Error::InvalidNetwork(format!(
                    "layer {q}: bias length {} != weight rows {}",
                    layer.bias.len(),
                    layer.out_dim()
                )));
            }
            if layer.activation.identity_tail > layer.out_dim() {
                return Err(Error::InvalidNetwork(format!(
                    "layer {q}: identity_tail {} exceeds {} rows",
                    layer.activation.identity_tail,
                    layer.out_dim()
                )));
            }
            if self.update_form == UpdateForm::Residual && layer.in_dim() != layer.out_dim() {
                return Err(Error::InvalidNetwork(format!(
                    "layer {q}: residual update needs square layers, got {}x{}",
                    layer.out_dim(),
                    layer.in_dim()
                )));
            }
            if layer.weights.iter().any(|w| !w.is_finite())
                || layer.bias.iter().any(|b| !b.is_finite())
            {
                return Err(Error::InvalidNetwork(format!(
                    "layer {q} contains non-finite parameters"
                )));
            }
            dim = layer.out_dim();
        }
        Ok(())
    }

    /// Number of transition layers.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Final-state dimension.
    pub fn output_dim(&self) -> usize {
        self.layers.last().map(LayerParams::out_dim).unwrap_or(0)
    }

    /// The common width if every state has the same dimension.
    pub fn constant_width(&self) -> Option<usize> {
        let d = self.input_dim;
        self.layers
            .iter()
            .all(|l| l.in_dim() == d && l.out_dim() == d)
            .then_some(d)
    }

    /// Apply layer q to a state.
    pub fn step(&self, q: usize, y: &DVector<f64>) -> Result<DVector<f64>> {
        let layer = self.layers.get(q).ok_or(Error::DepthOutOfRange {
            depth: q,
            max: self.depth().saturating_sub(1),
        })?;
        if y.len() != layer.in_dim() {
            return Err(Error::DimensionMismatch {
                context: "step input",
                expected: layer.in_dim(),
                got: y.len(),
            });
        }
        let z = layer.preactivation(y);
        let a = layer.activate(&z);
        Ok(match self.update_form {
            UpdateForm::Plain => a,
            UpdateForm::Residual => y + a * self.dt,
        })
    }

    /// Run every layer from y0, recording all states y^[0..depth].
    ///
    /// Non-finite propagation is an error naming the offending layer.
    pub fn forward(&self, y0: &DVector<f64>) -> Result<Trajectory> {
        if y0.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "forward input",
                expected: self.input_dim,
                got: y0.len(),
            });
        }
        let mut states = Vec::with_capacity(self.depth() + 1);
        states.push(y0.clone());
        for q in 0..self.depth() {
            let next = self.step(q, &states[q])?;
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState {
                    layer: q,
                    input_id: None,
                });
            }
            states.push(next);
        }
        Ok(Trajectory {
            states,
            input_id: None,
        })
    }

    /// Serialize to the canonical JSON document (pretty, trailing newline).
    pub fn to_json_string(&self) -> String {
        let raw = RawNetwork::from(self);
        let mut s = serde_json::to_string_pretty(&raw).expect("network serialization is total");
        s.push('\n');
        s
    }

    /// Parse and validate the JSON document format.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RawNetwork = serde_json::from_str(text).map_err(|source| Error::Json {
            path: "<string>".into(),
            source,
        })?;
        raw.try_into()
    }

    /// Load from a JSON file, attaching the path to any diagnostics.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?;
        let raw: RawNetwork = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_owned(),
            source,
        })?;
        raw.try_into()
    }

    /// Write the canonical JSON document atomically (temp file + rename).
    pub fn save(&self, path: &Path) -> Result<()> {
        crate::report::write_atomic(path, self.to_json_string().as_bytes())
    }
}

/// The states y^[0], y^[1], …, y^[j_end] produced by [`NetworkSpec::forward`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    /// Caller-assigned tag (e.g. the row index of a batch input file).
    pub input_id: Option<usize>,
}

impl Trajectory {
    /// Number of transitions taken (states − 1).
    pub fn depth(&self) -> usize {
        self.states.len() - 1
    }

    pub fn with_input_id(mut self, id: usize) -> Self {
        self.input_id = Some(id);
        self
    }
}

// --- JSON mirror ------------------------------------------------------------
//
// The on-disk schema is strict: exactly these fields, unknown fields
// rejected, semantic validation (dimensions, finiteness) on conversion.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    update_form: UpdateForm,
    dt: f64,
    input_dim: usize,
    layers: Vec<RawLayer>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    activation: RawActivation,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RawActivation {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<f64>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub identity_tail: usize,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

impl RawActivation {
    pub(crate) fn to_layer_activation(&self) -> Result<LayerActivation> {
        Ok(LayerActivation {
            kind: ActivationKind::from_parts(&self.kind, self.param)?,
            identity_tail: self.identity_tail,
        })
    }
}

impl From<&LayerActivation> for RawActivation {
    fn from(a: &LayerActivation) -> Self {
        RawActivation {
            kind: a.kind.name().to_owned(),
            param: a.kind.param(),
            identity_tail: a.identity_tail,
        }
    }
}

impl From<&NetworkSpec> for RawNetwork {
    fn from(net: &NetworkSpec) -> Self {
        RawNetwork {
            update_form: net.update_form,
            dt: net.dt,
            input_dim: net.input_dim,
            layers: net
                .layers
                .iter()
                .map(|l| RawLayer {
                    weights: (0..l.weights.nrows())
                        .map(|r| l.weights.row(r).iter().copied().collect())
                        .collect(),
                    bias: l.bias.iter().copied().collect(),
                    activation: RawActivation::from(&l.activation),
                })
                .collect(),
        }
    }
}

impl TryFrom<RawNetwork> for NetworkSpec {
    type Error = Error;

    fn try_from(raw: RawNetwork) -> Result<Self> {
        let mut layers = Vec::with_capacity(raw.layers.len());
        for (q, layer) in raw.layers.iter().enumerate() {
            let rows = layer.weights.len();
            if rows == 0 {
                return Err(Error::InvalidNetwork(format!("layer {q}: empty weights")));
            }
            let cols = layer.weights[0].len();
            if cols == 0 {
                return Err(Error::InvalidNetwork(format!(
                    "layer {q}: zero-width weight rows"
                )));
            }
            if let Some(r) = layer.weights.iter().position(|row| row.len() != cols) {
                return Err(Error::InvalidNetwork(format!(
                    "layer {q}: weight row {r} has {} entries, expected {cols}",
                    layer.weights[r].len()
                )));
            }
            let weights = DMatrix::from_fn(rows, cols, |r, c| layer.weights[r][c]);
            let bias = DVector::from_vec(layer.bias.clone());
            layers.push(LayerParams::new(
                weights,
                bias,
                layer.activation.to_layer_activation()?,
            ));
        }
        NetworkSpec::new(raw.update_form, raw.dt, raw.input_dim, layers)
    }
}

impl Serialize for NetworkSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        RawNetwork::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for NetworkSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = RawNetwork::deserialize(deserializer)?;
        raw.try_into().map_err(serde::de::Error::custom)
    }
}
