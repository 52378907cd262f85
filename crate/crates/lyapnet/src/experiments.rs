//! Scripted, seeded studies of how the FTLE spectrum responds to
//! architecture knobs, emitting deterministic CSV + meta.json pairs.
//!
//! Five studies ship:
//!
//! * **width-scaling** — mean singular value and Frobenius norm of the
//!   depth-1 sensitivity matrix vs width D, with ln-ln least-squares
//!   slopes. Unnormalized Gaussian layers should give slope ≈ +1/2
//!   (quarter-circle: E μ = (8/3π)·s·√D) and Frobenius exponent ≈ 1;
//!   ColumnSum1 layers ≈ −1/2 and ≈ 0.
//! * **activation** — distribution of max λ per activation kind at a
//!   matched config (same weights, same input, only σ differs).
//! * **depth-profile** — λ statistics along the layer axis.
//! * **overfit** — paired training runs with/without weight decay; max λ
//!   of the trained network averaged over its training inputs, plus
//!   held-out error.
//! * **prune** — max λ as magnitude pruning removes row entries.
//!
//! Directional claims (spike activations vs ReLU, decay lowering max λ,
//! pruning damping |λ₁|) are *recorded* — expectation text plus observed
//! fraction in the meta — never gated: they are tendencies, not theorems.
//!
//! Every study is a pure function of its config: tasks fan out over a
//! (knob × seed) grid with per-task ChaCha streams derived from the master
//! seed and grid coordinates, and rows are assembled in grid order no
//! matter how the parallel scheduler interleaves.

use nalgebra::DVector;
use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::generators::{generate, prune, GeneratorConfig, Normalization};
use crate::jacobian::chain;
use crate::net::{ActivationKind, UpdateForm};
use crate::report::{fmt_float, write_atomic};
use crate::rng::rng_for;
use crate::spectral::{analyze, explicit_sensitivity, singular_values};
use crate::trainer::{init_mlp, make_dataset, mean_loss, train, DatasetKind, TrainConfig};

const VERSION: &str = env!("CARGO_PKG_VERSION");
const WEIGHT_FAMILY: &str = "gaussian";

fn default_plain() -> UpdateForm {
    UpdateForm::Plain
}

fn default_dt() -> f64 {
    1.0
}

fn default_identity() -> ActivationKind {
    ActivationKind::Identity
}

fn default_p_one() -> f64 {
    1.0
}

/// ln-ln least-squares: slope and RMS residual of ln y against ln x.
fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidConfig(
            "log-log fit needs at least two points".into(),
        ));
    }
    if ys.iter().any(|&y| !(y.is_finite() && y > 0.0)) {
        return Err(Error::Numeric(
            "log-log fit: non-positive or non-finite means".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in lx.iter().zip(&ly) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss = 0.0;
    for (x, y) in lx.iter().zip(&ly) {
        let r = y - (intercept + slope * x);
        ss += r * r;
    }
    Ok((slope, (ss / n).sqrt()))
}

/// Standard-normal input state for a task stream.
fn normal_input(rng: &mut ChaCha8Rng, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| StandardNormal.sample(rng))
}

fn write_pair(dir: &Path, name: &str, csv: &str, meta: &impl Serialize) -> Result<Vec<PathBuf>> {
    let csv_path = dir.join(format!("{name}.csv"));
    let meta_path = dir.join(format!("{name}.meta.json"));
    write_atomic(&csv_path, csv.as_bytes())?;
    let mut meta_text =
        serde_json::to_string_pretty(meta).expect("experiment meta serialization is total");
    meta_text.push('\n');
    write_atomic(&meta_path, meta_text.as_bytes())?;
    Ok(vec![csv_path, meta_path])
}

// --- width scaling -----------------------------------------------------------

/// Knobs for the width-scaling study.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WidthScalingConfig {
    pub widths: Vec<usize>,
    #[serde(default = "default_p_one")]
    pub connectivity_p: f64,
    pub weight_scale_s: f64,
    pub normalization: Normalization,
    /// Transitions chained before measuring (the gated fits use 1).
    pub depth: usize,
    /// Seeds per width.
    pub seeds: usize,
    pub master_seed: u64,
    #[serde(default = "default_identity")]
    pub activation: ActivationKind,
    #[serde(default = "default_plain")]
    pub update_form: UpdateForm,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

/// Fitted scaling law over one knob.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingResult {
    pub knob: String,
    pub values: Vec<f64>,
    /// Mean singular value per knob setting (over seeds and spectrum).
    pub means: Vec<f64>,
    pub fitted_exponent: f64,
    pub fit_residual: f64,
    pub seeds_per_point: usize,
    /// Mean Frobenius norm per knob setting and its own ln-ln slope.
    pub frobenius_means: Vec<f64>,
    pub frobenius_exponent: f64,
    pub frobenius_residual: f64,
    /// Mean of the largest singular value, emitted for reference.
    pub max_mu_means: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WidthScalingRow {
    pub width: usize,
    pub seed: usize,
    pub mean_mu: f64,
    pub max_mu: f64,
    pub frobenius: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WidthScalingReport {
    pub experiment: &'static str,
    pub version: &'static str,
    pub weight_family: &'static str,
    pub config: WidthScalingConfig,
    pub result: ScalingResult,
    #[serde(skip)]
    pub rows: Vec<WidthScalingRow>,
}

/// Measure mean-μ and Frobenius scaling against width.
pub fn width_scaling(cfg: &WidthScalingConfig) -> Result<WidthScalingReport> {
    if cfg.widths.len() < 4 {
        return Err(Error::InvalidConfig("width_scaling needs >= 4 widths".into()));
    }
    if !cfg.widths.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidConfig(
            "widths must be strictly increasing".into(),
        ));
    }
    if cfg.seeds < 10 {
        return Err(Error::InvalidConfig(
            "width_scaling needs >= 10 seeds per width".into(),
        ));
    }
    if cfg.depth == 0 {
        return Err(Error::InvalidConfig("depth must be >= 1".into()));
    }

    let tasks: Vec<(usize, usize)> = (0..cfg.widths.len())
        .flat_map(|wi| (0..cfg.seeds).map(move |si| (wi, si)))
        .collect();
    let rows: Vec<WidthScalingRow> = tasks
        .par_iter()
        .map(|&(wi, si)| -> Result<WidthScalingRow> {
            let width = cfg.widths[wi];
            let mut rng = rng_for(cfg.master_seed, wi as u64, si as u64);
            let net = generate(&GeneratorConfig {
                width_d: width,
                depth_n: cfg.depth + 1,
                connectivity_p: cfg.connectivity_p,
                weight_scale_s: cfg.weight_scale_s,
                normalization: cfg.normalization,
                activation: cfg.activation,
                update_form: cfg.update_form,
                dt: cfg.dt,
                seed: rng.next_u64(),
            })?;
            let y0 = normal_input(&mut rng, width);
            let traj = net.forward(&y0)?;
            let jc = chain(&net, &traj, cfg.depth)?;
            let m = explicit_sensitivity(&jc)?;
            let mu = singular_values(&m)?;
            let mean_mu = mu.iter().sum::<f64>() / mu.len() as f64;
            Ok(WidthScalingRow {
                width,
                seed: si,
                mean_mu,
                max_mu: mu[0],
                frobenius: m.norm(),
            })
        })
        .collect::<Result<_>>()?;

    let per_point = |f: &dyn Fn(&WidthScalingRow) -> f64| -> Vec<f64> {
        (0..cfg.widths.len())
            .map(|wi| {
                let slice = &rows[wi * cfg.seeds..(wi + 1) * cfg.seeds];
                slice.iter().map(|r| f(r)).sum::<f64>() / cfg.seeds as f64
            })
            .collect()
    };
    let means = per_point(&|r| r.mean_mu);
    let frob_means = per_point(&|r| r.frobenius);
    let max_means = per_point(&|r| r.max_mu);
    let xs: Vec<f64> = cfg.widths.iter().map(|&w| w as f64).collect();
    let (exponent, residual) = fit_loglog(&xs, &means)?;
    let (f_exp, f_res) = fit_loglog(&xs, &frob_means)?;

    Ok(WidthScalingReport {
        experiment: "width-scaling",
        version: VERSION,
        weight_family: WEIGHT_FAMILY,
        config: cfg.clone(),
        result: ScalingResult {
            knob: "width".into(),
            values: xs,
            means,
            fitted_exponent: exponent,
            fit_residual: residual,
            seeds_per_point: cfg.seeds,
            frobenius_means: frob_means,
            frobenius_exponent: f_exp,
            frobenius_residual: f_res,
            max_mu_means: max_means,
        },
        rows,
    })
}

impl WidthScalingReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("width,seed,mean_mu,max_mu,frobenius\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.width,
                r.seed,
                fmt_float(r.mean_mu),
                fmt_float(r.max_mu),
                fmt_float(r.frobenius)
            ));
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        write_pair(dir, self.experiment, &self.csv(), self)
    }
}

// --- activation comparison ---------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivationComparisonConfig {
    pub kinds: Vec<ActivationKind>,
    /// Transitions chained before measuring max λ.
    pub depth: usize,
    pub width: usize,
    pub weight_scale_s: f64,
    pub seeds: usize,
    pub master_seed: u64,
    #[serde(default = "default_p_one")]
    pub connectivity_p: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ActivationRow {
    pub kind: String,
    pub seed: usize,
    pub max_lambda: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ActivationSummary {
    /// (kind, lower median of max λ over seeds).
    pub medians: Vec<(String, f64)>,
    /// Directional expectation under test, recorded not gated.
    pub directional_expectation: &'static str,
    /// Fraction of seeds where SteepStep(50) max λ > ReLU max λ; present
    /// only when both kinds are in the study.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steep_step_above_relu_fraction: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ActivationReport {
    pub experiment: &'static str,
    pub version: &'static str,
    pub weight_family: &'static str,
    pub config: ActivationComparisonConfig,
    pub summary: ActivationSummary,
    #[serde(skip)]
    pub rows: Vec<ActivationRow>,
}

/// Distribution of max λ per activation kind, at matched weights/input:
/// the network draw depends only on the seed index, so kind rows with the
/// same seed share K, ξ, and y0 and differ purely in σ.
pub fn activation_comparison(cfg: &ActivationComparisonConfig) -> Result<ActivationReport> {
    if cfg.kinds.is_empty() {
        return Err(Error::InvalidConfig("no activation kinds given".into()));
    }
    if cfg.seeds < 20 {
        return Err(Error::InvalidConfig(
            "activation comparison needs >= 20 seeds".into(),
        ));
    }
    if cfg.depth == 0 || cfg.width == 0 {
        return Err(Error::InvalidConfig("depth and width must be >= 1".into()));
    }

    let tasks: Vec<(usize, usize)> = (0..cfg.kinds.len())
        .flat_map(|ki| (0..cfg.seeds).map(move |si| (ki, si)))
        .collect();
    let rows: Vec<ActivationRow> = tasks
        .par_iter()
        .map(|&(ki, si)| -> Result<ActivationRow> {
            // Matched config: the stream ignores the kind index.
            let mut rng = rng_for(cfg.master_seed, 0, si as u64);
            let net = generate(&GeneratorConfig {
                width_d: cfg.width,
                depth_n: cfg.depth + 1,
                connectivity_p: cfg.connectivity_p,
                weight_scale_s: cfg.weight_scale_s,
                normalization: Normalization::None,
                activation: cfg.kinds[ki],
                update_form: UpdateForm::Plain,
                dt: cfg.dt,
                seed: rng.next_u64(),
            })?;
            let y0 = normal_input(&mut rng, cfg.width);
            let (_, _, report) = analyze(&net, &y0, cfg.depth)?;
            Ok(ActivationRow {
                kind: cfg.kinds[ki].name().to_owned(),
                seed: si,
                max_lambda: report.max_exponent,
            })
        })
        .collect::<Result<_>>()?;

    let medians: Vec<(String, f64)> = cfg
        .kinds
        .iter()
        .enumerate()
        .map(|(ki, kind)| {
            let mut vals: Vec<f64> = rows[ki * cfg.seeds..(ki + 1) * cfg.seeds]
                .iter()
                .map(|r| r.max_lambda)
                .collect();
            vals.sort_by(|a, b| a.partial_cmp(b).expect("max lambda is never NaN"));
            (kind.name().to_owned(), vals[(vals.len() - 1) / 2])
        })
        .collect();

    let steep = cfg
        .kinds
        .iter()
        .position(|k| matches!(k, ActivationKind::SteepStep { .. }));
    let relu = cfg.kinds.iter().position(|k| *k == ActivationKind::Relu);
    let fraction = match (steep, relu) {
        (Some(a), Some(b)) => {
            let above = (0..cfg.seeds)
                .filter(|si| {
                    rows[a * cfg.seeds + si].max_lambda > rows[b * cfg.seeds + si].max_lambda
                })
                .count();
            Some(above as f64 / cfg.seeds as f64)
        }
        _ => None,
    };

    Ok(ActivationReport {
        experiment: "activation",
        version: VERSION,
        weight_family: WEIGHT_FAMILY,
        config: cfg.clone(),
        summary: ActivationSummary {
            medians,
            directional_expectation:
                "steep S-shaped activations (narrow transition, large derivative spike) \
                 produce a larger max FTLE than the ReLU family at matched weights",
            steep_step_above_relu_fraction: fraction,
        },
        rows,
    })
}

impl ActivationReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("kind,seed,max_lambda\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.kind, r.seed, fmt_float(r.max_lambda)));
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        write_pair(dir, self.experiment, &self.csv(), self)
    }
}

// --- depth profile -----------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthProfileConfig {
    pub width: usize,
    pub depths: Vec<usize>,
    pub weight_scale_s: f64,
    pub activation: ActivationKind,
    pub seeds: usize,
    pub master_seed: u64,
    #[serde(default = "default_p_one")]
    pub connectivity_p: f64,
    pub normalization: Normalization,
    #[serde(default = "default_plain")]
    pub update_form: UpdateForm,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DepthProfileRow {
    pub depth: usize,
    pub seed: usize,
    pub max_lambda: f64,
    /// Arithmetic mean of the spectrum (−∞ when any μ is exactly zero).
    pub mean_lambda: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DepthPoint {
    pub depth: usize,
    pub mean_max_lambda: f64,
    pub max_max_lambda: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DepthProfileReport {
    pub experiment: &'static str,
    pub version: &'static str,
    pub weight_family: &'static str,
    pub config: DepthProfileConfig,
    pub per_depth: Vec<DepthPoint>,
    #[serde(skip)]
    pub rows: Vec<DepthProfileRow>,
}

/// λ statistics along the depth axis: one network per seed, spectra at
/// every requested prefix depth of the same trajectory.
pub fn depth_profile(cfg: &DepthProfileConfig) -> Result<DepthProfileReport> {
    if cfg.depths.is_empty() || cfg.depths[0] == 0 {
        return Err(Error::InvalidConfig("depths must start at >= 1".into()));
    }
    if !cfg.depths.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidConfig(
            "depths must be strictly increasing".into(),
        ));
    }
    if cfg.seeds == 0 {
        return Err(Error::InvalidConfig("seeds must be >= 1".into()));
    }
    let max_depth = *cfg.depths.last().expect("non-empty depths");

    let per_seed: Vec<Vec<DepthProfileRow>> = (0..cfg.seeds)
        .into_par_iter()
        .map(|si| -> Result<Vec<DepthProfileRow>> {
            let mut rng = rng_for(cfg.master_seed, 0, si as u64);
            let net = generate(&GeneratorConfig {
                width_d: cfg.width,
                depth_n: max_depth + 1,
                connectivity_p: cfg.connectivity_p,
                weight_scale_s: cfg.weight_scale_s,
                normalization: cfg.normalization,
                activation: cfg.activation,
                update_form: cfg.update_form,
                dt: cfg.dt,
                seed: rng.next_u64(),
            })?;
            let y0 = normal_input(&mut rng, cfg.width);
            cfg.depths
                .iter()
                .map(|&j| {
                    let (_, spec, report) = analyze(&net, &y0, j)?;
                    let mean_lambda =
                        spec.exponents.iter().sum::<f64>() / spec.exponents.len() as f64;
                    Ok(DepthProfileRow {
                        depth: j,
                        seed: si,
                        max_lambda: report.max_exponent,
                        mean_lambda,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    // Reassemble in (depth, seed) order.
    let mut rows = Vec::with_capacity(cfg.depths.len() * cfg.seeds);
    for di in 0..cfg.depths.len() {
        for seed_rows in &per_seed {
            rows.push(seed_rows[di].clone());
        }
    }

    let per_depth: Vec<DepthPoint> = cfg
        .depths
        .iter()
        .enumerate()
        .map(|(di, &depth)| {
            let slice = &rows[di * cfg.seeds..(di + 1) * cfg.seeds];
            DepthPoint {
                depth,
                mean_max_lambda: slice.iter().map(|r| r.max_lambda).sum::<f64>()
                    / cfg.seeds as f64,
                max_max_lambda: slice
                    .iter()
                    .map(|r| r.max_lambda)
                    .fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();

    Ok(DepthProfileReport {
        experiment: "depth-profile",
        version: VERSION,
        weight_family: WEIGHT_FAMILY,
        config: cfg.clone(),
        per_depth,
        rows,
    })
}

impl DepthProfileReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("depth,seed,max_lambda,mean_lambda\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.depth,
                r.seed,
                fmt_float(r.max_lambda),
                fmt_float(r.mean_lambda)
            ));
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        write_pair(dir, self.experiment, &self.csv(), self)
    }
}

// --- overfit study -----------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverfitStudyConfig {
    pub dataset: DatasetKind,
    pub n_train: usize,
    pub n_test: usize,
    pub noise: f64,
    pub hidden_width: usize,
    /// Transitions including the embedding and readout layers.
    pub depth: usize,
    pub activation: ActivationKind,
    pub init_scale_s: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Decay of the regularized variant (baseline trains at 0).
    pub weight_decay: f64,
    pub seeds: usize,
    pub master_seed: u64,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OverfitRow {
    pub seed: usize,
    /// "baseline" or "weight_decay".
    pub variant: &'static str,
    pub final_loss: f64,
    pub test_error: f64,
    /// Max λ at full depth, averaged over the training inputs.
    pub max_lambda_train_mean: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OverfitSummary {
    pub directional_expectation: &'static str,
    /// Fraction of convergent pairs where the regularized variant has the
    /// lower training-input max λ.
    pub decay_lowers_max_lambda_fraction: f64,
    pub convergent_pairs: usize,
    /// Fraction of rows with all statistics finite.
    pub finite_fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OverfitReport {
    pub experiment: &'static str,
    pub version: &'static str,
    pub weight_family: &'static str,
    pub config: OverfitStudyConfig,
    pub summary: OverfitSummary,
    #[serde(skip)]
    pub rows: Vec<OverfitRow>,
}

/// Paired with/without-weight-decay training runs; identical data, init,
/// and batch order within a pair.
pub fn overfit_study(cfg: &OverfitStudyConfig) -> Result<OverfitReport> {
    if cfg.seeds == 0 {
        return Err(Error::InvalidConfig("seeds must be >= 1".into()));
    }
    if !(cfg.weight_decay.is_finite() && cfg.weight_decay > 0.0) {
        return Err(Error::InvalidConfig(
            "overfit study needs weight_decay > 0 for the regularized variant".into(),
        ));
    }
    let (in_dim, out_dim) = match cfg.dataset {
        DatasetKind::NoisySine => (1, 1),
        DatasetKind::TwoClusters => (2, 2),
    };

    let per_seed: Vec<[OverfitRow; 2]> = (0..cfg.seeds)
        .into_par_iter()
        .map(|si| -> Result<[OverfitRow; 2]> {
            let train_data = make_dataset(
                cfg.dataset,
                cfg.n_train,
                cfg.noise,
                crate::rng::derive_seed(cfg.master_seed, 1, si as u64),
            )?;
            let test_data = make_dataset(
                cfg.dataset,
                cfg.n_test,
                cfg.noise,
                crate::rng::derive_seed(cfg.master_seed, 2, si as u64),
            )?;
            let net0 = init_mlp(
                in_dim,
                cfg.hidden_width,
                out_dim,
                cfg.depth,
                cfg.activation,
                UpdateForm::Plain,
                cfg.dt,
                cfg.init_scale_s,
                crate::rng::derive_seed(cfg.master_seed, 3, si as u64),
            )?;
            let train_seed = crate::rng::derive_seed(cfg.master_seed, 4, si as u64);
            let variants = [("baseline", 0.0), ("weight_decay", cfg.weight_decay)];
            let mut out = Vec::with_capacity(2);
            for (name, wd) in variants {
                let tc = TrainConfig {
                    epochs: cfg.epochs,
                    learning_rate: cfg.learning_rate,
                    batch_size: cfg.batch_size,
                    weight_decay: wd,
                    seed: train_seed,
                };
                out.push(match train(&net0, &train_data, &tc) {
                    Ok((trained, history)) => {
                        let final_loss = *history.last().expect("non-empty history");
                        let test_error = mean_loss(&trained, &test_data)?;
                        let mut lam_sum = 0.0;
                        for x in &train_data.inputs {
                            let (_, _, rep) = analyze(&trained, x, cfg.depth)?;
                            lam_sum += rep.max_exponent;
                        }
                        let lam_mean = lam_sum / train_data.len() as f64;
                        OverfitRow {
                            seed: si,
                            variant: name,
                            final_loss,
                            test_error,
                            max_lambda_train_mean: lam_mean,
                            diverged: false,
                        }
                    }
                    Err(Error::TrainingDiverged { .. }) => OverfitRow {
                        seed: si,
                        variant: name,
                        final_loss: f64::NAN,
                        test_error: f64::NAN,
                        max_lambda_train_mean: f64::NAN,
                        diverged: true,
                    },
                    Err(e) => return Err(e),
                });
            }
            Ok([out.remove(0), out.remove(0)])
        })
        .collect::<Result<_>>()?;

    let rows: Vec<OverfitRow> = per_seed.into_iter().flatten().collect();
    let mut convergent_pairs = 0;
    let mut decay_lower = 0;
    for si in 0..cfg.seeds {
        let base = &rows[2 * si];
        let reg = &rows[2 * si + 1];
        if !base.diverged
            && !reg.diverged
            && base.max_lambda_train_mean.is_finite()
            && reg.max_lambda_train_mean.is_finite()
        {
            convergent_pairs += 1;
            if reg.max_lambda_train_mean < base.max_lambda_train_mean {
                decay_lower += 1;
            }
        }
    }
    let finite = rows
        .iter()
        .filter(|r| {
            !r.diverged
                && r.final_loss.is_finite()
                && r.test_error.is_finite()
                && r.max_lambda_train_mean.is_finite()
        })
        .count();

    Ok(OverfitReport {
        experiment: "overfit",
        version: VERSION,
        weight_family: WEIGHT_FAMILY,
        config: cfg.clone(),
        summary: OverfitSummary {
            directional_expectation:
                "L2 weight decay lowers the trained network's max FTLE over its training inputs",
            decay_lowers_max_lambda_fraction: if convergent_pairs > 0 {
                decay_lower as f64 / convergent_pairs as f64
            } else {
                f64::NAN
            },
            convergent_pairs,
            finite_fraction: finite as f64 / rows.len() as f64,
        },
        rows,
    })
}

impl OverfitReport {
    pub fn csv(&self) -> String {
        let mut out =
            String::from("seed,variant,final_loss,test_error,max_lambda_train_mean,diverged\n");
        for r in &self.rows {
            let field = |v: f64| if r.diverged { String::new() } else { fmt_float(v) };
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.seed,
                r.variant,
                field(r.final_loss),
                field(r.test_error),
                field(r.max_lambda_train_mean),
                r.diverged
            ));
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        write_pair(dir, self.experiment, &self.csv(), self)
    }
}

// --- prune study -------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruneStudyConfig {
    pub width: usize,
    /// Transitions chained before measuring.
    pub depth: usize,
    pub weight_scale_s: f64,
    pub activation: ActivationKind,
    /// Must start at 0 (the dense reference row).
    pub fractions: Vec<f64>,
    pub seeds: usize,
    pub master_seed: u64,
    #[serde(default = "default_p_one")]
    pub connectivity_p: f64,
    #[serde(default = "default_plain")]
    pub update_form: UpdateForm,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PruneRow {
    pub fraction: f64,
    pub seed: usize,
    pub max_lambda: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PruneSummary {
    pub directional_expectation: &'static str,
    /// Mean |λ₁| per fraction, aligned with config.fractions.
    pub mean_abs_max_lambda: Vec<f64>,
    /// Whether the sparsest setting has lower mean |λ₁| than dense.
    pub sparsest_below_dense: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PruneReport {
    pub experiment: &'static str,
    pub version: &'static str,
    pub weight_family: &'static str,
    pub config: PruneStudyConfig,
    pub summary: PruneSummary,
    #[serde(skip)]
    pub rows: Vec<PruneRow>,
}

/// Max λ vs magnitude-prune fraction; the same seeded dense network and
/// input underlie every fraction of a row family.
pub fn prune_study(cfg: &PruneStudyConfig) -> Result<PruneReport> {
    if cfg.fractions.first() != Some(&0.0) {
        return Err(Error::InvalidConfig(
            "fractions must start with 0 (the dense reference)".into(),
        ));
    }
    if !cfg.fractions.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidConfig(
            "fractions must be strictly increasing".into(),
        ));
    }
    if cfg.seeds == 0 {
        return Err(Error::InvalidConfig("seeds must be >= 1".into()));
    }

    let per_seed: Vec<Vec<PruneRow>> = (0..cfg.seeds)
        .into_par_iter()
        .map(|si| -> Result<Vec<PruneRow>> {
            let mut rng = rng_for(cfg.master_seed, 0, si as u64);
            let dense = generate(&GeneratorConfig {
                width_d: cfg.width,
                depth_n: cfg.depth + 1,
                connectivity_p: cfg.connectivity_p,
                weight_scale_s: cfg.weight_scale_s,
                normalization: Normalization::None,
                activation: cfg.activation,
                update_form: cfg.update_form,
                dt: cfg.dt,
                seed: rng.next_u64(),
            })?;
            let y0 = normal_input(&mut rng, cfg.width);
            cfg.fractions
                .iter()
                .map(|&fraction| {
                    let subject = prune(&dense, fraction, 0)?;
                    let (_, _, report) = analyze(&subject, &y0, cfg.depth)?;
                    Ok(PruneRow {
                        fraction,
                        seed: si,
                        max_lambda: report.max_exponent,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(cfg.fractions.len() * cfg.seeds);
    for fi in 0..cfg.fractions.len() {
        for seed_rows in &per_seed {
            rows.push(seed_rows[fi].clone());
        }
    }

    let mean_abs: Vec<f64> = (0..cfg.fractions.len())
        .map(|fi| {
            rows[fi * cfg.seeds..(fi + 1) * cfg.seeds]
                .iter()
                .map(|r| r.max_lambda.abs())
                .sum::<f64>()
                / cfg.seeds as f64
        })
        .collect();

    Ok(PruneReport {
        experiment: "prune",
        version: VERSION,
        weight_family: WEIGHT_FAMILY,
        config: cfg.clone(),
        summary: PruneSummary {
            directional_expectation:
                "heavy magnitude pruning damps the leading FTLE: mean |max λ| falls from \
                 the dense to the sparsest setting",
            sparsest_below_dense: mean_abs.last().expect("non-empty fractions")
                < mean_abs.first().expect("non-empty fractions"),
            mean_abs_max_lambda: mean_abs,
        },
        rows,
    })
}

impl PruneReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("fraction,seed,max_lambda\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{}\n",
                fmt_float(r.fraction),
                r.seed,
                fmt_float(r.max_lambda)
            ));
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        write_pair(dir, self.experiment, &self.csv(), self)
    }
}
