//! Implementations of the four subcommands. Each logs one stderr line per
//! stage so long runs stay observable, and writes outputs atomically so a
//! crash never leaves a half-written file.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rayon::prelude::*;

use lyapnet::error::{Error, Result};
use lyapnet::experiments::{
    activation_comparison, depth_profile, overfit_study, prune_study, width_scaling,
};
use lyapnet::generators::{delay_embed, generate, prune};
use lyapnet::net::NetworkSpec;
use lyapnet::report::{loss_csv, read_inputs_csv, write_atomic, write_spectral_csv};
use lyapnet::rng::derive_seed;
use lyapnet::spectral::{analyze, DynamicsReport, FtleSpectrum};
use lyapnet::trainer::{init_mlp, make_dataset, mean_loss, train, DatasetKind};

use crate::configs::{load_json, GenerateDoc, TrainDoc};

/// `lyapnet analyze`: spectra + classification for every input row.
pub fn cmd_analyze(
    network: &Path,
    inputs: &Path,
    depth: Option<usize>,
    out: &Path,
) -> Result<()> {
    let net = NetworkSpec::load(network)?;
    eprintln!(
        "loaded network: input_dim={}, depth={}, {:?} form",
        net.input_dim,
        net.depth(),
        net.update_form
    );
    let depth = depth.unwrap_or_else(|| net.depth());
    if depth == 0 {
        return Err(Error::InvalidConfig(
            "--depth must be >= 1 (the exponent definition divides by it)".into(),
        ));
    }
    if depth > net.depth() {
        return Err(Error::DepthOutOfRange {
            depth,
            max: net.depth(),
        });
    }
    let rows = read_inputs_csv(inputs, net.input_dim)?;
    eprintln!("read {} input state(s) from {}", rows.len(), inputs.display());

    let blocks: Vec<(FtleSpectrum, DynamicsReport)> = rows
        .par_iter()
        .enumerate()
        .map(|(i, y0)| analyze_with_id(&net, y0, depth, i))
        .collect::<Result<_>>()?;
    eprintln!("analyzed {} input(s) at depth {}", blocks.len(), depth);

    write_spectral_csv(out, &blocks)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn analyze_with_id(
    net: &NetworkSpec,
    y0: &DVector<f64>,
    depth: usize,
    id: usize,
) -> Result<(FtleSpectrum, DynamicsReport)> {
    match analyze(net, y0, depth) {
        Ok((_, spec, report)) => Ok((spec.with_input_id(id), report)),
        // Attach which input failed; forward-pass blowups are per-row.
        Err(Error::NonFiniteState { layer, .. }) => Err(Error::NonFiniteState {
            layer,
            input_id: Some(id),
        }),
        Err(e) => Err(e),
    }
}

/// `lyapnet generate`: draw a network, optionally prune then delay-embed.
pub fn cmd_generate(config: &Path, out: &Path) -> Result<()> {
    let doc: GenerateDoc = load_json(config)?;
    let mut net = generate(&doc.generator())?;
    eprintln!(
        "generated network: width={}, transitions={}, seed={}",
        doc.width_d,
        net.depth(),
        doc.seed
    );
    if let Some(fraction) = doc.prune_fraction {
        net = prune(&net, fraction, doc.seed)?;
        eprintln!("pruned {fraction} of each row's smallest weights");
    }
    if doc.delay_embed {
        net = delay_embed(&net)?;
        eprintln!("delay-embedded to width {}", net.input_dim);
    }
    net.save(out)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

/// `lyapnet train`: fit an MLP on a synthetic dataset; writes the trained
/// network to `out` and the loss history next to it (`*.loss.csv`).
pub fn cmd_train(config: &Path, data_kind: DatasetKind, out: &Path) -> Result<()> {
    let doc: TrainDoc = load_json(config)?;
    let (in_dim, out_dim) = match data_kind {
        DatasetKind::NoisySine => (1, 1),
        DatasetKind::TwoClusters => (2, 2),
    };
    let train_data = make_dataset(
        data_kind,
        doc.dataset.n_train,
        doc.dataset.noise,
        doc.dataset.seed,
    )?;
    let test_data = make_dataset(
        data_kind,
        doc.dataset.n_test,
        doc.dataset.noise,
        derive_seed(doc.dataset.seed, 1, 0),
    )?;
    eprintln!(
        "dataset {:?}: {} train / {} test samples, noise {}",
        data_kind, doc.dataset.n_train, doc.dataset.n_test, doc.dataset.noise
    );

    let net0 = init_mlp(
        in_dim,
        doc.hidden_width,
        out_dim,
        doc.depth,
        doc.activation,
        doc.update_form,
        doc.dt,
        doc.init_scale_s,
        doc.init_seed,
    )?;
    eprintln!(
        "initialized MLP: {} → {}^{} → {}",
        in_dim,
        doc.hidden_width,
        doc.depth - 1,
        out_dim
    );

    let (trained, history) = train(&net0, &train_data, &doc.train_config())?;
    let final_loss = history.last().expect("non-empty history");
    let test_loss = mean_loss(&trained, &test_data)?;
    eprintln!(
        "trained {} epochs: loss {:.6e} → {:.6e}, held-out {:.6e}",
        doc.train.epochs, history[0], final_loss, test_loss
    );

    trained.save(out)?;
    let loss_path = out.with_extension("loss.csv");
    write_atomic(&loss_path, loss_csv(&history).as_bytes())?;
    eprintln!("wrote {} and {}", out.display(), loss_path.display());
    Ok(())
}

/// The study names `lyapnet experiment` accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExperimentName {
    WidthScaling,
    Activation,
    DepthProfile,
    Overfit,
    Prune,
}

/// `lyapnet experiment`: run one study, emitting `<name>.csv` and
/// `<name>.meta.json` under `out_dir`.
pub fn cmd_experiment(name: ExperimentName, config: &Path, out_dir: &Path) -> Result<()> {
    let paths: Vec<PathBuf> = match name {
        ExperimentName::WidthScaling => {
            let report = width_scaling(&load_json(config)?)?;
            eprintln!(
                "width-scaling: mean-μ exponent {:.4} (residual {:.4}), Frobenius exponent {:.4}",
                report.result.fitted_exponent,
                report.result.fit_residual,
                report.result.frobenius_exponent
            );
            report.write(out_dir)?
        }
        ExperimentName::Activation => {
            let report = activation_comparison(&load_json(config)?)?;
            for (kind, median) in &report.summary.medians {
                eprintln!("activation: median max λ [{kind}] = {median:+.4}");
            }
            if let Some(f) = report.summary.steep_step_above_relu_fraction {
                eprintln!("activation: steep_step above relu in {:.0}% of seeds", 100.0 * f);
            }
            report.write(out_dir)?
        }
        ExperimentName::DepthProfile => {
            let report = depth_profile(&load_json(config)?)?;
            for p in &report.per_depth {
                eprintln!(
                    "depth-profile: depth {} mean max λ = {:+.4}",
                    p.depth, p.mean_max_lambda
                );
            }
            report.write(out_dir)?
        }
        ExperimentName::Overfit => {
            let report = overfit_study(&load_json(config)?)?;
            eprintln!(
                "overfit: decay lowered max λ in {:.0}% of {} convergent pairs",
                100.0 * report.summary.decay_lowers_max_lambda_fraction,
                report.summary.convergent_pairs
            );
            report.write(out_dir)?
        }
        ExperimentName::Prune => {
            let report = prune_study(&load_json(config)?)?;
            eprintln!(
                "prune: mean |max λ| {:.4} (dense) → {:.4} (sparsest)",
                report.summary.mean_abs_max_lambda.first().unwrap(),
                report.summary.mean_abs_max_lambda.last().unwrap()
            );
            report.write(out_dir)?
        }
    };
    for p in &paths {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}
