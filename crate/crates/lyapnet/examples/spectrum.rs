//! Minimal end-to-end pipeline: draw a random network, run an input
//! through it, and print the FTLE spectrum with its classification.
//!
//! ```sh
//! cargo run -p lyapnet --example spectrum
//! ```

use nalgebra::DVector;
use lyapnet::generators::{generate, GeneratorConfig, Normalization};
use lyapnet::net::{ActivationKind, UpdateForm};
use lyapnet::report::spectral_csv;
use lyapnet::spectral::analyze;

fn main() -> Result<(), lyapnet::Error> {
    let net = generate(&GeneratorConfig {
        width_d: 16,
        depth_n: 6,
        connectivity_p: 1.0,
        weight_scale_s: 0.8,
        normalization: Normalization::None,
        activation: ActivationKind::Tanh { steepness: 1.0 },
        update_form: UpdateForm::Plain,
        dt: 1.0,
        seed: 42,
    })?;
    let y0 = DVector::from_fn(16, |i, _| (i as f64 * 0.31).sin());

    let (_trajectory, spectrum, report) = analyze(&net, &y0, 5)?;
    println!(
        "max λ = {:+.6}   Σλ = {:+.6}   {}{}",
        report.max_exponent,
        report.sum_exponents,
        report.classification,
        if report.dissipative { ", dissipative" } else { "" },
    );
    print!("{}", spectral_csv(&[(spectrum, report)]));
    Ok(())
}
