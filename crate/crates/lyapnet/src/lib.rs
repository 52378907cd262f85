//! Finite-time Lyapunov analysis of feedforward networks.
//!
//! A feedforward network is read as a discrete dynamical system: the state
//! `y^[q+1] = σ(K^[q] y^[q] + ξ^[q])` (plain form) or
//! `y^[q+1] = y^[q] + Δt·σ(K^[q] y^[q] + ξ^[q])` (residual form) evolves
//! along the depth axis, and the sensitivity of the output to the input is
//! the chained local Jacobian product
//!
//! ```text
//! M^[j] = J^[j−1] ⋯ J^[1] J^[0],   J^[q] = diag(σ′(K^[q] y^[q] + ξ^[q]))·K^[q]
//! ```
//!
//! (plus the identity and a Δt factor in the residual form). The
//! finite-time Lyapunov exponents are `λ_k = ln(μ_k)/j` with `μ_k` the
//! singular values of `M^[j]`: the per-layer exponential rates at which
//! perturbation volumes stretch or contract. Networks are then classified
//! by how many directions expand — none (regular), one (chaotic), several
//! (hyperchaotic) — and whether volume contracts overall (dissipative,
//! `Σλ_k < 0`).
//!
//! Two independent evaluation paths compute the spectrum:
//!
//! * [`spectral::explicit_sensitivity`] multiplies the factors and takes
//!   one SVD — exact until `exp(ln μ_max − ln μ_min)` outruns f64;
//! * [`spectral::product_singular_values_stable`] never forms the product,
//!   carrying each singular value's magnitude in the log domain through a
//!   factor-at-a-time one-sided Jacobi orthogonalization, so spectra with
//!   thousands of nats of spread come out finite.
//!
//! The two paths agreeing is the core correctness check and is enforced in
//! this crate's tests.
//!
//! The rest of the crate supports experiments on that quantity: seeded
//! random-network generators with structural transforms ([`generators`]),
//! a small SGD trainer ([`trainer`]), scripted architecture studies
//! ([`experiments`]), and deterministic CSV/JSON reporting ([`report`]).

pub mod error;
pub mod experiments;
pub mod generators;
pub mod jacobian;
pub mod net;
pub mod report;
pub mod rng;
pub mod spectral;
pub mod trainer;

pub use error::{Error, Result};
pub use jacobian::{chain, finite_difference_sensitivity, local_jacobian, JacobianChain};
pub use net::{
    ActivationKind, LayerActivation, LayerParams, NetworkSpec, Trajectory, UpdateForm,
};
pub use spectral::{
    analyze, classify, explicit_sensitivity, ftle, product_singular_values_stable,
    singular_values, DynamicsClass, DynamicsReport, FtleSpectrum,
};
