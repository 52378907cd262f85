//! Singular values of the chained sensitivity matrix, finite-time Lyapunov
//! exponents, and dynamics classification.
//!
//! The sensitivity matrix M = J^[j−1]···J^[0] has singular values μ_k whose
//! logarithms, divided by the depth j, are the finite-time Lyapunov
//! exponents:
//!
//! ```text
//! λ_k = ln(μ_k) / j
//! ```
//!
//! Two routes produce the μ_k:
//!
//! * [`explicit_sensitivity`] + [`singular_values`] — form M and decompose
//!   it. Simple and fast, but the product over- or underflows once Σ|λ|·j
//!   leaves the 64-bit exponent range, and absolute rounding error ~ε·μ_max
//!   drowns singular values far below μ_max.
//! * [`product_singular_values_stable`] — never forms M. It carries a
//!   running factorization M_q = U·diag(exp ℓ)·Vᵀ (V discarded): each new
//!   factor multiplies the orthonormal column frame U, the column scalings
//!   stay as logarithms ℓ, and a one-sided Jacobi pass re-orthogonalizes.
//!   One-sided Jacobi computes the small singular values of column-scaled
//!   matrices to high *relative* accuracy, which is exactly the structure
//!   the log-scaled columns present; the result is log-domain accuracy
//!   near machine precision at any depth.
//!
//! Zero singular values (structural rank deficiency: zeroed ReLU rows,
//! dimension bottlenecks, pruned-out columns) are reported as the honest
//! sentinel −∞ rather than a clamped floor. One genuine range limit
//! remains: a direction more than ~700 nats below the current leading one
//! underflows the column scaling and is also reported −∞.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::jacobian::{chain, JacobianChain};
use crate::net::{NetworkSpec, Trajectory};

/// Relative gap under which two reported values count as tied and keep
/// their pre-sort order (golden-file determinism).
const TIE_RELATIVE_GAP: f64 = 1e-12;

/// Jacobi sweep cap; well above the 5–10 sweeps typical at these sizes.
const JACOBI_MAX_SWEEPS: usize = 60;

/// The FTLE spectrum at one depth for one input.
///
/// `log_mu` is primary — it is what the stable path produces and it stays
/// finite long after exp(log μ) underflows. `exponents[k]` is
/// `log_mu[k] / depth_j`; both lists are descending with −∞ sentinels for
/// exactly-zero singular values, and have length min(D_0, D_j).
#[derive(Debug, Clone, PartialEq)]
pub struct FtleSpectrum {
    pub depth_j: usize,
    pub log_mu: Vec<f64>,
    pub exponents: Vec<f64>,
    pub input_id: Option<usize>,
}

impl FtleSpectrum {
    /// μ_k = exp(log μ_k). May underflow to 0 for deeply contracting
    /// chains; `log_mu` is the lossless representation.
    pub fn singular_values(&self) -> Vec<f64> {
        self.log_mu.iter().map(|l| l.exp()).collect()
    }

    pub fn with_input_id(mut self, id: usize) -> Self {
        self.input_id = Some(id);
        self
    }
}

/// Chaos band of a spectrum; dissipativity is reported separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynamicsClass {
    /// No positive exponent.
    Regular,
    /// Exactly one positive exponent.
    Chaotic,
    /// Two or more positive exponents.
    Hyperchaotic,
}

impl std::fmt::Display for DynamicsClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DynamicsClass::Regular => "Regular",
            DynamicsClass::Chaotic => "Chaotic",
            DynamicsClass::Hyperchaotic => "Hyperchaotic",
        })
    }
}

/// Summary statistics of one FTLE spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsReport {
    pub max_exponent: f64,
    /// Σλ; −∞ when any singular value is exactly zero.
    pub sum_exponents: f64,
    /// Count of strictly positive exponents.
    pub positive_count: usize,
    pub classification: DynamicsClass,
    /// Σλ < 0: state-space volume contracts along the trajectory.
    pub dissipative: bool,
    /// |max λ| — distance from the edge-of-chaos point λ_max = 0.
    pub edge_distance: f64,
}

/// Form M = factors[j−1]···factors[0] outright.
///
/// Errors when the running product leaves the finite range; the stable
/// path has no such limit.
pub fn explicit_sensitivity(chain: &JacobianChain) -> Result<DMatrix<f64>> {
    validate_chain(chain)?;
    let mut m = chain.factors[0].clone();
    for (q, f) in chain.factors.iter().enumerate().skip(1) {
        m = f * m;
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "explicit product overflowed at factor {q}; \
                 product_singular_values_stable handles this regime in log domain"
            )));
        }
    }
    Ok(m)
}

/// Singular values of a finite matrix, descending, ties in stored order.
pub fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "singular_values: matrix has non-finite entries".into(),
        ));
    }
    let svd = m
        .clone()
        .try_svd(false, false, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numeric("SVD iteration failed to converge".into()))?;
    let mut values: Vec<f64> = svd.singular_values.iter().copied().collect();
    sort_descending_ties_stable(&mut values);
    Ok(values)
}

/// Log singular values of the chained product, computed without ever
/// forming a number outside the 64-bit range. Descending, −∞ sentinels,
/// length min(D_0, D_j).
pub fn product_singular_values_stable(chain: &JacobianChain) -> Result<Vec<f64>> {
    validate_chain(chain)?;
    let d0 = chain.input_dim();

    // Running factorization: columns of `u` are the current right-singular
    // directions mapped forward (orthonormal where alive), `ell[k]` the log
    // of the corresponding singular value. Dead directions have ell = −∞
    // and a zero column, which every later factor maps to zero again.
    let mut u = DMatrix::<f64>::identity(d0, d0);
    let mut ell = vec![0.0_f64; d0];

    for factor in &chain.factors {
        let c = factor * &u;
        let m = ell.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            // Every direction already dead; dimensions may still change.
            u = DMatrix::zeros(factor.nrows(), d0);
            continue;
        }
        // Scale column k by exp(ell_k − m): the best-conditioned finite
        // representation of the running magnitudes.
        let mut w = c;
        for k in 0..d0 {
            let scale = (ell[k] - m).exp();
            w.column_mut(k).scale_mut(scale);
        }
        jacobi_orthogonalize(&mut w)?;
        // Column norms are the singular values of W; fold the shift back.
        let mut order: Vec<usize> = (0..d0).collect();
        let norms: Vec<f64> = (0..d0).map(|k| w.column(k).norm()).collect();
        order.sort_by(|&a, &b| {
            norms[b]
                .partial_cmp(&norms[a])
                .expect("column norms are never NaN")
                .then(a.cmp(&b))
        });
        let mut next_u = DMatrix::zeros(w.nrows(), d0);
        for (slot, &k) in order.iter().enumerate() {
            if norms[k] > 0.0 {
                ell[slot] = norms[k].ln() + m;
                next_u.set_column(slot, &(w.column(k) / norms[k]));
            } else {
                ell[slot] = f64::NEG_INFINITY;
            }
        }
        u = next_u;
    }

    // Structural rank bound: the product's rank cannot exceed any factor's
    // zero-pattern rank bound. Everything beyond it is exactly zero.
    let bound = structural_rank_bound(chain);
    for l in ell.iter_mut().skip(bound) {
        *l = f64::NEG_INFINITY;
    }

    sort_descending_ties_stable(&mut ell);
    ell.truncate(chain.output_dim().min(d0));
    Ok(ell)
}

/// Build the FTLE spectrum from log singular values at depth j.
pub fn ftle(log_mu: &[f64], depth_j: usize) -> Result<FtleSpectrum> {
    if depth_j == 0 {
        return Err(Error::InvalidConfig(
            "FTLE depth must be >= 1 (the definition divides by the depth)".into(),
        ));
    }
    let exponents = log_mu.iter().map(|l| l / depth_j as f64).collect();
    Ok(FtleSpectrum {
        depth_j,
        log_mu: log_mu.to_vec(),
        exponents,
        input_id: None,
    })
}

/// Classify a spectrum: chaos band from the count of strictly positive
/// exponents, dissipativity from the sign of their sum.
pub fn classify(spec: &FtleSpectrum) -> DynamicsReport {
    let positive_count = spec.exponents.iter().filter(|l| **l > 0.0).count();
    let classification = match positive_count {
        0 => DynamicsClass::Regular,
        1 => DynamicsClass::Chaotic,
        _ => DynamicsClass::Hyperchaotic,
    };
    let max_exponent = spec.exponents.first().copied().unwrap_or(f64::NEG_INFINITY);
    let sum_exponents = spec.exponents.iter().sum();
    DynamicsReport {
        max_exponent,
        sum_exponents,
        positive_count,
        classification,
        dissipative: sum_exponents < 0.0,
        edge_distance: max_exponent.abs(),
    }
}

/// End-to-end pipeline: forward → chain → stable log-μ → FTLE → classify.
pub fn analyze(
    net: &NetworkSpec,
    y0: &DVector<f64>,
    j: usize,
) -> Result<(Trajectory, FtleSpectrum, DynamicsReport)> {
    let traj = net.forward(y0)?;
    let jc = chain(net, &traj, j)?;
    let log_mu = product_singular_values_stable(&jc)?;
    let mut spec = ftle(&log_mu, j)?;
    spec.input_id = traj.input_id;
    let report = classify(&spec);
    Ok((traj, spec, report))
}

fn validate_chain(chain: &JacobianChain) -> Result<()> {
    if chain.factors.is_empty() {
        return Err(Error::InvalidConfig("empty Jacobian chain".into()));
    }
    for (q, f) in chain.factors.iter().enumerate() {
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "chain factor {q} has non-finite entries"
            )));
        }
        if q > 0 && f.ncols() != chain.factors[q - 1].nrows() {
            return Err(Error::DimensionMismatch {
                context: "chain factor shapes",
                expected: chain.factors[q - 1].nrows(),
                got: f.ncols(),
            });
        }
    }
    Ok(())
}

/// min over factors of their zero-pattern rank bound (nonzero rows,
/// nonzero columns, dimensions) — an upper bound on rank(M).
fn structural_rank_bound(chain: &JacobianChain) -> usize {
    chain
        .factors
        .iter()
        .map(|f| {
            let nz_rows = (0..f.nrows())
                .filter(|&r| f.row(r).iter().any(|v| *v != 0.0))
                .count();
            let nz_cols = (0..f.ncols())
                .filter(|&c| f.column(c).iter().any(|v| *v != 0.0))
                .count();
            nz_rows.min(nz_cols)
        })
        .min()
        .unwrap_or(0)
}

/// One-sided Jacobi: rotate column pairs until all are mutually orthogonal
/// (relative off-diagonal below ~1e−15). The rotations are exactly
/// orthogonal, so column norms afterwards are the singular values and the
/// normalized columns the left singular vectors — with relative accuracy
/// per column, independent of the spread between columns (Demmel–Veselić).
fn jacobi_orthogonalize(a: &mut DMatrix<f64>) -> Result<()> {
    let n = a.ncols();
    let eps = f64::EPSILON;
    let mut off = 0.0_f64;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        off = 0.0;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let (app, aqq, apq) = {
                    let cp = a.column(p);
                    let cq = a.column(q);
                    (cp.dot(&cp), cq.dot(&cq), cp.dot(&cq))
                };
                if app == 0.0 || aqq == 0.0 {
                    continue;
                }
                // sqrt before multiplying: app·aqq underflows to 0 when
                // both columns are subnormal-tiny (spike activations
                // produce them), and a zero denominator would read as an
                // infinite ratio.
                let denom = app.sqrt() * aqq.sqrt();
                if apq.abs() <= eps * denom * 1e-2 {
                    continue;
                }
                off = off.max(apq.abs() / denom);
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau == 0.0 {
                    1.0
                } else {
                    // hypot keeps √(1 + τ²) finite for τ beyond 1e154,
                    // where squaring would overflow and freeze the
                    // rotation at identity.
                    tau.signum() / (tau.abs() + 1.0f64.hypot(tau))
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                // Apply the rotation to the column pair in place.
                for r in 0..a.nrows() {
                    let vp = a[(r, p)];
                    let vq = a[(r, q)];
                    a[(r, p)] = c * vp - s * vq;
                    a[(r, q)] = s * vp + c * vq;
                }
            }
        }
        if off < 1e-15 {
            return Ok(());
        }
    }
    // Orthogonality to ~1e−8 still bounds the norm error at ~1e−16
    // relative; only genuine stagnation is an error.
    if off > 1e-8 {
        return Err(Error::Numeric(format!(
            "one-sided Jacobi stalled with off-diagonal ratio {off:.2e}"
        )));
    }
    Ok(())
}

/// Sort descending; exact ties keep ascending original index, and runs of
/// neighbors within 1e−12 relative are regrouped into original order.
///
/// (A comparator with an approximate-equality clause is not a strict weak
/// ordering, so the near-tie rule is applied as a post-pass instead.)
fn sort_descending_ties_stable(values: &mut [f64]) {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .expect("spectral values are never NaN")
            .then(a.cmp(&b))
    });
    let sorted: Vec<f64> = idx.iter().map(|&i| values[i]).collect();

    // Regroup near-tied neighbor runs by original index.
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && nearly_tied(sorted[end - 1], sorted[end]) {
            end += 1;
        }
        let mut run: Vec<usize> = idx[start..end].to_vec();
        run.sort_unstable();
        out.extend(run.into_iter().map(|i| values[i]));
        start = end;
    }
    values.copy_from_slice(&out);
}

fn nearly_tied(a: f64, b: f64) -> bool {
    if a == b {
        return true; // covers the −∞ == −∞ group
    }
    if !a.is_finite() || !b.is_finite() {
        return false;
    }
    (a - b).abs() <= TIE_RELATIVE_GAP * a.abs().max(b.abs()).max(1.0)
}
