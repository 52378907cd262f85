//! Deterministic file output: float formatting, atomic writes, the
//! spectral CSV report, and the small CSV readers/writers the CLI needs.
//!
//! Every float is rendered with 17 significant digits (`{:.16e}`), enough
//! for exact 64-bit round-trips, so re-running a command yields
//! byte-identical files. −∞ renders as the literal token `-inf`.

use std::fs;
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::spectral::{DynamicsReport, FtleSpectrum};

/// 17-significant-digit rendering; infinities as `inf`/`-inf`.
pub fn fmt_float(x: f64) -> String {
    if x == f64::NEG_INFINITY {
        "-inf".to_owned()
    } else if x == f64::INFINITY {
        "inf".to_owned()
    } else {
        format!("{x:.16e}")
    }
}

/// Write bytes to `path` via a sibling temp file and rename, creating
/// parent directories as needed. Readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io_at(parent, e))?;
        }
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidConfig(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = file_name.to_owned();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| Error::io_at(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io_at(path, e))?;
    Ok(())
}

/// The spectral report: one value row per singular value plus one summary
/// row per input.
///
/// ```text
/// input_id,depth_j,k,mu_log,lambda,max_lambda,sum_lambda,positive_count,classification,dissipative
/// 0,4,0,...,...,,,,,
/// 0,4,1,...,...,,,,,
/// 0,4,summary,,,...,...,2,Chaotic,true
/// ```
///
/// Value rows leave the summary columns empty and vice versa; the `k`
/// column of a summary row holds the token `summary`.
pub fn spectral_csv(blocks: &[(FtleSpectrum, DynamicsReport)]) -> String {
    let mut out = String::from(
        "input_id,depth_j,k,mu_log,lambda,max_lambda,sum_lambda,positive_count,classification,dissipative\n",
    );
    for (spec, report) in blocks {
        let id = spec
            .input_id
            .map(|i| i.to_string())
            .unwrap_or_default();
        for (k, (log_mu, lambda)) in spec.log_mu.iter().zip(&spec.exponents).enumerate() {
            out.push_str(&format!(
                "{id},{depth},{k},{mu},{la},,,,,\n",
                depth = spec.depth_j,
                mu = fmt_float(*log_mu),
                la = fmt_float(*lambda),
            ));
        }
        out.push_str(&format!(
            "{id},{depth},summary,,,{max},{sum},{pos},{class},{diss}\n",
            depth = spec.depth_j,
            max = fmt_float(report.max_exponent),
            sum = fmt_float(report.sum_exponents),
            pos = report.positive_count,
            class = report.classification,
            diss = report.dissipative,
        ));
    }
    out
}

/// Write the spectral report atomically.
pub fn write_spectral_csv(path: &Path, blocks: &[(FtleSpectrum, DynamicsReport)]) -> Result<()> {
    write_atomic(path, spectral_csv(blocks).as_bytes())
}

/// Loss history CSV: `epoch,loss`, epoch 0 = before training.
pub fn loss_csv(history: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (epoch, loss) in history.iter().enumerate() {
        out.push_str(&format!("{epoch},{}\n", fmt_float(*loss)));
    }
    out
}

/// Read a headerless CSV of input states: one row per input, `dim`
/// comma-separated floats each. Errors carry 1-based line/field positions.
pub fn read_inputs_csv(path: &Path, dim: usize) -> Result<Vec<DVector<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?;
    let mut rows = Vec::new();
    for (line_idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim {
            return Err(Error::CsvParse {
                path: path.to_owned(),
                line: line_idx + 1,
                field: fields.len().min(dim).max(1),
                msg: format!("expected {dim} fields, got {}", fields.len()),
            });
        }
        let mut values = Vec::with_capacity(dim);
        for (field_idx, field) in fields.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|e| Error::CsvParse {
                path: path.to_owned(),
                line: line_idx + 1,
                field: field_idx + 1,
                msg: format!("{e}: {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::CsvParse {
                    path: path.to_owned(),
                    line: line_idx + 1,
                    field: field_idx + 1,
                    msg: format!("non-finite input value {field:?}"),
                });
            }
            values.push(v);
        }
        rows.push(DVector::from_vec(values));
    }
    if rows.is_empty() {
        return Err(Error::CsvParse {
            path: path.to_owned(),
            line: 1,
            field: 1,
            msg: "no input rows".into(),
        });
    }
    Ok(rows)
}
