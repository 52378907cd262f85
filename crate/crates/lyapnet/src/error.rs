//! Error type shared across the crate.
//!
//! Errors split into two classes that the CLI maps onto exit codes:
//! user/config problems (bad JSON, mismatched dimensions, out-of-range
//! knobs) and numeric/runtime failures (non-finite states, divergent
//! training, iteration breakdown). [`Error::is_user_error`] reports the
//! class.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong building, running, or reporting on a network.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A network description violates its structural invariants.
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    /// A config value is out of range or inconsistent.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Two objects that must agree in dimension do not.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A requested analysis depth is outside the trajectory.
    #[error("depth {depth} out of range 1..={max}")]
    DepthOutOfRange { depth: usize, max: usize },

    /// Forward propagation produced NaN or infinity.
    #[error("non-finite state after layer {layer}{}", match .input_id {
        Some(i) => format!(" (input {i})"),
        None => String::new(),
    })]
    NonFiniteState {
        layer: usize,
        input_id: Option<usize>,
    },

    /// Training loss left the finite range.
    #[error("training diverged to a non-finite loss at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    /// A ColumnSum1 column kept a near-zero sum after bounded resampling.
    #[error("degenerate column {column}: sum below 1e-9 after {retries} resampling attempts")]
    DegenerateColumn { column: usize, retries: usize },

    /// A numeric procedure failed (overflow, non-convergence).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A delimited input file failed to parse; 1-based line and field.
    #[error("{}:{line}:{field}: {msg}", path.display())]
    CsvParse {
        path: PathBuf,
        line: usize,
        field: usize,
        msg: String,
    },

    /// JSON (de)serialization failure, with the file it came from.
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wrap an I/O error with the path it concerns, so a diagnostic like
    /// "No such file or directory" names the file.
    pub fn io_at(path: &std::path::Path, e: std::io::Error) -> Error {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    }

    /// True for errors the user can fix by changing inputs or config
    /// (CLI exit code 2); false for numeric/runtime failures (exit code 3).
    pub fn is_user_error(&self) -> bool {
        match self {
            Error::InvalidNetwork(_)
            | Error::InvalidConfig(_)
            | Error::DimensionMismatch { .. }
            | Error::DepthOutOfRange { .. }
            | Error::CsvParse { .. }
            | Error::Json { .. }
            | Error::Io(_) => true,
            Error::NonFiniteState { .. }
            | Error::TrainingDiverged { .. }
            | Error::DegenerateColumn { .. }
            | Error::Numeric(_) => false,
        }
    }
}
