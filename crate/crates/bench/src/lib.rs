//! Strong-scaling benchmark harness for planarfft.
//!
//! A sweep plans once per point, runs one untimed warm-up, then times
//! `reps` executions on the same input and reports median, min and max
//! wall time with the mean FFT/transpose split. Results go to CSV.

mod config;
mod harness;
mod report;
mod verify;

pub use config::{mode_output_path, BenchConfig, Point, Target};
pub use harness::{output_checksum, run_strong_scaling, Harness, ScalingRecord};
pub use report::{emit_csv, parse_csv, to_csv_string, CSV_HEADER};
pub use verify::{enforce, verify_mode, verify_with, VerifyReport, VERIFY_SIZE, VERIFY_TOLERANCE};

use std::path::PathBuf;

use planarfft::FftError;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid {field}: {message}")]
    Config {
        field: &'static str,
        message: String,
    },
    #[error("verification failed: max abs error {error:.3e} exceeds {tolerance:.0e} (use --force to run anyway)")]
    VerificationRefused { error: f64, tolerance: f64 },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Engine(#[from] FftError),
}

impl BenchError {
    pub(crate) fn config(field: &'static str, message: impl Into<String>) -> Self {
        BenchError::Config {
            field,
            message: message.into(),
        }
    }

    /// Process exit status: 1 for a verification refusal, 2 for anything
    /// that stops the run before or outside measurement.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::VerificationRefused { .. } => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;
