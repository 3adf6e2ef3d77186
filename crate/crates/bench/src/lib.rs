//! Benchmark driver: builds the advection, diffusion and advection-diffusion
//! manifolds, runs every reduction method over a latent-dimension sweep and
//! writes the CSV artifacts.
//!
//! Output tree under the output directory:
//!
//! ```text
//! manifest.txt
//! <case>/spectra.csv                 case,method,j,lambda_j (normalised by lambda_1)
//! <case>/errors.csv                  method,case,N,train_error,test_error,flag
//! <case>/latents.csv                 method,case,t,z_1..z_N,flag
//! <case>/registration_coeffs.csv     t,a_1..a_M
//! <case>/registration_diagnostics.csv
//! <case>/train_snapshots.csv, test_snapshots.csv   (generate)
//! <case>/spectra.svg, errors.svg                    (--svg)
//! ```

pub mod config;
pub mod run;
pub mod svg;

use std::path::PathBuf;

pub use config::BenchConfig;
pub use run::{
    mean_relative_error, mean_relative_error_of_mean, run_command, CaseRun, CellErrors, Command, ErrorRow, Method,
    RunSummary, Selection,
};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] nlmor::Error),
}

impl BenchError {
    /// 1 for bad input, 2 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::Io { .. } => 1,
            BenchError::Core(e) if e.is_validation() => 1,
            BenchError::Core(_) => 2,
        }
    }
}
