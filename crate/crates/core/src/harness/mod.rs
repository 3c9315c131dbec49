//! Configuration-driven experiment runner writing CSV reports.

pub mod config;
pub mod experiments;
pub mod report;

use std::path::PathBuf;

use thiserror::Error;

use crate::netsolver::SolverError;
use crate::spacetime::SpaceTimeError;

pub use config::{DissipationChoice, Experiment, ExperimentConfig, Method, MethodChoice};
pub use experiments::{
    run_experiment, ExperimentReport, JunctionSummary, RunSummary, SpaceTimeSummary,
};
pub use report::EdgeProfile;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Solver {
        context: String,
        #[source]
        source: SolverError,
    },
    #[error("{context}: {source}")]
    SpaceTime {
        context: String,
        #[source]
        source: SpaceTimeError,
    },
    #[error("reference vanishes at every sample node")]
    ZeroReference,
    #[error("error {error} at N = {n} is not positive")]
    NonPositiveError { n: usize, error: f64 },
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
}

impl HarnessError {
    /// Process exit code: 1 for configuration errors, 2 for everything that
    /// fails while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            _ => 2,
        }
    }
}

/// `sum |u - u*| / sum |u*|` over every sample of every profile, with `u*`
/// from `reference(edge, x)`.
pub fn relative_l1_error(
    profiles: &[EdgeProfile],
    reference: &dyn Fn(usize, f64) -> f64,
) -> Result<f64, HarnessError> {
    let (mut num, mut den) = (0.0, 0.0);
    for p in profiles {
        for (&x, &u) in p.x.iter().zip(&p.u) {
            let r = reference(p.edge, x);
            num += (u - r).abs();
            den += r.abs();
        }
    }
    if den == 0.0 {
        return Err(HarnessError::ZeroReference);
    }
    Ok(num / den)
}

/// Observed orders `ln(E_i / E_{i+1}) / ln(N_{i+1} / N_i)` between
/// consecutive rows.
pub fn convergence_rate(errors: &[(usize, f64)]) -> Result<Vec<f64>, HarnessError> {
    if errors.len() < 2 {
        return Err(HarnessError::InvalidSweep(format!(
            "need at least two rows, got {}",
            errors.len()
        )));
    }
    if let Some(&(n, error)) = errors.iter().find(|(_, e)| !(*e > 0.0)) {
        return Err(HarnessError::NonPositiveError { n, error });
    }
    if errors.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(HarnessError::InvalidSweep("N must increase".into()));
    }
    Ok(errors
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).ln() / (w[1].0 as f64 / w[0].0 as f64).ln())
        .collect())
}
