//! Experiment orchestration: configuration, closed-loop trials, seeded
//! Monte Carlo batches, metrics and CSV output.

mod config;
mod metrics;
mod monte_carlo;
mod output;
mod trial;

use thiserror::Error;

use crate::comm::{CommError, Step};
use crate::magmap::MapError;

pub use config::{
    EkfSettings, MapSource, MapVariant, NoiseField, ProfileConfig, SweepCase, SyntheticMapSettings,
    TrialConfig,
};
pub use metrics::{
    compute_distance_errors, compute_position_errors, empirical_cdf, mean, quantile_sorted, sample_std,
    windowed_mean, Boxplot, DistanceErrorAccumulator, DistanceErrors, PositionErrors,
};
pub use monte_carlo::{run_batch, run_monte_carlo, trial_seeds, Batch, MetricSummary, MonteCarloSummary, TrialRecord};
pub use output::{
    analyze, format_summary, read_trials_csv, write_batch, write_boxplot_csv, write_cdf_csv,
    write_summary_csv, write_summary_tables, write_traces, write_trials_csv,
};
pub use trial::{
    run_trial, run_trial_on_map, CovarianceHealth, EkfRow, PacketRow, PfRow, TrialFlags, TrialOptions,
    TrialResult, TrialTraces, TruthRow,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Comm(#[from] CommError),
    #[error("packet for step {0} was not complete when the filters needed it")]
    IncompletePacket(Step),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Runs every sweep case of `cfg` with common trial seeds. The map is built
/// once and shared.
pub fn run_sweep(cfg: &TrialConfig, opts: &TrialOptions) -> Result<Vec<Batch>, HarnessError> {
    cfg.validate()?;
    let map = cfg.build_map()?;
    let cases: Vec<TrialConfig> = if cfg.sweep.is_empty() {
        vec![cfg.clone()]
    } else {
        cfg.sweep.iter().map(|c| cfg.with_case(c)).collect()
    };
    cases.iter().map(|c| run_batch(c, &map, c.trials, opts)).collect()
}
