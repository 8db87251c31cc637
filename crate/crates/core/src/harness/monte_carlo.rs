use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::TrialConfig;
use super::metrics::{empirical_cdf, mean, sample_std, Boxplot};
use super::trial::{run_trial_on_map, TrialOptions, TrialResult};
use super::HarnessError;
use crate::magmap::MagneticMap;

/// One row of `trials.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub avg_position_error: f64,
    pub dr_avg_error: f64,
    pub dr_final_error: f64,
    pub measured_pair_error: Option<f64>,
    pub unmeasured_pair_error: Option<f64>,
    pub weight_resets: u64,
    pub off_map_particles: u64,
    pub degenerate_ranges: u64,
    pub left_map: bool,
    pub steps: u64,
}

impl TrialRecord {
    pub fn from_result(trial: usize, r: &TrialResult) -> Self {
        Self {
            trial,
            seed: r.seed,
            avg_position_error: r.avg_position_error,
            dr_avg_error: r.dr_avg_error,
            dr_final_error: r.dr_final_error,
            measured_pair_error: r.measured_pair_error,
            unmeasured_pair_error: r.unmeasured_pair_error,
            weight_resets: r.flags.weight_resets,
            off_map_particles: r.flags.off_map_particles,
            degenerate_ranges: r.flags.degenerate_ranges,
            left_map: r.flags.left_map,
            steps: r.steps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Option<Self> {
        Some(Self {
            n: values.len(),
            mean: mean(values)?,
            std: sample_std(values)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub case: String,
    pub n_trials: usize,
    pub position_error: MetricSummary,
    pub dr_avg_error: MetricSummary,
    pub dr_final_error: MetricSummary,
    pub measured_pair_error: Option<MetricSummary>,
    pub unmeasured_pair_error: Option<MetricSummary>,
    /// `(avg position error, cumulative fraction)` per trial
    pub cdf: Vec<(f64, f64)>,
    pub boxplot: Boxplot,
    pub weight_resets: u64,
    pub left_map_trials: usize,
}

impl MonteCarloSummary {
    /// Folds records in the order given. Panics on an empty slice.
    pub fn from_records(case: &str, records: &[TrialRecord]) -> Self {
        assert!(!records.is_empty(), "summary needs at least one trial");
        let col = |f: fn(&TrialRecord) -> f64| -> Vec<f64> { records.iter().map(f).collect() };
        let opt_col = |f: fn(&TrialRecord) -> Option<f64>| -> Vec<f64> { records.iter().filter_map(f).collect() };
        let position = col(|r| r.avg_position_error);
        Self {
            case: case.to_string(),
            n_trials: records.len(),
            position_error: MetricSummary::of(&position).expect("non-empty"),
            dr_avg_error: MetricSummary::of(&col(|r| r.dr_avg_error)).expect("non-empty"),
            dr_final_error: MetricSummary::of(&col(|r| r.dr_final_error)).expect("non-empty"),
            measured_pair_error: MetricSummary::of(&opt_col(|r| r.measured_pair_error)),
            unmeasured_pair_error: MetricSummary::of(&opt_col(|r| r.unmeasured_pair_error)),
            cdf: empirical_cdf(&position),
            boxplot: Boxplot::from_values(&position).expect("non-empty"),
            weight_resets: records.iter().map(|r| r.weight_resets).sum(),
            left_map_trials: records.iter().filter(|r| r.left_map).count(),
        }
    }
}

/// A finished batch: per-trial results in trial order plus their summary.
#[derive(Debug, Clone)]
pub struct Batch {
    pub results: Vec<TrialResult>,
    pub records: Vec<TrialRecord>,
    pub summary: MonteCarloSummary,
}

/// Per-trial seeds, drawn in order from the master seed.
pub fn trial_seeds(master_seed: u64, n_trials: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    (0..n_trials).map(|_| rng.next_u64()).collect()
}

/// Runs `n_trials` trials of `cfg` on a worker pool.
pub fn run_monte_carlo(cfg: &TrialConfig, n_trials: usize) -> Result<MonteCarloSummary, HarnessError> {
    let map = cfg.build_map()?;
    Ok(run_batch(cfg, &map, n_trials, &TrialOptions::default())?.summary)
}

pub fn run_batch(
    cfg: &TrialConfig,
    map: &MagneticMap,
    n_trials: usize,
    opts: &TrialOptions,
) -> Result<Batch, HarnessError> {
    if n_trials == 0 {
        return Err(HarnessError::Config("at least one trial is required".into()));
    }
    cfg.validate()?;
    let seeds = trial_seeds(cfg.seed, n_trials);
    let results = seeds
        .par_iter()
        .map(|&seed| run_trial_on_map(cfg, map, seed, opts))
        .collect::<Result<Vec<_>, _>>()?;
    let records: Vec<TrialRecord> = results
        .iter()
        .enumerate()
        .map(|(i, r)| TrialRecord::from_result(i, r))
        .collect();
    let summary = MonteCarloSummary::from_records(&cfg.name, &records);
    Ok(Batch {
        results,
        records,
        summary,
    })
}
