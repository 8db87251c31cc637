use serde::{Deserialize, Serialize};

use crate::comm::{CommSchedule, UavId};
use crate::world::Pose2D;

/// Running absolute distance errors, split by whether the pair is ever
/// ranged directly.
#[derive(Debug, Clone)]
pub struct DistanceErrorAccumulator {
    measured: Vec<(UavId, UavId)>,
    unmeasured: Vec<(UavId, UavId)>,
    measured_sum: f64,
    unmeasured_sum: f64,
    samples: u64,
}

impl DistanceErrorAccumulator {
    pub fn new(schedule: &CommSchedule) -> Self {
        let measured = schedule.measured_pairs();
        let n = schedule.n_uavs();
        let unmeasured = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|p| !measured.contains(p))
            .collect();
        Self {
            measured,
            unmeasured,
            measured_sum: 0.0,
            unmeasured_sum: 0.0,
            samples: 0,
        }
    }

    pub fn unmeasured_pairs(&self) -> &[(UavId, UavId)] {
        &self.unmeasured
    }

    pub fn measured_pairs(&self) -> &[(UavId, UavId)] {
        &self.measured
    }

    /// Adds one time step: per-pair mean absolute error of each class.
    pub fn add(&mut self, truth: &[Pose2D], estimate: &[Pose2D]) {
        let err = |pairs: &[(UavId, UavId)]| -> f64 {
            let total: f64 = pairs
                .iter()
                .map(|&(i, j)| {
                    (truth[i].distance_to(&truth[j]) - estimate[i].distance_to(&estimate[j])).abs()
                })
                .sum();
            total / pairs.len().max(1) as f64
        };
        self.measured_sum += err(&self.measured);
        self.unmeasured_sum += err(&self.unmeasured);
        self.samples += 1;
    }

    pub fn finish(&self) -> DistanceErrors {
        let avg = |pairs: &[(UavId, UavId)], sum: f64| {
            (!pairs.is_empty() && self.samples > 0).then(|| sum / self.samples as f64)
        };
        DistanceErrors {
            measured: avg(&self.measured, self.measured_sum),
            unmeasured: avg(&self.unmeasured, self.unmeasured_sum),
        }
    }
}

/// Time-averaged distance errors; `None` when the class has no pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceErrors {
    pub measured: Option<f64>,
    pub unmeasured: Option<f64>,
}

/// `truth[k]` and `estimates[k]` hold every UAV's pose at step `k`.
pub fn compute_distance_errors(
    truth: &[Vec<Pose2D>],
    estimates: &[Vec<Pose2D>],
    schedule: &CommSchedule,
) -> DistanceErrors {
    let mut acc = DistanceErrorAccumulator::new(schedule);
    for (t, e) in truth.iter().zip(estimates) {
        acc.add(t, e);
    }
    acc.finish()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionErrors {
    pub estimate: Vec<f64>,
    pub dead_reckoning: Vec<f64>,
    pub estimate_average: f64,
    pub dead_reckoning_average: f64,
    pub dead_reckoning_final: f64,
}

/// Per-step Euclidean errors of one UAV's filter estimate and its
/// dead-reckoning shadow. Averages skip the first `skip` steps.
pub fn compute_position_errors(
    truth: &[Pose2D],
    estimate: &[Pose2D],
    dead_reckoning: &[Pose2D],
    skip: usize,
) -> PositionErrors {
    let series = |est: &[Pose2D]| -> Vec<f64> {
        truth.iter().zip(est).map(|(t, e)| t.distance_to(e)).collect()
    };
    let estimate = series(estimate);
    let dead_reckoning = series(dead_reckoning);
    PositionErrors {
        estimate_average: windowed_mean(&estimate, skip),
        dead_reckoning_average: windowed_mean(&dead_reckoning, skip),
        dead_reckoning_final: dead_reckoning.last().copied().unwrap_or(0.0),
        estimate,
        dead_reckoning,
    }
}

/// Mean of `series[skip..]`, or of the whole series when that is empty.
pub fn windowed_mean(series: &[f64], skip: usize) -> f64 {
    let tail = if skip < series.len() { &series[skip..] } else { series };
    mean(tail).unwrap_or(0.0)
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Sample standard deviation; 0 for a single value.
pub fn sample_std(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    if values.len() < 2 {
        return Some(0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - m).powi(2)).sum();
    Some((ss / (values.len() - 1) as f64).sqrt())
}

/// Linear-interpolation quantile of sorted data (`(n - 1) p` positions).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Empirical CDF points `(value, i / n)`.
pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, (i + 1) as f64 / n))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Boxplot {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Boxplot {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        Some(Self {
            min: s[0],
            q1: quantile_sorted(&s, 0.25),
            median: quantile_sorted(&s, 0.5),
            q3: quantile_sorted(&s, 0.75),
            max: s[s.len() - 1],
        })
    }
}
