//! Cooperative magnetic localization.
//!
//! Each particle carries the owner's pose plus the rotation `gamma` between
//! the ranging filter's group shape and the true one. A particle predicts
//! where every group member is, samples the anomaly map there and is weighted
//! by how well the group's magnetometer readings agree.

use log::warn;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::angle::{circular_mean, wrap};
use crate::magmap::MagneticMap;
use crate::world::{advance, ControlMeasurement, Pose2D};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Particle {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    /// rad, rotation applied to the estimated group shape
    pub gamma: f64,
}

impl Particle {
    pub fn new(x: f64, y: f64, theta: f64, gamma: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap(theta),
            gamma: wrap(gamma),
        }
    }

    pub fn pose(&self) -> Pose2D {
        Pose2D {
            x: self.x,
            y: self.y,
            theta: self.theta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PfConfig {
    pub particle_count: usize,
    /// m per step, each axis
    pub position_noise: f64,
    /// rad per step
    pub heading_noise: f64,
    /// rad per step
    pub gamma_noise: f64,
    /// nT; `None` uses the magnetometer's own noise level
    pub magnetic_sigma: Option<f64>,
    /// fraction of the particle count
    pub resample_threshold: f64,
    /// m
    pub init_position_std: f64,
    /// rad
    pub init_heading_std: f64,
    /// rad
    pub init_gamma_std: f64,
}

impl Default for PfConfig {
    fn default() -> Self {
        Self {
            particle_count: 2000,
            position_noise: 0.2,
            heading_noise: 0.0002,
            gamma_noise: 0.0005,
            magnetic_sigma: None,
            resample_threshold: 0.5,
            init_position_std: 1.0,
            init_heading_std: 1f64.to_radians(),
            init_gamma_std: 1f64.to_radians(),
        }
    }
}

impl PfConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.particle_count == 0 {
            return Err("particle_count must be at least 1".into());
        }
        let stds = [
            ("position_noise", self.position_noise),
            ("heading_noise", self.heading_noise),
            ("gamma_noise", self.gamma_noise),
            ("init_position_std", self.init_position_std),
            ("init_heading_std", self.init_heading_std),
            ("init_gamma_std", self.init_gamma_std),
        ];
        for (name, v) in stds {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{name} = {v} must be finite and non-negative"));
            }
        }
        if let Some(s) = self.magnetic_sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(format!("magnetic_sigma = {s} must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.resample_threshold) {
            return Err(format!(
                "resample_threshold = {} must lie in [0, 1]",
                self.resample_threshold
            ));
        }
        Ok(())
    }
}

/// Outcome of one weight update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WeightReport {
    /// particles with at least one predicted position off the map
    pub off_map: usize,
    /// every weight vanished and the set was reset to uniform
    pub reset: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    particles: Vec<Particle>,
    weights: Vec<f64>,
}

impl ParticleSet {
    /// Uniformly weighted set. Panics on an empty particle list.
    pub fn from_particles(particles: Vec<Particle>) -> Self {
        assert!(!particles.is_empty(), "particle set needs at least one particle");
        let w = 1.0 / particles.len() as f64;
        let weights = vec![w; particles.len()];
        Self { particles, weights }
    }

    /// Weights are normalized on the way in.
    pub fn with_weights(particles: Vec<Particle>, weights: Vec<f64>) -> Self {
        assert_eq!(particles.len(), weights.len());
        let mut set = Self { particles, weights };
        set.normalize();
        set
    }

    /// Gaussian cloud around an initial pose with zero mean group rotation.
    /// The draws are centred so the cloud's mean is exactly `start`.
    pub fn initialize<R: Rng + ?Sized>(start: &Pose2D, cfg: &PfConfig, rng: &mut R) -> Self {
        let m = cfg.particle_count;
        let draws: Vec<[f64; 4]> = (0..m)
            .map(|_| std::array::from_fn(|_| rng.sample(StandardNormal)))
            .collect();
        let mut centre = [0.0; 4];
        for d in &draws {
            for (c, z) in centre.iter_mut().zip(d) {
                *c += z / m as f64;
            }
        }
        let particles = draws
            .iter()
            .map(|z| {
                Particle::new(
                    start.x + cfg.init_position_std * (z[0] - centre[0]),
                    start.y + cfg.init_position_std * (z[1] - centre[1]),
                    start.theta + cfg.init_heading_std * (z[2] - centre[2]),
                    cfg.init_gamma_std * (z[3] - centre[3]),
                )
            })
            .collect();
        Self::from_particles(particles)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn effective_sample_size(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    fn normalize(&mut self) {
        let total: f64 = self.weights.iter().sum();
        if total > 0.0 && total.is_finite() {
            self.weights.iter_mut().for_each(|w| *w /= total);
        } else {
            let w = 1.0 / self.weights.len() as f64;
            self.weights.iter_mut().for_each(|x| *x = w);
        }
    }

    /// Moves every particle with the owner's measured controls plus process
    /// noise. Weights are untouched.
    pub fn propagate<R: Rng + ?Sized>(
        &mut self,
        control: &ControlMeasurement,
        ts: f64,
        cfg: &PfConfig,
        rng: &mut R,
    ) {
        let noisy = cfg.position_noise > 0.0 || cfg.heading_noise > 0.0 || cfg.gamma_noise > 0.0;
        for p in &mut self.particles {
            let moved = advance(p.pose(), *control, ts);
            if noisy {
                let zx: f64 = rng.sample(StandardNormal);
                let zy: f64 = rng.sample(StandardNormal);
                let zt: f64 = rng.sample(StandardNormal);
                let zg: f64 = rng.sample(StandardNormal);
                p.x = moved.x + cfg.position_noise * zx;
                p.y = moved.y + cfg.position_noise * zy;
                p.theta = wrap(moved.theta + cfg.heading_noise * zt);
                p.gamma = wrap(p.gamma + cfg.gamma_noise * zg);
            } else {
                p.x = moved.x;
                p.y = moved.y;
                p.theta = moved.theta;
            }
        }
    }

    /// Multiplies in the group's magnetic likelihood. `relative[i]` is UAV
    /// `i`'s position relative to the owner in the ranging filter's frame and
    /// `measurements[i]` its magnetometer reading.
    pub fn weight_update(
        &mut self,
        relative: &[(f64, f64)],
        measurements: &[f64],
        map: &MagneticMap,
        sigma_m: f64,
    ) -> WeightReport {
        assert_eq!(relative.len(), measurements.len());
        assert!(sigma_m > 0.0, "likelihood sigma must be positive");
        let inv_two_var = 0.5 / (sigma_m * sigma_m);
        let mut report = WeightReport::default();
        let mut log_w = Vec::with_capacity(self.particles.len());
        for (p, &w) in self.particles.iter().zip(&self.weights) {
            let ll = log_likelihood(p, relative, measurements, map, inv_two_var);
            if ll.is_none() {
                report.off_map += 1;
            }
            log_w.push(match ll {
                Some(ll) if w > 0.0 => ll + w.ln(),
                _ => f64::NEG_INFINITY,
            });
        }
        let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            warn!("all particle weights vanished; resetting to uniform");
            report.reset = true;
            let w = 1.0 / self.weights.len() as f64;
            self.weights.iter_mut().for_each(|x| *x = w);
            return report;
        }
        for (w, lw) in self.weights.iter_mut().zip(&log_w) {
            *w = (lw - max).exp();
        }
        self.normalize();
        report
    }

    /// Systematic resampling when the effective sample size drops below
    /// `resample_threshold * M`. Returns whether it resampled.
    pub fn resample<R: Rng + ?Sized>(&mut self, cfg: &PfConfig, rng: &mut R) -> bool {
        let m = self.particles.len();
        if self.effective_sample_size() >= cfg.resample_threshold * m as f64 {
            return false;
        }
        let u0: f64 = rng.random::<f64>() / m as f64;
        let picks = systematic_indices(&self.weights, u0);
        self.particles = picks.into_iter().map(|i| self.particles[i]).collect();
        let w = 1.0 / m as f64;
        self.weights.iter_mut().for_each(|x| *x = w);
        true
    }

    /// Weighted mean, circular for the angles.
    pub fn expectation(&self) -> Particle {
        let mut x = 0.0;
        let mut y = 0.0;
        for (p, w) in self.particles.iter().zip(&self.weights) {
            x += w * p.x;
            y += w * p.y;
        }
        let pairs = |f: fn(&Particle) -> f64| {
            self.particles
                .iter()
                .zip(&self.weights)
                .map(move |(p, &w)| (f(p), w))
        };
        Particle {
            x,
            y,
            theta: circular_mean(pairs(|p| p.theta)).unwrap_or(0.0),
            gamma: circular_mean(pairs(|p| p.gamma)).unwrap_or(0.0),
        }
    }
}

/// Sum of Gaussian log-likelihood terms, up to a constant; `None` if any
/// predicted position is off the map.
fn log_likelihood(
    p: &Particle,
    relative: &[(f64, f64)],
    measurements: &[f64],
    map: &MagneticMap,
    inv_two_var: f64,
) -> Option<f64> {
    let (s, c) = p.gamma.sin_cos();
    let mut sum = 0.0;
    for (&(rx, ry), &t) in relative.iter().zip(measurements) {
        let e = p.x + c * rx - s * ry;
        let n = p.y + s * rx + c * ry;
        let r = t - map.try_sample(e, n)?;
        sum -= r * r * inv_two_var;
    }
    Some(sum)
}

/// Indices chosen by systematic resampling with first pointer `u0` in
/// `[0, 1/M)`.
pub fn systematic_indices(weights: &[f64], u0: f64) -> Vec<usize> {
    let m = weights.len();
    let step = 1.0 / m as f64;
    let mut out = Vec::with_capacity(m);
    let mut cumulative = weights[0];
    let mut i = 0;
    for n in 0..m {
        let u = u0 + n as f64 * step;
        while u > cumulative && i + 1 < m {
            i += 1;
            cumulative += weights[i];
        }
        out.push(i);
    }
    out
}

/// Rotates a relative position by `gamma`.
pub fn rotate_relative(rel: (f64, f64), gamma: f64) -> (f64, f64) {
    let (s, c) = gamma.sin_cos();
    (c * rel.0 - s * rel.1, s * rel.0 + c * rel.1)
}

/// Global positions of every UAV implied by one particle.
pub fn predicted_positions(particle: &Particle, relative: &[(f64, f64)]) -> Vec<(f64, f64)> {
    relative
        .iter()
        .map(|&r| {
            let (dx, dy) = rotate_relative(r, particle.gamma);
            (particle.x + dx, particle.y + dy)
        })
        .collect()
}
