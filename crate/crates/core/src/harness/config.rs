use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::magmap::{MagneticMap, SyntheticMapSpec};
use crate::magnetic_pf::PfConfig;
use crate::ranging_ekf::EkfConfig;
use crate::world::{ControllerGains, NoiseConfig, ReferenceProfile};

/// Everything that defines a batch of trials. Loaded from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialConfig {
    /// Case label used in output file names.
    #[serde(default = "default_name")]
    pub name: String,
    pub group_size: usize,
    /// s
    pub duration: f64,
    /// s
    #[serde(default = "default_ts")]
    pub ts: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// m, per-axis spread of the true start around the reference start
    #[serde(default = "default_one")]
    pub initial_position_sigma: f64,
    /// s excluded from the start of the position-error average
    #[serde(default = "default_warmup")]
    pub metric_warmup: f64,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub profile: ProfileConfig,
    #[serde(default)]
    pub controller: ControllerGains,
    #[serde(default)]
    pub ekf: EkfSettings,
    #[serde(default)]
    pub pf: PfConfig,
    pub map: MapSource,
    #[serde(default)]
    pub map_variant: MapVariant,
    /// m, Gaussian smoothing applied for the low-resolution variant
    #[serde(default = "default_smoothing")]
    pub smoothing_sigma: f64,
    #[serde(default)]
    pub sweep: Vec<SweepCase>,
}

fn default_name() -> String {
    "baseline".into()
}
fn default_ts() -> f64 {
    0.2
}
fn default_trials() -> usize {
    200
}
fn default_one() -> f64 {
    1.0
}
fn default_warmup() -> f64 {
    60.0
}
fn default_smoothing() -> f64 {
    500.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileConfig {
    /// m between neighbouring east-bound tracks
    pub track_spacing: f64,
    /// m/s
    pub vel_amplitude: f64,
    /// m/s
    pub vel_baseline: f64,
    /// rad/s
    pub vel_angular_frequency: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            track_spacing: 1000.0,
            vel_amplitude: 10.0,
            vel_baseline: 50.0,
            vel_angular_frequency: 0.05,
        }
    }
}

impl ProfileConfig {
    /// Track `i` for every UAV, with phases drawn uniformly from `[0, 2 pi)`.
    pub fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<ReferenceProfile> {
        (0..n)
            .map(|i| ReferenceProfile {
                track_offset_north: self.track_spacing * i as f64,
                vel_amplitude: self.vel_amplitude,
                vel_baseline: self.vel_baseline,
                vel_angular_frequency: self.vel_angular_frequency,
                vel_phase: rng.random::<f64>() * 2.0 * PI,
            })
            .collect()
    }

    pub fn max_velocity(&self) -> f64 {
        self.vel_baseline + self.vel_amplitude.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EkfSettings {
    /// multiplier on the odometry-derived process noise
    pub process_noise_inflation: f64,
    /// m, floor on the ranging sigma used by the filter
    pub min_ranging_sigma: f64,
    /// m
    pub initial_position_std: f64,
    pub initial_heading_std_deg: f64,
}

impl Default for EkfSettings {
    fn default() -> Self {
        Self {
            process_noise_inflation: 2.0,
            min_ranging_sigma: 0.01,
            initial_position_std: 1.0,
            initial_heading_std_deg: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MapSource {
    Synthetic(SyntheticMapSettings),
    File { path: PathBuf },
}

/// Synthetic anomaly field; the extent is sized from the flight plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticMapSettings {
    #[serde(default = "default_map_seed")]
    pub seed: u64,
    /// m
    #[serde(default = "default_cell")]
    pub cell_size: f64,
    /// nT
    #[serde(default)]
    pub baseline: f64,
    #[serde(default = "default_density")]
    pub bump_density_per_km2: f64,
    /// nT
    #[serde(default = "default_amplitude")]
    pub bump_amplitude_range: (f64, f64),
    /// m
    #[serde(default = "default_sigma_range")]
    pub bump_sigma_range: (f64, f64),
    /// m around the planned corridor
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// The map is sized for at least this many tracks, so batches with
    /// different group sizes share one map.
    #[serde(default = "default_min_tracks")]
    pub min_tracks: usize,
}

fn default_map_seed() -> u64 {
    2024
}
fn default_cell() -> f64 {
    50.0
}
fn default_density() -> f64 {
    1.0
}
fn default_amplitude() -> (f64, f64) {
    (-300.0, 300.0)
}
fn default_sigma_range() -> (f64, f64) {
    (150.0, 1500.0)
}
fn default_margin() -> f64 {
    10_000.0
}
fn default_min_tracks() -> usize {
    16
}

impl Default for SyntheticMapSettings {
    fn default() -> Self {
        Self {
            seed: default_map_seed(),
            cell_size: default_cell(),
            baseline: 0.0,
            bump_density_per_km2: default_density(),
            bump_amplitude_range: default_amplitude(),
            bump_sigma_range: default_sigma_range(),
            margin: default_margin(),
            min_tracks: default_min_tracks(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapVariant {
    #[default]
    High,
    /// smoothed by `smoothing_sigma`
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseField {
    #[serde(rename = "sigma_r")]
    SigmaR,
    #[serde(rename = "sigma_m")]
    SigmaM,
    #[serde(rename = "sigma_v")]
    SigmaV,
    #[serde(rename = "sigma_g_deg_per_s")]
    SigmaGDegPerS,
    #[serde(rename = "bias_fraction")]
    BiasFraction,
}

/// One sensitivity case: a single noise field replaced by `value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepCase {
    pub name: String,
    pub field: NoiseField,
    pub value: f64,
}

impl SweepCase {
    pub fn apply(&self, noise: &mut NoiseConfig) {
        match self.field {
            NoiseField::SigmaR => noise.sigma_r = self.value,
            NoiseField::SigmaM => noise.sigma_m = self.value,
            NoiseField::SigmaV => noise.sigma_v = self.value,
            NoiseField::SigmaGDegPerS => noise.sigma_g = self.value.to_radians(),
            NoiseField::BiasFraction => noise.bias_fraction = self.value,
        }
    }
}

impl TrialConfig {
    /// Baseline noise, 2000 particles and the default synthetic map.
    pub fn baseline(group_size: usize, duration: f64) -> Self {
        Self {
            name: default_name(),
            group_size,
            duration,
            ts: default_ts(),
            seed: 0,
            trials: default_trials(),
            initial_position_sigma: 1.0,
            metric_warmup: default_warmup(),
            noise: NoiseConfig::default(),
            profile: ProfileConfig::default(),
            controller: ControllerGains::default(),
            ekf: EkfSettings::default(),
            pf: PfConfig::default(),
            map: MapSource::Synthetic(SyntheticMapSettings::default()),
            map_variant: MapVariant::High,
            smoothing_sigma: default_smoothing(),
            sweep: Vec::new(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let MapSource::File { path: map_path } = &mut cfg.map {
            if map_path.is_relative() {
                if let Some(dir) = path.parent() {
                    *map_path = dir.join(&*map_path);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.group_size == 0 {
            return bad("group_size must be at least 1".into());
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration {} must be positive", self.duration));
        }
        if !(self.ts > 0.0 && self.ts.is_finite()) {
            return bad(format!("ts {} must be positive", self.ts));
        }
        if !(self.initial_position_sigma >= 0.0) || !(self.metric_warmup >= 0.0) {
            return bad("initial_position_sigma and metric_warmup must be non-negative".into());
        }
        if self.map_variant == MapVariant::Low && !(self.smoothing_sigma > 0.0) {
            return bad("the low map variant needs a positive smoothing_sigma".into());
        }
        self.noise.validate().map_err(HarnessError::Config)?;
        self.pf.validate().map_err(HarnessError::Config)?;
        if !(self.likelihood_sigma() > 0.0) {
            return bad("sigma_m is zero; set pf.magnetic_sigma for the likelihood".into());
        }
        let e = &self.ekf;
        if !(e.process_noise_inflation >= 0.0 && e.min_ranging_sigma > 0.0) {
            return bad("ekf.process_noise_inflation must be >= 0 and min_ranging_sigma > 0".into());
        }
        if !(e.initial_position_std > 0.0 && e.initial_heading_std_deg > 0.0) {
            return bad("ekf initial standard deviations must be positive".into());
        }
        for case in &self.sweep {
            let mut n = self.noise;
            case.apply(&mut n);
            n.validate()
                .map_err(|m| HarnessError::Config(format!("sweep case {}: {m}", case.name)))?;
        }
        Ok(())
    }

    pub fn step_count(&self) -> u64 {
        (self.duration / self.ts).round() as u64
    }

    /// nT used inside the particle weights.
    pub fn likelihood_sigma(&self) -> f64 {
        self.pf.magnetic_sigma.unwrap_or(self.noise.sigma_m)
    }

    pub fn ekf_config(&self) -> EkfConfig {
        EkfConfig::from_noise(
            &self.noise,
            self.ts,
            self.ekf.process_noise_inflation,
            self.ekf.min_ranging_sigma,
        )
    }

    /// Config for one sweep case; the case name becomes the batch name.
    pub fn with_case(&self, case: &SweepCase) -> Self {
        let mut cfg = self.clone();
        case.apply(&mut cfg.noise);
        cfg.name = case.name.clone();
        cfg.sweep.clear();
        cfg
    }

    /// Grid spec covering the whole flight with margin.
    pub fn synthetic_spec(&self, s: &SyntheticMapSettings) -> SyntheticMapSpec {
        let tracks = self.group_size.max(s.min_tracks).max(1);
        let along = self.duration * self.profile.max_velocity();
        let across = self.profile.track_spacing * (tracks - 1) as f64;
        let extent = (along + 2.0 * s.margin, across + 2.0 * s.margin);
        let area_km2 = extent.0 * extent.1 / 1e6;
        SyntheticMapSpec {
            seed: s.seed,
            origin_east: -s.margin,
            origin_north: -s.margin,
            extent,
            cell_size: s.cell_size,
            baseline: s.baseline,
            bump_count: (s.bump_density_per_km2 * area_km2).round() as usize,
            bump_amplitude_range: s.bump_amplitude_range,
            bump_sigma_range: s.bump_sigma_range,
        }
    }

    /// The high-resolution map named by the config, before any smoothing.
    pub fn build_base_map(&self) -> Result<MagneticMap, HarnessError> {
        Ok(match &self.map {
            MapSource::Synthetic(s) => self.synthetic_spec(s).generate()?,
            MapSource::File { path } => MagneticMap::load_grid(path)?,
        })
    }

    /// The map used by both truth and filters for this config's variant.
    pub fn build_map(&self) -> Result<MagneticMap, HarnessError> {
        let base = self.build_base_map()?;
        self.apply_variant(base)
    }

    pub fn apply_variant(&self, base: MagneticMap) -> Result<MagneticMap, HarnessError> {
        Ok(match self.map_variant {
            MapVariant::High => base,
            MapVariant::Low => base.degrade_resolution(self.smoothing_sigma)?,
        })
    }
}
