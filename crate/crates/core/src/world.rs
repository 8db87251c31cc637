//! Ground truth: kinematics, reference profiles, tracking control and
//! sensor synthesis.
//!
//! The filter step is the 5 Hz ranging/magnetometer period. Odometry runs at
//! 10 Hz, so each step carries two velocity/yaw-rate samples.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::angle::wrap;
use crate::comm::{CommSchedule, RangeMeasurement, Step};
use crate::magmap::{MagneticMap, MapError};

/// Odometry samples per filter step.
pub const ODOMETRY_PER_STEP: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2D {
    /// m east
    pub x: f64,
    /// m north
    pub y: f64,
    /// rad, counter-clockwise from east, in (-pi, pi]
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap(theta),
        }
    }

    pub fn distance_to(&self, other: &Pose2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Velocity and yaw rate, commanded or measured.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlMeasurement {
    /// m/s
    pub v: f64,
    /// rad/s
    pub omega: f64,
}

impl ControlMeasurement {
    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }

    pub fn mean(samples: &[ControlMeasurement]) -> Self {
        let n = samples.len() as f64;
        let (v, w) = samples
            .iter()
            .fold((0.0, 0.0), |(v, w), s| (v + s.v, w + s.omega));
        Self::new(v / n, w / n)
    }
}

/// One discrete kinematic step: the heading is advanced by `ts * omega`
/// before the velocity is projected.
#[inline]
pub fn advance(pose: Pose2D, control: ControlMeasurement, ts: f64) -> Pose2D {
    let heading = pose.theta + ts * control.omega;
    Pose2D::new(
        pose.x + ts * control.v * heading.cos(),
        pose.y + ts * control.v * heading.sin(),
        heading,
    )
}

/// Truth propagation with noiseless commanded values.
pub fn step_true_pose(pose: Pose2D, control: ControlMeasurement, ts: f64) -> Pose2D {
    advance(pose, control, ts)
}

/// Sine-varying reference velocity on an east-bound track.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceProfile {
    /// m north of the first track
    pub track_offset_north: f64,
    pub vel_amplitude: f64,
    pub vel_baseline: f64,
    /// rad/s
    pub vel_angular_frequency: f64,
    pub vel_phase: f64,
}

impl ReferenceProfile {
    pub fn velocity(&self, t: f64) -> f64 {
        self.vel_baseline + self.vel_amplitude * (self.vel_angular_frequency * t + self.vel_phase).sin()
    }

    pub fn max_velocity(&self) -> f64 {
        self.vel_baseline + self.vel_amplitude.abs()
    }
}

pub fn reference_velocity(profile: &ReferenceProfile, t: f64) -> f64 {
    profile.velocity(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerGains {
    /// rad/s per m of cross-track error
    pub cross_track_gain: f64,
    /// rad/s per rad of heading error
    pub heading_gain: f64,
    /// rad/s
    pub max_yaw_rate: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            cross_track_gain: 0.0008,
            heading_gain: 0.36,
            max_yaw_rate: 0.2,
        }
    }
}

/// Velocity feed-forward plus clamped proportional steering toward the
/// east-bound reference line.
pub fn track_controller(
    estimated: &Pose2D,
    profile: &ReferenceProfile,
    t: f64,
    gains: &ControllerGains,
) -> ControlMeasurement {
    let cross_track = estimated.y - profile.track_offset_north;
    let heading_error = wrap(estimated.theta);
    let omega = -gains.cross_track_gain * cross_track - gains.heading_gain * heading_error;
    ControlMeasurement::new(
        profile.velocity(t),
        omega.clamp(-gains.max_yaw_rate, gains.max_yaw_rate),
    )
}

mod deg_per_s {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(rad: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(rad.to_degrees())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        f64::deserialize(d).map(f64::to_radians)
    }
}

/// Sensor noise levels. Turn-on biases are drawn per UAV per trial with
/// standard deviation `bias_fraction * sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// ranging, m
    pub sigma_r: f64,
    /// magnetometer, nT
    pub sigma_m: f64,
    /// velocity, m/s
    pub sigma_v: f64,
    /// yaw rate, rad/s (deg/s in config files)
    #[serde(rename = "sigma_g_deg_per_s", with = "deg_per_s")]
    pub sigma_g: f64,
    pub bias_fraction: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma_r: 1.0,
            sigma_m: 10.0,
            sigma_v: 0.3,
            sigma_g: 0.005f64.to_radians(),
            bias_fraction: 0.1,
        }
    }
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        Self {
            sigma_r: 0.0,
            sigma_m: 0.0,
            sigma_v: 0.0,
            sigma_g: 0.0,
            bias_fraction: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("sigma_r", self.sigma_r),
            ("sigma_m", self.sigma_m),
            ("sigma_v", self.sigma_v),
            ("sigma_g", self.sigma_g),
            ("bias_fraction", self.bias_fraction),
        ];
        for (name, v) in fields {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(format!("{name} = {v} must be a finite non-negative number"));
            }
        }
        Ok(())
    }
}

/// Per-UAV odometry biases, constant for a trial.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TurnOnBias {
    /// m/s
    pub velocity: f64,
    /// rad/s
    pub yaw_rate: f64,
}

impl TurnOnBias {
    pub fn draw<R: Rng + ?Sized>(noise: &NoiseConfig, rng: &mut R) -> Self {
        let zv: f64 = rng.sample(StandardNormal);
        let zg: f64 = rng.sample(StandardNormal);
        Self {
            velocity: noise.bias_fraction * noise.sigma_v * zv,
            yaw_rate: noise.bias_fraction * noise.sigma_g * zg,
        }
    }
}

/// One UAV's sensor output for one filter step.
#[derive(Debug, Clone, PartialEq)]
pub struct UavMeasurements {
    pub odometry: [ControlMeasurement; ODOMETRY_PER_STEP],
    pub magnetic: f64,
    pub range: Option<RangeMeasurement>,
}

impl UavMeasurements {
    /// Odometry averaged over the step, as consumed by the filters.
    pub fn step_odometry(&self) -> ControlMeasurement {
        ControlMeasurement::mean(&self.odometry)
    }
}

/// True state of the group at the end of step `k`, with the commands that
/// were held over that step.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldSnapshot {
    pub poses: Vec<Pose2D>,
    pub commands: Vec<ControlMeasurement>,
}

/// Noise model plus the biases drawn for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Sensors {
    pub noise: NoiseConfig,
    pub biases: Vec<TurnOnBias>,
}

impl Sensors {
    pub fn new<R: Rng + ?Sized>(noise: NoiseConfig, n_uavs: usize, rng: &mut R) -> Self {
        let biases = (0..n_uavs).map(|_| TurnOnBias::draw(&noise, rng)).collect();
        Self { noise, biases }
    }

    /// Draws every measurement for step `k`. RNG consumption order is fixed:
    /// per UAV the odometry samples and the magnetometer, then one draw per
    /// scheduled pair.
    pub fn sense<R: Rng + ?Sized>(
        &self,
        truth: &WorldSnapshot,
        k: Step,
        schedule: &CommSchedule,
        map: &MagneticMap,
        rng: &mut R,
    ) -> Result<Vec<UavMeasurements>, MapError> {
        let n = truth.poses.len();
        let mut out = Vec::with_capacity(n);
        for uav in 0..n {
            let cmd = truth.commands[uav];
            let bias = self.biases[uav];
            let mut odometry = [ControlMeasurement::default(); ODOMETRY_PER_STEP];
            for sample in &mut odometry {
                let zv: f64 = rng.sample(StandardNormal);
                let zg: f64 = rng.sample(StandardNormal);
                *sample = ControlMeasurement::new(
                    cmd.v + bias.velocity + self.noise.sigma_v * zv,
                    cmd.omega + bias.yaw_rate + self.noise.sigma_g * zg,
                );
            }
            let pose = truth.poses[uav];
            let zm: f64 = rng.sample(StandardNormal);
            let magnetic = map.sample(pose.x, pose.y)? + self.noise.sigma_m * zm;
            out.push(UavMeasurements {
                odometry,
                magnetic,
                range: None,
            });
        }
        for (a, b) in schedule.edge_set(k) {
            let zr: f64 = rng.sample(StandardNormal);
            let distance = truth.poses[a].distance_to(&truth.poses[b]) + self.noise.sigma_r * zr;
            out[a].range = Some(RangeMeasurement {
                partner: b,
                distance,
            });
            out[b].range = Some(RangeMeasurement {
                partner: a,
                distance,
            });
        }
        Ok(out)
    }
}

/// Free-function form of [`Sensors::sense`].
pub fn sense<R: Rng + ?Sized>(
    truth: &WorldSnapshot,
    k: Step,
    sensors: &Sensors,
    schedule: &CommSchedule,
    map: &MagneticMap,
    rng: &mut R,
) -> Result<Vec<UavMeasurements>, MapError> {
    sensors.sense(truth, k, schedule, map, rng)
}

/// Start of the reference track, heading east.
pub fn track_start(profile: &ReferenceProfile) -> Pose2D {
    Pose2D::new(0.0, profile.track_offset_north, 0.0)
}

/// Baseline reference profiles with tracks 1 km apart and the given phases.
pub fn baseline_profiles(phases: &[f64]) -> Vec<ReferenceProfile> {
    phases
        .iter()
        .enumerate()
        .map(|(i, &phase)| ReferenceProfile {
            track_offset_north: 1000.0 * i as f64,
            vel_amplitude: 10.0,
            vel_baseline: 50.0,
            vel_angular_frequency: 0.05,
            vel_phase: wrap_phase(phase),
        })
        .collect()
}

fn wrap_phase(p: f64) -> f64 {
    p.rem_euclid(2.0 * PI)
}

/// Advances every UAV through the 10 Hz sub-steps of one filter step.
pub fn step_group(poses: &mut [Pose2D], commands: &[ControlMeasurement], ts: f64) {
    let sub = ts / ODOMETRY_PER_STEP as f64;
    for (pose, cmd) in poses.iter_mut().zip(commands) {
        for _ in 0..ODOMETRY_PER_STEP {
            *pose = step_true_pose(*pose, *cmd, sub);
        }
    }
}
