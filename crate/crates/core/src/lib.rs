//! Cooperative localization for a group of UAVs flying without GNSS.
//!
//! The group keeps its relative geometry with a stacked-pose extended Kalman
//! filter fed by pairwise range measurements, and anchors that geometry
//! globally with a small particle filter that matches every member's
//! magnetometer reading against a magnetic anomaly map.
//!
//! Modules, bottom-up:
//!
//! - [`magmap`]: anomaly grids, bilinear sampling, synthetic generation, smoothing, grid files.
//! - [`comm`]: the three-matching communication schedule and the packet store.
//! - [`world`]: ground truth kinematics, reference profiles, tracking control, sensors.
//! - [`ranging_ekf`]: relative localization from pairwise ranges.
//! - [`magnetic_pf`]: global localization by map matching.
//! - [`harness`]: trial configuration, the simulation loop, Monte Carlo batches, CSV output.
//!
//! Runnable walk-throughs of each capability live in `examples/`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angle;
pub mod comm;
pub mod harness;
pub mod magmap;
pub mod magnetic_pf;
pub mod ranging_ekf;
pub mod world;

pub use comm::{CommSchedule, Packet, PacketEntry, PacketStore, UavId};
pub use harness::{
    run_monte_carlo, run_trial, MonteCarloSummary, TrialConfig, TrialOptions, TrialResult,
};
pub use magmap::{MagneticMap, SyntheticMapSpec};
pub use magnetic_pf::{Particle, ParticleSet, PfConfig};
pub use ranging_ekf::{EkfConfig, EkfEstimate};
pub use world::{ControlMeasurement, NoiseConfig, Pose2D, ReferenceProfile};
