use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::config::TrialConfig;
use super::metrics::{compute_position_errors, DistanceErrorAccumulator};
use super::HarnessError;
use crate::angle::wrap;
use crate::comm::{exchange, CommSchedule, Packet, PacketEntry, PacketStore, Step};
use crate::magmap::{MagneticMap, MapError};
use crate::magnetic_pf::{rotate_relative, Particle, ParticleSet};
use crate::ranging_ekf::{relative_positions, EkfConfig, EkfEstimate};
use crate::world::{
    advance, step_group, track_controller, track_start, ControlMeasurement, Pose2D, Sensors,
    WorldSnapshot,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrialOptions {
    /// Keep per-step truth, filter and packet rows.
    pub record_traces: bool,
    /// Track covariance symmetry and the smallest eigenvalue every step.
    pub check_covariance: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TrialFlags {
    pub weight_resets: u64,
    pub off_map_particles: u64,
    pub degenerate_ranges: u64,
    /// The true trajectory left the map and the trial stopped early.
    pub left_map: bool,
}

/// Worst covariance health seen over a trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceHealth {
    pub max_asymmetry: f64,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthRow {
    pub k: Step,
    pub uav: usize,
    pub x_true: f64,
    pub y_true: f64,
    pub theta_true: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EkfRow {
    pub k: Step,
    pub uav: usize,
    pub x_est: f64,
    pub y_est: f64,
    pub theta_est: f64,
    pub cov_trace: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PfRow {
    pub k: Step,
    pub uav: usize,
    pub x_pf: f64,
    pub y_pf: f64,
    pub theta_pf: f64,
    pub gamma_pf: f64,
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PacketRow {
    pub k: Step,
    pub uav: usize,
    pub field: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialTraces {
    pub truth: Vec<TruthRow>,
    pub ekf: Vec<EkfRow>,
    pub pf: Vec<PfRow>,
    pub packets: Vec<PacketRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub seed: u64,
    pub n_uavs: usize,
    /// steps simulated; fewer than planned if the trial aborted
    pub steps: u64,
    /// UAV 0's reported position error at steps `1..=steps`
    pub position_error: Vec<f64>,
    pub dead_reckoning_error: Vec<f64>,
    pub avg_position_error: f64,
    pub dr_avg_error: f64,
    pub dr_final_error: f64,
    pub measured_pair_error: Option<f64>,
    pub unmeasured_pair_error: Option<f64>,
    pub flags: TrialFlags,
    pub covariance_health: Option<CovarianceHealth>,
    pub traces: Option<TrialTraces>,
}

/// Builds the map named by `cfg` and runs one trial on it.
pub fn run_trial(cfg: &TrialConfig, seed: u64) -> Result<TrialResult, HarnessError> {
    let map = cfg.build_map()?;
    run_trial_on_map(cfg, &map, seed, &TrialOptions::default())
}

/// One closed-loop flight: sense, exchange, filter the complete packet `s`
/// steps back, catch up by dead reckoning, steer.
pub fn run_trial_on_map(
    cfg: &TrialConfig,
    map: &MagneticMap,
    seed: u64,
    opts: &TrialOptions,
) -> Result<TrialResult, HarnessError> {
    cfg.validate()?;
    let n = cfg.group_size;
    let ts = cfg.ts;
    let total_steps = cfg.step_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pf_rng = ChaCha8Rng::seed_from_u64(seed);
    pf_rng.set_stream(1);

    let profiles = cfg.profile.draw(n, &mut rng);
    let starts: Vec<Pose2D> = profiles.iter().map(track_start).collect();
    let offset = Normal::new(0.0, cfg.initial_position_sigma).expect("validated sigma");
    let mut truth: Vec<Pose2D> = starts
        .iter()
        .map(|s| Pose2D::new(s.x + offset.sample(&mut rng), s.y + offset.sample(&mut rng), s.theta))
        .collect();
    let sensors = Sensors::new(cfg.noise, n, &mut rng);

    let schedule = CommSchedule::new(n);
    let horizon = schedule.propagation_steps();
    let mut stores: Vec<PacketStore> = (0..n).map(|_| PacketStore::new(n, horizon)).collect();

    let ekf_cfg = cfg.ekf_config();
    let mut ekf = EkfEstimate::new(
        &starts,
        cfg.ekf.initial_position_std.powi(2),
        cfg.ekf.initial_heading_std_deg.to_radians().powi(2),
    );
    let mut pf = ParticleSet::initialize(&starts[0], &cfg.pf, &mut pf_rng);
    let sigma_like = cfg.likelihood_sigma();

    let mut reported = starts.clone();
    let mut dead_reckoning = starts[0];
    let mut own_odometry: Vec<Vec<ControlMeasurement>> = Vec::with_capacity(total_steps as usize);
    let mut truth_history: Vec<Vec<Pose2D>> = Vec::with_capacity(total_steps as usize + 1);
    truth_history.push(truth.clone());

    let mut truth_reported = Vec::with_capacity(total_steps as usize);
    let mut est_reported = Vec::with_capacity(total_steps as usize);
    let mut dr_reported = Vec::with_capacity(total_steps as usize);
    let mut distances = DistanceErrorAccumulator::new(&schedule);
    let mut flags = TrialFlags::default();
    let mut health = opts.check_covariance.then_some(CovarianceHealth {
        max_asymmetry: 0.0,
        min_eigenvalue: f64::INFINITY,
    });
    let mut traces = opts.record_traces.then(TrialTraces::default);
    let mut steps = 0;

    for k in 1..=total_steps {
        let t = (k - 1) as f64 * ts;
        let commands: Vec<ControlMeasurement> = reported
            .iter()
            .zip(&profiles)
            .map(|(est, profile)| track_controller(est, profile, t, &cfg.controller))
            .collect();
        step_group(&mut truth, &commands, ts);
        let snapshot = WorldSnapshot {
            poses: truth.clone(),
            commands,
        };
        let measurements = match sensors.sense(&snapshot, k, &schedule, map, &mut rng) {
            Ok(m) => m,
            Err(MapError::OutOfBounds { .. }) => {
                flags.left_map = true;
                break;
            }
            Err(e) => return Err(e.into()),
        };
        truth_history.push(truth.clone());
        let odometry: Vec<ControlMeasurement> = measurements.iter().map(|m| m.step_odometry()).collect();
        own_odometry.push(odometry.clone());

        for (uav, (store, m)) in stores.iter_mut().zip(&measurements).enumerate() {
            let entry = PacketEntry {
                velocity: odometry[uav].v,
                yaw_rate: odometry[uav].omega,
                magnetic: m.magnetic,
                range: m.range,
            };
            store.record(k, uav, entry)?;
        }
        exchange(&mut stores, &schedule.edge_set(k), k)?;

        if k > horizon {
            let filtered = k - horizon;
            let packet = stores[0]
                .packet(filtered)
                .filter(|p| p.is_complete())
                .ok_or(HarnessError::IncompletePacket(filtered))?
                .clone();
            let (anchors, est) = filter_step(
                &packet,
                &mut ekf,
                &mut pf,
                map,
                cfg,
                &ekf_cfg,
                sigma_like,
                &mut pf_rng,
                &mut flags,
                health.as_mut(),
            );
            distances.add(&truth_history[filtered as usize], &ekf.poses());
            for (uav, anchor) in anchors.into_iter().enumerate() {
                let catch_up = own_odometry[filtered as usize..k as usize].iter().map(|o| o[uav]);
                reported[uav] = catch_up.fold(anchor, |p, u| advance(p, u, ts));
            }
            if let Some(tr) = traces.as_mut() {
                record_filter_traces(tr, filtered, &packet, &ekf, &est, pf.effective_sample_size());
            }
        } else {
            for (pose, u) in reported.iter_mut().zip(&odometry) {
                *pose = advance(*pose, *u, ts);
            }
        }
        dead_reckoning = advance(dead_reckoning, odometry[0], ts);

        if let Some(tr) = traces.as_mut() {
            for (uav, p) in truth.iter().enumerate() {
                tr.truth.push(TruthRow {
                    k,
                    uav,
                    x_true: p.x,
                    y_true: p.y,
                    theta_true: p.theta,
                });
            }
        }
        truth_reported.push(truth[0]);
        est_reported.push(reported[0]);
        dr_reported.push(dead_reckoning);
        steps = k;
    }

    let skip = (cfg.metric_warmup / ts).round() as usize;
    let position = compute_position_errors(&truth_reported, &est_reported, &dr_reported, skip);
    let dist = distances.finish();
    Ok(TrialResult {
        seed,
        n_uavs: n,
        steps,
        avg_position_error: position.estimate_average,
        dr_avg_error: position.dead_reckoning_average,
        dr_final_error: position.dead_reckoning_final,
        position_error: position.estimate,
        dead_reckoning_error: position.dead_reckoning,
        measured_pair_error: dist.measured,
        unmeasured_pair_error: dist.unmeasured,
        flags,
        covariance_health: health,
        traces,
    })
}

/// Runs both filters on one complete packet. Returns every UAV's global pose
/// at the packet's time and the particle estimate behind it.
#[allow(clippy::too_many_arguments)]
fn filter_step(
    packet: &Packet,
    ekf: &mut EkfEstimate,
    pf: &mut ParticleSet,
    map: &MagneticMap,
    cfg: &TrialConfig,
    ekf_cfg: &EkfConfig,
    sigma_like: f64,
    rng: &mut ChaCha8Rng,
    flags: &mut TrialFlags,
    mut health: Option<&mut CovarianceHealth>,
) -> (Vec<Pose2D>, Particle) {
    let entries: Vec<&PacketEntry> = packet.entries.iter().flatten().collect();
    let controls: Vec<ControlMeasurement> = entries
        .iter()
        .map(|e| ControlMeasurement::new(e.velocity, e.yaw_rate))
        .collect();
    let mut observe = |ekf: &EkfEstimate| {
        if let Some(h) = health.as_deref_mut() {
            let (asym, min_eig) = ekf.covariance_health();
            h.max_asymmetry = h.max_asymmetry.max(asym);
            h.min_eigenvalue = h.min_eigenvalue.min(min_eig);
        }
    };
    ekf.predict(&controls, ekf_cfg);
    observe(ekf);
    let report = ekf.update(&packet.ranges(), ekf_cfg);
    flags.degenerate_ranges += report.degenerate.len() as u64;
    observe(ekf);

    let shape = ekf.poses();
    let relative = relative_positions(&shape, 0);
    let magnetic: Vec<f64> = entries.iter().map(|e| e.magnetic).collect();
    pf.propagate(&controls[0], cfg.ts, &cfg.pf, rng);
    let w = pf.weight_update(&relative, &magnetic, map, sigma_like);
    flags.off_map_particles += w.off_map as u64;
    flags.weight_resets += u64::from(w.reset);
    let est = pf.expectation();
    pf.resample(&cfg.pf, rng);

    let anchors = relative
        .iter()
        .zip(&shape)
        .enumerate()
        .map(|(uav, (&rel, pose))| {
            let (dx, dy) = rotate_relative(rel, est.gamma);
            let theta = if uav == 0 { est.theta } else { wrap(pose.theta + est.gamma) };
            Pose2D::new(est.x + dx, est.y + dy, theta)
        })
        .collect();
    (anchors, est)
}

fn record_filter_traces(
    tr: &mut TrialTraces,
    k: Step,
    packet: &Packet,
    ekf: &EkfEstimate,
    e: &Particle,
    ess: f64,
) {
    for (uav, p) in ekf.poses().iter().enumerate() {
        tr.ekf.push(EkfRow {
            k,
            uav,
            x_est: p.x,
            y_est: p.y,
            theta_est: p.theta,
            cov_trace: ekf.block_trace(uav),
        });
    }
    tr.pf.push(PfRow {
        k,
        uav: 0,
        x_pf: e.x,
        y_pf: e.y,
        theta_pf: e.theta,
        gamma_pf: e.gamma,
        ess,
    });
    tr.packets.extend(packet.trace_rows().into_iter().map(|(k, uav, field, value)| PacketRow {
        k,
        uav,
        field,
        value,
    }));
}
