//! Four UAVs on a square: dead reckoning versus the ranging filter.

use coopnav::comm::CommSchedule;
use coopnav::ranging_ekf::{estimate_with_deadreckoning, EkfConfig, EkfEstimate};
use coopnav::world::{advance, ControlMeasurement, NoiseConfig, Pose2D};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() {
    let ts = 0.2;
    let noise = NoiseConfig::default();
    let cfg = EkfConfig::from_noise(&noise, ts, 2.0, 0.01);
    let mut truth = vec![
        Pose2D::new(0.0, 0.0, 0.0),
        Pose2D::new(0.0, 1000.0, 0.0),
        Pose2D::new(1000.0, 0.0, 0.0),
        Pose2D::new(1000.0, 1000.0, 0.0),
    ];
    let sched = CommSchedule::new(truth.len());
    let mut ekf = EkfEstimate::new(&truth, 1.0, 1e-4);
    let mut odometry = vec![Vec::new(); truth.len()];
    let start = truth.clone();

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v = Normal::new(0.0, noise.sigma_v).unwrap();
    let g = Normal::new(0.0, noise.sigma_g).unwrap();
    let r = Normal::new(0.0, noise.sigma_r).unwrap();
    for k in 0..1500u64 {
        let cmd = ControlMeasurement::new(50.0, 0.01 * (k as f64 * ts * 0.1).sin());
        let controls: Vec<_> = truth
            .iter_mut()
            .map(|p| {
                *p = advance(*p, cmd, ts);
                ControlMeasurement::new(cmd.v + v.sample(&mut rng), cmd.omega + g.sample(&mut rng))
            })
            .collect();
        for (i, c) in controls.iter().enumerate() {
            odometry[i].push(*c);
        }
        ekf.predict(&controls, &cfg);
        let ranges: Vec<_> = sched
            .edge_set(k)
            .into_iter()
            .map(|(a, b)| (a, b, truth[a].distance_to(&truth[b]) + r.sample(&mut rng)))
            .collect();
        ekf.update(&ranges, &cfg);
    }

    let dr = estimate_with_deadreckoning(&start, &odometry, ts);
    let shape_error = |est: &[Pose2D]| {
        let mut worst: f64 = 0.0;
        for i in 0..est.len() {
            for j in i + 1..est.len() {
                let d = est[i].distance_to(&est[j]) - truth[i].distance_to(&truth[j]);
                worst = worst.max(d.abs());
            }
        }
        worst
    };
    println!("after 5 min, worst inter-UAV distance error:");
    println!("  dead reckoning {:8.3} m", shape_error(&dr));
    println!("  ranging filter {:8.3} m", shape_error(&ekf.poses()));
    println!("  covariance trace {:.3}", ekf.covariance_trace());
}
