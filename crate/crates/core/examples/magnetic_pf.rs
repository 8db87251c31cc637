//! Map matching for a single UAV flying east with noisy odometry.

use coopnav::harness::TrialConfig;
use coopnav::magnetic_pf::{ParticleSet, PfConfig};
use coopnav::ranging_ekf::dead_reckon;
use coopnav::world::{advance, ControlMeasurement, Pose2D};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ts = 0.2;
    let map = TrialConfig::baseline(1, 300.0).build_map()?;
    let cfg = PfConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let v_bias = 0.2;
    let v = Normal::new(v_bias, 0.3)?;
    let g = Normal::new(0.0, 1e-4)?;
    let m = Normal::new(0.0, 10.0)?;

    let start = Pose2D::default();
    let mut truth = start;
    let mut set = ParticleSet::initialize(&start, &cfg, &mut rng);
    let mut odometry = Vec::new();
    let cmd = ControlMeasurement::new(50.0, 0.0);
    for k in 1..=1500 {
        truth = advance(truth, cmd, ts);
        let odo = ControlMeasurement::new(cmd.v + v.sample(&mut rng), g.sample(&mut rng));
        odometry.push(odo);
        set.propagate(&odo, ts, &cfg, &mut rng);
        let reading = map.sample(truth.x, truth.y)? + m.sample(&mut rng);
        let report = set.weight_update(&[(0.0, 0.0)], &[reading], &map, 10.0);
        let est = set.expectation();
        let resampled = set.resample(&cfg, &mut rng);
        if k % 300 == 0 {
            let dr = dead_reckon(start, &odometry, ts);
            println!(
                "t={:4.0} s  pf {:6.2} m  dr {:6.2} m  ess {:6.0}  resampled {resampled}  off-map {}",
                k as f64 * ts,
                est.pose().distance_to(&truth),
                dr.distance_to(&truth),
                set.effective_sample_size(),
                report.off_map,
            );
        }
    }
    Ok(())
}
