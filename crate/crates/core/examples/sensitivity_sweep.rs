//! Ranging-noise sweep with common seeds across cases.

use coopnav::harness::{run_sweep, NoiseField, SweepCase, TrialConfig, TrialOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = TrialConfig::baseline(4, 300.0);
    cfg.seed = 3;
    cfg.trials = 8;
    cfg.pf.particle_count = 1000;
    cfg.sweep = [0.5, 1.0, 5.0, 20.0]
        .into_iter()
        .map(|value| SweepCase {
            name: format!("sigma_r_{value}"),
            field: NoiseField::SigmaR,
            value,
        })
        .collect();

    println!("{:>14}  {:>10}  {:>14}", "case", "error (m)", "pair err (m)");
    for b in run_sweep(&cfg, &TrialOptions::default())? {
        let s = &b.summary;
        let pairs = s.measured_pair_error.as_ref().map_or(f64::NAN, |m| m.mean);
        println!("{:>14}  {:10.3}  {:14.4}", s.case, s.position_error.mean, pairs);
    }
    Ok(())
}
