//! One closed-loop trial with traces written to a directory.
//!
//! cargo run --example single_trial -- 4 /tmp/trial

use coopnav::harness::{run_batch, write_batch, TrialConfig, TrialOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(Ok(4), |s| s.parse())?;
    let out = args.next();

    let mut cfg = TrialConfig::baseline(n, 300.0);
    cfg.seed = 5;
    let map = cfg.build_map()?;
    let opts = TrialOptions {
        record_traces: out.is_some(),
        check_covariance: true,
    };
    let batch = run_batch(&cfg, &map, 1, &opts)?;
    let r = &batch.results[0];
    println!("N={n}, {} steps", r.steps);
    println!("avg position error  {:8.3} m", r.avg_position_error);
    println!("dead reckoning      {:8.3} m (final {:.3} m)", r.dr_avg_error, r.dr_final_error);
    if let Some(d) = r.measured_pair_error {
        println!("measured pairs      {d:8.4} m");
    }
    if let Some(d) = r.unmeasured_pair_error {
        println!("unmeasured pairs    {d:8.4} m");
    }
    println!("{:?}", r.flags);
    if let Some(h) = r.covariance_health {
        println!("covariance min eigenvalue {:.3e}", h.min_eigenvalue);
    }
    if let Some(dir) = out {
        write_batch(&dir, &batch)?;
        println!("traces in {dir}/traces/trial_0000");
    }
    Ok(())
}
