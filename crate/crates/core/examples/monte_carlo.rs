//! Group-size comparison over a seeded batch of trials.
//!
//! cargo run --release --example monte_carlo -- 20

use coopnav::harness::{format_summary, run_batch, TrialConfig, TrialOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trials: usize = std::env::args().nth(1).map_or(Ok(10), |s| s.parse())?;
    println!("{trials} trials of 10 min per group size\n");
    for n in [1, 2, 4, 8] {
        let mut cfg = TrialConfig::baseline(n, 600.0);
        cfg.name = format!("n{n}");
        cfg.seed = 1;
        let map = cfg.build_map()?;
        let batch = run_batch(&cfg, &map, trials, &TrialOptions::default())?;
        print!("{}", format_summary(&batch.summary));
        println!();
    }
    Ok(())
}
