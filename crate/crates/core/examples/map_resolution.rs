//! Error inflation on a smoothed map for a lone UAV and a group of eight.

use coopnav::harness::{run_batch, MapVariant, TrialConfig, TrialOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trials: usize = std::env::args().nth(1).map_or(Ok(10), |s| s.parse())?;
    for n in [1, 8] {
        let mut errors = Vec::new();
        for variant in [MapVariant::High, MapVariant::Low] {
            let mut cfg = TrialConfig::baseline(n, 600.0);
            cfg.seed = 1;
            cfg.map_variant = variant;
            let map = cfg.build_map()?;
            let b = run_batch(&cfg, &map, trials, &TrialOptions::default())?;
            errors.push(b.summary.position_error.mean);
        }
        println!(
            "N={n}: {:.3} m on the full map, {:.3} m smoothed, x{:.3}",
            errors[0],
            errors[1],
            errors[1] / errors[0]
        );
    }
    Ok(())
}
