//! Generates a small anomaly field, samples it and writes the grid file.
//!
//! cargo run --example synthetic_map -- /tmp/field.grid

use coopnav::magmap::SyntheticMapSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SyntheticMapSpec {
        seed: 7,
        origin_east: 0.0,
        origin_north: 0.0,
        extent: (20_000.0, 10_000.0),
        cell_size: 50.0,
        baseline: 0.0,
        bump_count: 200,
        bump_amplitude_range: (-300.0, 300.0),
        bump_sigma_range: (150.0, 1500.0),
    };
    let map = spec.generate()?;
    println!("{} x {} nodes, cell {} m", map.n_cols(), map.n_rows(), map.cell_size());

    let (lo, hi) = map
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    println!("anomaly range {lo:.1} .. {hi:.1} nT");

    for east in [1000.0, 5025.0, 12_345.6] {
        println!("B({east:.1}, 5000) = {:.2} nT", map.sample(east, 5000.0)?);
    }
    let smooth = map.degrade_resolution(500.0)?;
    println!("after 500 m smoothing: B(5025, 5000) = {:.2} nT", smooth.sample(5025.0, 5000.0)?);

    if let Some(path) = std::env::args().nth(1) {
        map.save_grid(&path)?;
        println!("wrote {path}");
    }
    Ok(())
}
