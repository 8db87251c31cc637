use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use coopnav::harness::{
    analyze, format_summary, run_batch, run_sweep, write_batch, TrialConfig, TrialOptions,
};
use coopnav::magmap::SyntheticMapSpec;

#[derive(Parser)]
#[command(version, about = "Cooperative magnetic navigation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo batch for one configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `trials` from the config.
        #[arg(long)]
        trials: Option<usize>,
        /// Overrides the master `seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-step traces for every trial.
        #[arg(long)]
        traces: bool,
    },
    /// Run every `[[sweep]]` case with shared seeds, one subdirectory each.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic anomaly grid from a TOML recipe.
    Mapgen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute summary tables from a results directory.
    Analyze {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            trials,
            seed,
            out,
            traces,
        } => {
            let mut cfg = TrialConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let map = cfg.build_map()?;
            info!("running {} trials of N={} for {} s", cfg.trials, cfg.group_size, cfg.duration);
            let opts = TrialOptions {
                record_traces: traces,
                check_covariance: false,
            };
            let batch = run_batch(&cfg, &map, cfg.trials, &opts)?;
            write_batch(&out, &batch)?;
            fs::write(out.join("config.toml"), cfg.to_toml_string()?)?;
            print!("{}", format_summary(&batch.summary));
        }
        Command::Sweep { config, out } => {
            let cfg = TrialConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            if cfg.sweep.is_empty() {
                bail!("{} has no [[sweep]] cases", config.display());
            }
            let batches = run_sweep(&cfg, &TrialOptions::default())?;
            for b in &batches {
                write_batch(out.join(&b.summary.case), b)?;
                print!("{}", format_summary(&b.summary));
            }
            fs::write(out.join("config.toml"), cfg.to_toml_string()?)?;
        }
        Command::Mapgen { spec, out } => {
            let text = fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let spec: SyntheticMapSpec = toml::from_str(&text)?;
            let map = spec.generate()?;
            info!("{} x {} nodes at {} m", map.n_cols(), map.n_rows(), map.cell_size());
            map.save_grid(&out)?;
        }
        Command::Analyze { input } => {
            let summaries = analyze(&input)?;
            if summaries.is_empty() {
                bail!("no trials.csv found under {}", input.display());
            }
            for s in &summaries {
                print!("{}", format_summary(s));
            }
        }
    }
    Ok(())
}
