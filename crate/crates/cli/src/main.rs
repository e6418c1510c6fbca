use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use vrpslam::harness::{run_experiment, Mode, RunOverrides};

#[derive(Parser)]
#[command(name = "vrpslam", version, about = "Run hybrid radio SLAM experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate and filter one or more seeds, writing CSV/JSON results.
    Run {
        /// Scenario TOML file.
        #[arg(long)]
        config: PathBuf,
        /// hybrid, passive-only or active-only.
        #[arg(long, default_value = "hybrid")]
        mode: Mode,
        /// A count `n` (seeds 0..n), a range `a..b`, or a comma-separated list.
        #[arg(long, default_value = "1")]
        seeds: String,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Override the particle count.
        #[arg(long)]
        particles: Option<usize>,
        /// Truncate the trajectory to this many slots.
        #[arg(long)]
        steps: Option<usize>,
    },
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().with_context(|| format!("bad seed range '{s}'"))?;
        let b: u64 = b.trim().parse().with_context(|| format!("bad seed range '{s}'"))?;
        if b <= a {
            bail!("empty seed range '{s}'");
        }
        return Ok((a..b).collect());
    }
    if s.contains(',') {
        return s
            .split(',')
            .map(|x| x.trim().parse::<u64>().with_context(|| format!("bad seed '{x}'")))
            .collect();
    }
    let n: u64 = s.parse().with_context(|| format!("bad seed count '{s}'"))?;
    if n == 0 {
        bail!("seed count must be positive");
    }
    Ok((0..n).collect())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, mode, seeds, out, particles, steps } => {
            let seeds = parse_seeds(&seeds)?;
            let overrides = RunOverrides { n_particles: particles, steps };
            let summary = run_experiment(&config, mode, &seeds, &out, &overrides)?;
            println!(
                "{} seeds, mode {}: median final MAE {:.3} m, median final OSPA {:.3} m, OSPA < 2 m from slot {}",
                summary.seeds.len(),
                summary.mode,
                summary.median_final_mae,
                summary.median_final_ospa,
                summary.median_ospa_below_2m_at.map_or("never".to_string(), |t| t.to_string()),
            );
            println!("results in {}", out.display());
        }
    }
    Ok(())
}
