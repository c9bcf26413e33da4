//! `mmab`: run spectrum-sharing bandit experiments and inspect their inputs.

use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mmab_core::harness::{run_experiment, ExperimentConfig, RunSummary};
use mmab_core::{
    channel_quality, enumerate_optimal, hungarian_max, ideal_response, Algorithm, ChannelResponse, Error,
    IdealChannelSpec, MeanRewardMatrix, Result,
};

#[derive(Parser)]
#[command(name = "mmab", version, about = "Multi-player bandit simulator for cognitive radar spectrum sharing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated subset of ucb1, musical_chairs, sic, m_etc_elim.
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<String>>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed_base: Option<u64>,
        /// Output directory for CSV traces and plots.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write regret.svg and collisions.svg.
        #[arg(long)]
        plots: bool,
    },
    /// Optimal matching of a mean-reward matrix (CSV, one row per player).
    Matching {
        #[arg(long)]
        means: PathBuf,
    },
    /// Channel quality of a measured response against an ideal channel.
    Quality {
        /// CSV with columns freq_hz, amplitude, phase_rad.
        #[arg(long)]
        channel: PathBuf,
        /// Ideal reference as `gain,delay_seconds`.
        #[arg(long, value_name = "GAIN,DELAY", value_parser = parse_ideal, default_value = "1,0")]
        ideal: (f64, f64),
    },
}

fn parse_ideal(s: &str) -> std::result::Result<(f64, f64), String> {
    let (g, d) = s.split_once(',').ok_or("expected `gain,delay`")?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok((num(g)?, num(d)?))
}

fn open(path: &PathBuf) -> Result<File> {
    File::open(path).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })
}

fn print_summaries(config: &ExperimentConfig, summaries: &[RunSummary]) {
    println!(
        "{:<16} {:>5} {:>16} {:>14} {:>18}",
        "algorithm", "runs", "final regret", "collisions", "converged at (s)"
    );
    for &alg in &config.algorithms {
        let runs: Vec<&RunSummary> = summaries.iter().filter(|s| s.algorithm == alg).collect();
        let n = runs.len() as f64;
        let mean = |f: fn(&RunSummary) -> f64| runs.iter().map(|s| f(s)).sum::<f64>() / n;
        println!(
            "{:<16} {:>5} {:>16.1} {:>14.1} {:>18.3}",
            alg.display_name(),
            runs.len(),
            mean(|s| s.final_regret_pseudo),
            mean(|s| s.final_collisions as f64),
            mean(|s| s.convergence_seconds),
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            algorithms,
            runs,
            seed_base,
            out,
            plots,
        } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(names) = algorithms {
                cfg.algorithms = names.iter().map(|n| n.trim().parse()).collect::<Result<Vec<Algorithm>>>()?;
            }
            if let Some(n) = runs {
                cfg.n_runs = n;
            }
            if let Some(k) = seed_base {
                cfg.seed_base = k;
            }
            if out.is_some() {
                cfg.out_dir = out;
            }
            cfg.plots |= plots;
            cfg.validate()?;
            let output = run_experiment(&cfg)?;
            print_summaries(&cfg, &output.summaries);
            for f in &output.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Matching { means } => {
            let m = MeanRewardMatrix::from_csv(open(&means)?)?;
            let report = hungarian_max(m.rows())?;
            println!("utility: {:.6}", report.utility);
            println!("matching: {}", report.matching);
            if m.arms() <= mmab_core::matching::ENUMERATION_MAX_ARMS {
                let optima = enumerate_optimal(m.rows(), mmab_core::matching::UTILITY_TOL)?;
                println!("optimal matchings: {}", optima.len());
                for o in optima.iter().skip(1) {
                    println!("  also optimal: {o}");
                }
            }
        }
        Command::Quality { channel, ideal } => {
            let h = ChannelResponse::from_csv(open(&channel)?)?;
            let spec = IdealChannelSpec {
                gain: ideal.0,
                group_delay: ideal.1,
                center: h.center(),
                bandwidth: h.bandwidth(),
            };
            let reference = ideal_response(&spec, h.grid())?;
            println!("{:.9}", channel_quality(&h, &reference)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
