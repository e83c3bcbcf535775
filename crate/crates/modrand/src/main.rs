use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use modrand::config::ExperimentConfig;
use modrand::harness::{self, PolicyFile, ReportJson};
use modrand_core::randomizer::solve_randomizer;

/// Statistical parameter privacy by model randomization.
#[derive(Parser)]
#[command(name = "modrand", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Root seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut c = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(o) = &self.out {
            c.output_dir = o.clone();
        }
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the randomizer over the leakage grid and evaluate distortion and
    /// adversary error; writes sweep.csv, distortion.csv, policies.json and
    /// reports.json.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Report information quantities in bits instead of nats.
        #[arg(long)]
        bits: bool,
    },
    /// Drift-estimator traces with and without additive Gaussian noise.
    BaselineNoise {
        #[command(flatten)]
        common: Common,
        /// Variance of the added noise; defaults to the config's baseline value.
        #[arg(long)]
        noise_variance: Option<f64>,
    },
    /// Disguise measurements read from stdin, one vector per line.
    FilterStream {
        #[arg(long)]
        config: PathBuf,
        /// Name of the model generating the input.
        #[arg(long)]
        theta: String,
        /// Name of the model the output should follow.
        #[arg(long)]
        pseudo: String,
        /// Append the CDF values of each component to every output line.
        #[arg(long)]
        emit_u: bool,
    },
    /// Leakage report (entropy, mutual information, Fano bound) for a policy file.
    Report {
        #[arg(long)]
        policy: PathBuf,
        /// Also write report.json into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        bits: bool,
    },
    /// Monte Carlo estimate of the distortion matrix; writes distortion.csv.
    EstimateDistortion {
        #[command(flatten)]
        common: Common,
    },
    /// Solve the randomizer; writes one policy file per leakage budget.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Single leakage budget in nats; defaults to the config grid.
        #[arg(long)]
        i0: Option<f64>,
        #[arg(long)]
        bits: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sweep { common, bits } => {
            let config = common.load()?;
            let exp = config.build()?;
            let sweep = harness::run_sweep(&config, &exp)?;
            harness::write_sweep(&exp, &sweep, &config.output_dir, bits)?;
            announce(&config.output_dir.join("sweep.csv"));
        }
        Command::BaselineNoise {
            common,
            noise_variance,
        } => {
            let config = common.load()?;
            let spec = config
                .baseline
                .as_ref()
                .context("config has no baseline section")?;
            let variance = noise_variance.unwrap_or(spec.noise_variance);
            let result = harness::baseline_noise(spec, variance, config.seed)?;
            let path = config.output_dir.join("baseline.csv");
            harness::write_baseline_csv(&result, &path)?;
            for s in &result.summary {
                eprintln!(
                    "theta {}: final estimate within 0.5 in {:.1}% of runs (mean {:.3})",
                    s.theta,
                    100.0 * s.final_within_half,
                    s.final_mean_noisy
                );
            }
            announce(&path);
        }
        Command::FilterStream {
            config,
            theta,
            pseudo,
            emit_u,
        } => {
            let exp = ExperimentConfig::load(&config)?.build()?;
            let stdin = io::stdin().lock();
            let stdout = BufWriter::new(io::stdout().lock());
            harness::filter_stream(&exp, &theta, &pseudo, stdin, stdout, emit_u)?;
        }
        Command::Report { policy, out, bits } => {
            let file = PolicyFile::load(&policy)?;
            let report = ReportJson::new(harness::privacy_report(&file)?, bits);
            println!("{}", serde_json::to_string_pretty(&report)?);
            if let Some(dir) = out {
                harness::write_json(&dir.join("report.json"), &report)?;
            }
        }
        Command::EstimateDistortion { common } => {
            let config = common.load()?;
            let exp = config.build()?;
            let matrix = harness::estimate_distortion(&config, &exp)?;
            let path = config.output_dir.join("distortion.csv");
            harness::write_distortion_csv(&exp, &matrix, &path)?;
            for (i, j) in matrix.flagged_cells() {
                log::warn!(
                    "cell ({i}, {j}) clamped {:.2}% of CDF values",
                    100.0 * matrix.saturation[i][j]
                );
            }
            announce(&path);
        }
        Command::Solve { common, i0, bits } => {
            let config = common.load()?;
            let exp = config.build()?;
            let matrix = harness::estimate_distortion(&config, &exp)?;
            let grid = i0.map_or_else(|| config.i0_grid.clone(), |x| vec![x]);
            for (k, &budget) in grid.iter().enumerate() {
                let solution = solve_randomizer(&matrix, &exp.prior, budget)?;
                let file = PolicyFile::new(&exp, &solution, budget);
                let path = config.output_dir.join(format!("policy_{k:02}.json"));
                harness::write_json(&path, &file)?;
                let report = ReportJson::new(harness::privacy_report(&file)?, bits);
                eprintln!(
                    "I0 = {budget}: achieved MI {:.6} {}, expected distortion {:.6}",
                    report.i_theta_thetatilde, report.units, solution.distortion
                );
                announce(&path);
            }
        }
    }
    Ok(())
}

fn announce(path: &Path) {
    eprintln!("wrote {}", path.display());
}
