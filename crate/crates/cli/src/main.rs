use std::path::PathBuf;
use std::process::ExitCode;

use bqc_core::channel::sample_noise;
use bqc_core::harness::{self, OutputFormat, RunConfig};
use bqc_core::mbqc::MeasurementPattern;
use bqc_core::{Angle, Error, NoiseParams};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

/// Blind delegated computation over a noisy photonic channel.
#[derive(Parser)]
#[command(name = "bqc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact distillation report for one photon carrying |+θ⟩.
    Distill {
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        /// θ = kπ/4.
        #[arg(long, default_value_t = 0)]
        theta: i64,
        /// Draw Haar noise from this seed; without it the channel is noiseless.
        #[arg(long)]
        noise_seed: Option<u64>,
    },
    /// Exact and sampled success probability over a γ × F grid.
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")]
        gamma_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0,0.5,1")]
        f_grid: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Monte-Carlo herald frequency at one (γ, F).
    Mc {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        f: f64,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sampled blinded runs of a pattern against its exact reference.
    Bfk {
        #[arg(long)]
        pattern: PathBuf,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Exact distribution of the sent angle for every hidden angle.
    Blindness,
    /// Full protocol runs described by a JSON config.
    E2e {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

/// The command ran but the protocol gave up.
const EXIT_PROTOCOL_FAILURE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_IO: u8 = 3;

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Error> {
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
            info!("wrote {}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn pretty<T: serde::Serialize>(value: &T) -> Result<String, Error> {
    Ok(serde_json::to_string_pretty(value)?)
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Distill {
            gamma,
            theta,
            noise_seed,
        } => {
            let noise = match noise_seed {
                Some(s) => sample_noise(&mut harness::trial_rng(s, 0)),
                None => NoiseParams::identity(),
            };
            let summary = harness::distill_once(gamma, Angle::new(theta), &noise)?;
            emit(&pretty(&summary)?, None)?;
        }
        Command::Sweep {
            gamma_grid,
            f_grid,
            trials,
            seed,
            out,
            format,
        } => {
            let report = harness::sweep(&RunConfig::new(gamma_grid, f_grid, trials, seed))?;
            emit(&report.render(format.into()), out.as_ref())?;
        }
        Command::Mc {
            gamma,
            f,
            trials,
            seed,
        } => {
            emit(&pretty(&harness::monte_carlo(gamma, f, trials, seed)?)?, None)?;
        }
        Command::Bfk {
            pattern,
            trials,
            seed,
        } => {
            let pattern = MeasurementPattern::load(&pattern)?;
            emit(&pretty(&harness::bfk_audit(&pattern, trials, seed)?)?, None)?;
        }
        Command::Blindness => {
            emit(&pretty(&harness::blindness_audit())?, None)?;
        }
        Command::E2e { config } => {
            let cfg = RunConfig::load(&config)?;
            let report = harness::run_end_to_end(&cfg)?;
            emit(&pretty(&report)?, cfg.output.as_ref())?;
            if !report.all_completed() {
                eprintln!(
                    "{} of {} runs hit the retry cap of {} photons",
                    report.summary.failed,
                    report.runs.len(),
                    cfg.max_retries
                );
                return Ok(EXIT_PROTOCOL_FAILURE);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { EXIT_IO } else { EXIT_VALIDATION })
        }
    }
}
