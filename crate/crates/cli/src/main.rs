//! `share` — benchmark CLI for near-field localization with sparse modular
//! arrays.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use share_cli::config::{parse_config, RunConfig};
use share_cli::dispatch::{apply_overrides, dispatch, Overrides, Subcommand as Cmd};

#[derive(Parser)]
#[command(
    name = "share",
    version,
    about = "Near-field angle-range localization benchmarks on sparse modular arrays"
)]
struct Cli {
    /// Path to a `key = value` config file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for CSV outputs.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Override the config trial count.
    #[arg(long, global = true)]
    trials: Option<usize>,

    /// Override the config SNR in dB.
    #[arg(long, global = true)]
    snr_db: Option<f64>,

    /// Disable noise entirely (overrides snr_db).
    #[arg(long, global = true)]
    noiseless: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the normalized beampattern of the configured array to spectrum.csv.
    Beampattern,
    /// Write the Stage-1 combined angular spectrum of one trial to spectrum.csv.
    Spectrum,
    /// Run every configured estimator on a single trial; write estimates.csv.
    Estimate {
        /// Also dump the 2D-MUSIC pseudo-spectrum to music_spectrum.csv.
        #[arg(long)]
        dump_music_spectrum: bool,
    },
    /// Run the Monte Carlo benchmark; write metrics.csv.
    MonteCarlo,
    /// Evaluate the FLOP cost model; write flops.csv.
    Flops,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();

    let mut cfg = match &cli.config {
        Some(path) => match parse_config(path) {
            Ok(cfg) => cfg,
            Err(err) => {
                eprintln!("error: {err}");
                return ExitCode::FAILURE;
            }
        },
        None => RunConfig::default(),
    };
    apply_overrides(
        &mut cfg,
        &Overrides {
            trials: cli.trials,
            snr_db: cli.snr_db,
            noiseless: cli.noiseless,
        },
    );
    if let Err(err) = cfg.validate() {
        eprintln!("error: {err}");
        return ExitCode::FAILURE;
    }

    let cmd = match cli.command {
        Command::Beampattern => Cmd::Beampattern,
        Command::Spectrum => Cmd::Spectrum,
        Command::Estimate { dump_music_spectrum } => Cmd::Estimate { dump_music_spectrum },
        Command::MonteCarlo => Cmd::MonteCarlo,
        Command::Flops => Cmd::Flops,
    };
    match dispatch(&cmd, &cfg, &cli.out_dir) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
