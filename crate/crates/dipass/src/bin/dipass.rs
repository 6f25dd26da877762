use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dipass::harness::{run_experiment, Beamformer, ExperimentKind, ExperimentSpec};
use dipass::{DipassError, SystemConfig};

#[derive(Parser)]
#[command(name = "dipass", about = "Directional pinching-antenna system simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV table.
    ///
    /// Experiment kinds and their CSV columns (after `record,trial`):
    ///   single-pa-sweep    y_user,y,gain_sq
    ///   placement-heatmap  x_user,y_user,y_star,gamma_star,gain_sq
    ///   gain-profile       height,y,gain_sq
    ///   sumrate-vs-N       num_waveguides,sum_rate,num_served
    ///   served-users       num_waveguides,sum_rate,num_served
    /// Each grid point has one `sample` row per trial plus `mean` and
    /// `stderr` aggregate rows.
    Run {
        /// JSON configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Experiment kind.
        #[arg(long, value_parser = parse_kind)]
        experiment: ExperimentKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value = "wmmse", value_parser = parse_beamformer)]
        beamformer: Beamformer,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Suppress the timestamp header line for byte-identical reruns.
        #[arg(long)]
        no_header_timestamp: bool,
    },
    /// Check a configuration file against all invariants.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_kind(s: &str) -> Result<ExperimentKind, String> {
    s.parse().map_err(|e: DipassError| e.to_string())
}

fn parse_beamformer(s: &str) -> Result<Beamformer, String> {
    s.parse().map_err(|e: DipassError| e.to_string())
}

fn load_config(path: &PathBuf) -> Result<SystemConfig, DipassError> {
    let text = fs::read_to_string(path)
        .map_err(|e| DipassError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    SystemConfig::from_json(&text)
}

fn run(cli: Cli) -> Result<(), DipassError> {
    match cli.command {
        Command::Run {
            config,
            experiment,
            seed,
            trials,
            beamformer,
            out,
            no_header_timestamp,
        } => {
            let cfg = load_config(&config)?;
            let mut spec = ExperimentSpec::new(experiment, seed, trials, beamformer);
            spec.timestamp_header = !no_header_timestamp;
            let file = fs::File::create(&out).map_err(|e| {
                DipassError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", out.display())))
            })?;
            let mut writer = std::io::BufWriter::new(file);
            run_experiment(&cfg, &spec, &mut writer)?;
            use std::io::Write;
            writer.flush()?;
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            println!(
                "ok: N={} L={} M={} region={:?}",
                cfg.num_waveguides, cfg.num_pas_per_wg, cfg.num_users, cfg.region
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(0),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                DipassError::Config(_) => ExitCode::from(2),
                DipassError::Io(_) => ExitCode::from(3),
                _ => ExitCode::from(1),
            }
        }
    }
}
