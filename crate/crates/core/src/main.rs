use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gesture_radar::dsp::ProcessingMode;
use gesture_radar::experiment::{self, ExperimentConfig, TrainingMix};
use gesture_radar::{Execution, Result};

/// FMCW radar static hand-gesture lab.
#[derive(Parser)]
#[command(name = "gesture-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Experiment output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct Cell {
    #[arg(long)]
    mode: ProcessingMode,
    #[arg(long)]
    mix: TrainingMix,
    /// Training seed.
    #[arg(long)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate captures and write train/validation datasets for both modes.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Overrides `data_seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train one cell of the experiment.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cell: Cell,
    },
    /// Evaluate a trained cell on the frozen validation set.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        mode: Option<ProcessingMode>,
        #[arg(long)]
        mix: Option<TrainingMix>,
        #[arg(long)]
        seed: Option<u64>,
        /// Checkpoint file; use with --data instead of --mode/--mix/--seed.
        #[arg(long, requires = "data")]
        checkpoint: Option<PathBuf>,
        /// Dataset file to evaluate on.
        #[arg(long, requires = "checkpoint")]
        data: Option<PathBuf>,
    },
    /// Reconstruct sterile and human palm SAR images.
    Sar {
        #[command(flatten)]
        common: Common,
    },
    /// Build the accuracy table and figures from every trained cell.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    match &common.config {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    let exec = Execution::default();
    match cli.command {
        Command::Synth { common, seed } => {
            let mut cfg = load(&common)?;
            if let Some(s) = seed {
                cfg.data_seed = s;
            }
            let s = experiment::cmd_synth(&cfg, &common.out, exec)?;
            println!("{}", s.describe());
        }
        Command::Train { common, cell } => {
            let cfg = load(&common)?;
            let s = experiment::cmd_train(&cfg, &common.out, cell.mode, cell.mix, cell.seed, exec)?;
            println!("{}", s.describe());
            println!("wrote {}", s.run_dir.display());
        }
        Command::Eval {
            common,
            mode,
            mix,
            seed,
            checkpoint,
            data,
        } => {
            let metrics = match (checkpoint, data, mode, mix, seed) {
                (Some(c), Some(d), _, _, _) => experiment::cmd_eval_files(&c, &d, exec)?,
                (None, None, Some(mode), Some(mix), Some(seed)) => {
                    experiment::cmd_eval(&common.out, mode, mix, seed, exec)?
                }
                _ => {
                    return Err(gesture_radar::Error::InvalidArgument(
                        "eval needs either --checkpoint and --data, or --mode, --mix and --seed".into(),
                    ))
                }
            };
            print!("{}", experiment::format_metrics(&metrics));
        }
        Command::Sar { common } => {
            let cfg = load(&common)?;
            let s = experiment::cmd_sar(&cfg, &common.out, exec)?;
            println!(
                "palm SAR image SNR: sterile {:.2}, human {:.2} (ratio {:.2})",
                s.sterile_snr,
                s.human_snr,
                s.sterile_snr / s.human_snr
            );
            for f in &s.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Report { common } => {
            let cfg = load(&common)?;
            let r = experiment::cmd_report(&cfg, &common.out, exec)?;
            print!("{}", r.text);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
