use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hopfrc::{report_emit, run, ExperimentConfig, ExperimentKind, HarnessError};

#[derive(Parser)]
#[command(name = "hopfrc", version, about = "Hopf-oscillator reservoir computer experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the configured one.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run on one thread.
    #[arg(long, global = true)]
    single_thread: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Render feature maps of a dataset as PGM images.
    Featurize,
    /// Distances between same-class variants in Hopf and Mel feature space.
    CompareMel,
    /// Feature degradation under white noise.
    NoiseSweep,
    /// Train and evaluate the readout.
    Classify,
    /// Freeze the convolutions and retrain the head on a new task.
    Reconfigure,
    /// Per-window distances in a mixed eight-second scene.
    MixedSignal,
}

impl From<Command> for ExperimentKind {
    fn from(c: Command) -> Self {
        match c {
            Command::Featurize => Self::Featurize,
            Command::CompareMel => Self::CompareMel,
            Command::NoiseSweep => Self::NoiseSweep,
            Command::Classify => Self::Classify,
            Command::Reconfigure => Self::Reconfigure,
            Command::MixedSignal => Self::MixedSignal,
        }
    }
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    let kind = ExperimentKind::from(cli.command);
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    if let Some(k) = cfg.experiment.filter(|&k| k != kind) {
        eprintln!("note: config names experiment `{}`, running `{}`", k.name(), kind.name());
    }
    cfg.experiment = Some(kind);
    if cli.single_thread {
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build_global()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
    }
    let outdir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(kind.name()));

    let (report, artifacts) = run(kind, &cfg)?;
    report_emit(&report, &artifacts, &cfg, &outdir)?;
    if let Some(acc) = report.accuracy {
        match report.published_target {
            Some(t) => println!("accuracy {acc:.4} (published {t})"),
            None => println!("accuracy {acc:.4}"),
        }
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!("{} report written to {} ({:.1} s)", kind.name(), outdir.display(), artifacts.wall_clock_s);
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
