use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nsf::commands::{run_file, Command};
use nsf::parallel::init_threads;

#[derive(Parser, Debug)]
#[command(name = "nsf", version, about = "Seeded noise-analysis and training experiments")]
struct Cli {
    /// Experiment configuration (sections [noise], [analysis], [train], [io]).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides `[io] seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for Monte-Carlo and evaluation loops (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sub {
    /// Histograms, Gaussianity and independence of Fourier coefficients.
    AnalyzeNoise,
    /// Empirical and closed-form per-bin variance maps.
    VarianceMap,
    /// Monte-Carlo loss against the blurred-penalty loss.
    VerifyEquivalence,
    /// Supervised training on procedural or stationary data.
    Train,
    /// Unsupervised stripe removal by noise swapping.
    Destripe,
    /// Applies a saved model.
    Eval,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::AnalyzeNoise => Command::AnalyzeNoise,
            Sub::VarianceMap => Command::VarianceMap,
            Sub::VerifyEquivalence => Command::VerifyEquivalence,
            Sub::Train => Command::Train,
            Sub::Destripe => Command::Destripe,
            Sub::Eval => Command::Eval,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = Command::from(cli.command);
    let Some(config) = cli.config else {
        eprintln!("nsf {}: --config <path> is required", command.name());
        return ExitCode::from(2);
    };
    init_threads(cli.threads);
    match run_file(command, &config, &cli.out, cli.seed) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("nsf {}: {e}", command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
