use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use latreg::dataio::SynthConfig;
use latreg::Parallelism;
use latreg_cli::config::read_json;
use latreg_cli::{cmd_report, cmd_run, cmd_synth, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "latreg", version, about = "Global versus local regression diagnostics in a learned latent space")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic cohort (<stem>.csv and <stem>.truth.json).
    Synth(SynthArgs),
    /// Run the full pipeline described by a JSON config.
    Run(RunArgs),
    /// Summarize a finished run directory as JSON.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// JSON file holding a synthetic cohort config.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value = "cohort")]
    stem: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run config.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Comma-separated training seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    latent_dim: Option<usize>,
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    no_benchmarks: bool,
    /// Replace a previous run in the output directory.
    #[arg(long)]
    overwrite: bool,
}

#[derive(Args)]
struct ReportArgs {
    run_dir: PathBuf,
    /// Write the summary here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn synth(a: SynthArgs) -> Result<(), CliError> {
    let mut cfg: SynthConfig = read_json(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.n {
        cfg.n = n;
    }
    if let Some(p) = a.p {
        cfg.p = p;
    }
    cmd_synth(&cfg, &a.out, &a.stem)?;
    eprintln!("wrote {}", a.out.join(format!("{}.csv", a.stem)).display());
    Ok(())
}

fn run(a: RunArgs) -> Result<(), CliError> {
    let mut cfg: RunConfig = read_json(&a.config)?;
    if let Some(o) = a.output_dir {
        cfg.output_dir = o;
    }
    if let Some(s) = a.seeds {
        cfg.seeds = s;
    }
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if let Some(lr) = a.lr {
        cfg.train.lr = lr;
    }
    if let Some(d) = a.latent_dim {
        cfg.train.d = d;
    }
    if a.sequential {
        cfg.parallelism = Parallelism::Sequential;
    }
    if a.no_benchmarks {
        cfg.benchmarks.enabled = false;
    }
    let manifest = cmd_run(&cfg, a.overwrite)?;
    eprintln!(
        "wrote {} files to {}",
        manifest.files.len() + 1,
        cfg.output_dir.display()
    );
    Ok(())
}

fn report(a: ReportArgs) -> Result<(), CliError> {
    let summary = cmd_report(&a.run_dir)?;
    let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::runtime("report", e))? + "\n";
    match a.output {
        Some(path) => std::fs::write(&path, text).map_err(|e| CliError::runtime("report", e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Run(a) => run(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
