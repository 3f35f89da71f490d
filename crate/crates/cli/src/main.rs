use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use otfs_cli::{experiments, output, ExperimentConfig, ExperimentKind};

/// Runs one OTFS experiment from a JSON configuration file.
#[derive(Parser, Debug)]
#[command(name = "otfs-sim", version)]
struct Args {
    /// Experiment to run; must match the `experiment` field of the config.
    #[arg(value_enum)]
    experiment: ExperimentKind,
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_path`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo trials (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn run(args: Args) -> anyhow::Result<()> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if cfg.experiment != args.experiment {
        anyhow::bail!(
            "subcommand {} does not match experiment {} in {}",
            args.experiment.name(),
            cfg.experiment.name(),
            args.config.display()
        );
    }
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if let Some(dir) = args.out {
        cfg.output_path = dir;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.unwrap_or(0))
        .build()?;
    let table = pool.install(|| experiments::run(&cfg))?;
    let (csv, json) = output::write(&table, &cfg, &cfg.output_path)?;
    println!(
        "wrote {} rows to {} ({})",
        table.rows.len(),
        csv.display(),
        json.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
