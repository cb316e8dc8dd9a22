use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wheelforge::{run_all, run_stage, PipelineConfig, RunOptions, Stage};

#[derive(Debug, Parser)]
#[command(name = "wheelforge", version, about = "Build a wheel design and performance dataset")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Recompute designs that already succeeded.
    #[arg(long, global = true)]
    force: bool,
    #[arg(long, global = true)]
    designs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 uses every core).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Spoke layouts and wheel masks.
    Generate,
    /// Depth maps from masks.
    Depth,
    /// Watertight meshes from depth maps.
    Recon,
    /// Free-free modal analysis and performance scores.
    Simulate,
    /// Design-space analysis and plot tables.
    Analyze,
    /// Every stage in order.
    All,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let path = cli.config.ok_or_else(|| anyhow::anyhow!("--config <file> is required"))?;
    let mut cfg = PipelineConfig::load(&path)?;
    if let Some(n) = cli.designs {
        cfg.designs = n;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    let opts = RunOptions { force: cli.force };
    let reports = match cli.command {
        Command::All => run_all(&cfg, opts)?,
        Command::Generate => vec![run_stage(Stage::Generate, &cfg, opts)?],
        Command::Depth => vec![run_stage(Stage::Depth, &cfg, opts)?],
        Command::Recon => vec![run_stage(Stage::Recon, &cfg, opts)?],
        Command::Simulate => vec![run_stage(Stage::Simulate, &cfg, opts)?],
        Command::Analyze => vec![run_stage(Stage::Analyze, &cfg, opts)?],
    };
    for r in &reports {
        println!("{}", r.summary());
        for row in r.rows.iter().filter(|row| !row.ok) {
            println!("  {} failed: {}", row.design_id, row.error);
        }
    }
    println!("output: {}", cfg.output_root.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
