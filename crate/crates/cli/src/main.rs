use anyhow::Context;
use clap::{Parser, Subcommand};
use lacuna_cli::config::{validate_config, PipelineConfig};
use lacuna_cli::pipeline::{Pipeline, Stage};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "lacuna",
    version,
    about = "Find lacunae in molecular datasets and repair them generatively"
)]
struct Cli {
    /// Pipeline config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory holding stage outputs and the manifest.
    #[arg(long, global = true, default_value = "stages")]
    stage_dir: PathBuf,
    /// Replace one stage seed, as `stage=int`; repeatable.
    #[arg(long = "seed-override", global = true)]
    seed_overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check the config, then print it with defaults filled in.
    Validate,
    Ingest,
    Fingerprint,
    Anomaly,
    /// Cumulative persistent homology over time.
    Ph,
    Mapper,
    /// Remove the target edges' intersections and fix the lens interval.
    Lacuna,
    Train,
    Sample,
    Complete,
    Report,
    /// Run every stage that is missing, damaged or stale.
    Run {
        /// Last stage to bring up to date.
        #[arg(long, default_value = "report")]
        until: String,
    },
    /// Serve the JSON API (and optionally a static UI) over the mapper output.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: std::net::SocketAddr,
        /// Directory of static UI files.
        #[arg(long)]
        ui: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> anyhow::Result<PipelineConfig> {
    let path = cli.config.as_ref().context("--config is required")?;
    let mut cfg = validate_config(path)?;
    cfg.apply_seed_overrides(&cli.seed_overrides)?;
    Ok(cfg)
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let cfg = load_config(&cli)?;
    let pipeline = Pipeline::new(&cli.stage_dir, cfg);
    let single = |stage: Stage| -> anyhow::Result<()> {
        let rec = pipeline.run_stage(stage)?;
        println!("{}\t{}", stage.name(), rec.digest);
        Ok(())
    };
    match &cli.command {
        Command::Validate => print!("{}", pipeline.cfg.to_toml()),
        Command::Ingest => single(Stage::Ingest)?,
        Command::Fingerprint => single(Stage::Fingerprint)?,
        Command::Anomaly => single(Stage::Anomaly)?,
        Command::Ph => single(Stage::Ph)?,
        Command::Mapper => single(Stage::Mapper)?,
        Command::Lacuna => single(Stage::Lacuna)?,
        Command::Train => single(Stage::Train)?,
        Command::Sample => single(Stage::Sample)?,
        Command::Complete => single(Stage::Complete)?,
        Command::Report => {
            single(Stage::Report)?;
            print!("{}", pipeline.read(Stage::Report, "report.txt")?);
        }
        Command::Run { until } => {
            let target = Stage::from_name(until).with_context(|| format!("unknown stage `{until}`"))?;
            let ran = pipeline.run_to(target)?;
            let manifest = pipeline.manifest()?;
            for stage in target.closure() {
                let mark = if ran.contains(&stage) { "ran" } else { "current" };
                println!("{}\t{}\t{}", stage.name(), mark, manifest.stages[stage.name()].digest);
            }
        }
        Command::Serve { addr, ui } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(lacuna_cli::service::serve(&pipeline, *addr, ui.clone()))?;
        }
    }
    Ok(())
}
