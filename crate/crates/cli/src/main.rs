use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use morlie_cli::pipeline::{self, Outcome};
use morlie_cli::RunConfig;

/// Model order reduction with Lie group actions.
///
/// Settings come from an optional `key = value` file and are overridden by
/// `--key value` flags after the subcommand (for example `--sigma 0.02`).
#[derive(Parser)]
#[command(name = "morlie", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Configuration file with `key = value` lines.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Master seed for every random draw.
    #[arg(long)]
    seed: Option<u64>,
    /// Output (run) directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Further settings as `--key value` pairs.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    settings: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark (or copy an ingested file) into the run directory.
    Generate(Common),
    /// Find the clusters of a point-cloud data set.
    Cluster(Common),
    /// Fit the reduced snapshot matrix.
    Fit(Common),
    /// Subalgebra search and refit in the subalgebra.
    Reduce(Common),
    /// Fit the reduced vector field and reconstruct every trajectory.
    Simulate(Common),
    /// Reconstruction errors and the POD baseline.
    Evaluate(Common),
    /// Empirical orbit width of the data.
    Width(Common),
    /// Render figures and re-check flags for a run directory.
    Report(Common),
    /// All stages in one go.
    Pipeline(Common),
    /// Print the effective configuration.
    Config(Common),
}

fn config_from(c: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(p) = &c.config {
        cfg.apply_file(p)?;
    }
    cfg.apply_flags(&c.settings)?;
    if let Some(s) = c.seed {
        cfg.bench.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<Outcome> {
    let workers = pipeline::workers_from_env()?;
    rayon::ThreadPoolBuilder::new().num_threads(workers).build_global()?;
    let (Command::Generate(c)
    | Command::Cluster(c)
    | Command::Fit(c)
    | Command::Reduce(c)
    | Command::Simulate(c)
    | Command::Evaluate(c)
    | Command::Width(c)
    | Command::Report(c)
    | Command::Pipeline(c)
    | Command::Config(c)) = &cli.command;
    let cfg = config_from(c)?;
    let outcome = match cli.command {
        Command::Generate(_) => pipeline::cmd_generate(&cfg)?,
        Command::Cluster(_) => pipeline::cmd_cluster(&cfg)?,
        Command::Fit(_) => pipeline::cmd_fit(&cfg)?,
        Command::Reduce(_) => pipeline::cmd_reduce(&cfg)?,
        Command::Simulate(_) => pipeline::cmd_simulate(&cfg)?,
        Command::Evaluate(_) => pipeline::cmd_evaluate(&cfg)?,
        Command::Width(_) => pipeline::cmd_width(&cfg)?,
        Command::Report(_) => pipeline::cmd_report(&cfg)?,
        Command::Pipeline(_) => {
            let (outcome, summary) = morlie_cli::run_pipeline(&cfg)?;
            for f in &summary.flags {
                eprintln!("flag: {f}");
            }
            println!("{}", serde_json::to_string_pretty(&summary)?);
            outcome
        }
        Command::Config(_) => {
            print!("{}", cfg.to_text());
            Outcome::Clean
        }
    };
    Ok(outcome)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Flagged) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
