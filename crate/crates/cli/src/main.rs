use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use evodev_core::pipeline::{self, PipelineError, RunOptions};
use evodev_core::{RunConfig, RunReport};

#[derive(Parser)]
#[command(name = "evodev", version, about = "Feature-driven iterative app development with LLM agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage on the scaffold, which becomes the workspace.
    Run(StartArgs),
    /// Run the planning stages only (stops after the feature map).
    Plan(StartArgs),
    /// Continue an interrupted or planned run.
    Resume { workspace: PathBuf },
    /// Show feature-set status and the feature map.
    Inspect {
        workspace: PathBuf,
        /// Print only the Graphviz DOT graph.
        #[arg(long)]
        dot: bool,
    },
    /// Combine human scores with the run's cost and time.
    Metrics {
        workspace: PathBuf,
        #[arg(long)]
        scores: PathBuf,
    },
}

#[derive(clap::Args)]
struct StartArgs {
    requirements: PathBuf,
    scaffold: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scripted transcript; replaces the HTTP provider.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

fn load_config(args: &StartArgs) -> anyhow::Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(t) = &args.transcript {
        config.transcript = Some(t.clone());
    }
    Ok(config)
}

fn report(result: Result<RunReport, PipelineError>, what: &str) -> ExitCode {
    match result {
        Ok(r) => {
            if let Some(s) = &r.summary {
                for set in &s.sets {
                    println!(
                        "{}: {:?}{}",
                        set.set_id,
                        set.outcome,
                        set.commit_id.as_deref().map(|c| format!(" ({})", &c[..c.len().min(10)])).unwrap_or_default()
                    );
                }
                match s.total_usd {
                    Some(usd) => println!("cost: ${usd:.4}"),
                    None => println!("cost: unknown (model not priced)"),
                }
            } else {
                println!("{what} finished");
            }
            ExitCode::from(r.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error in {}: {e}", e.stage_name());
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let options = RunOptions::default();
    Ok(match cli.command {
        Command::Run(args) => {
            let config = load_config(&args)?;
            report(pipeline::cmd_run(&args.requirements, &args.scaffold, config, &options), "run")
        }
        Command::Plan(args) => {
            let config = load_config(&args)?;
            report(pipeline::cmd_plan(&args.requirements, &args.scaffold, config, &options), "plan")
        }
        Command::Resume { workspace } => report(pipeline::cmd_resume(&workspace, &options), "resume"),
        Command::Inspect { workspace, dot } => {
            print!("{}", pipeline::cmd_inspect(&workspace, dot)?);
            ExitCode::SUCCESS
        }
        Command::Metrics { workspace, scores } => {
            let m = pipeline::cmd_metrics(&workspace, Path::new(&scores))?;
            println!("{}", serde_json::to_string_pretty(&m).context("serializing metrics")?);
            ExitCode::SUCCESS
        }
    })
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("EVODEV_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
