use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use hmbounds_cli::manifest::{
    convergence_study, emit_report, run_all, summarize, ReportFormat,
};
use hmbounds_cli::{thread_count, RunConfig};

/// Numerical verification lab for harmonic-mean eigenvalue bounds.
#[derive(Parser)]
#[command(name = "hmbounds", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch verification over a config file (or the builtin registry).
    Run {
        /// Path to a JSON run configuration; "builtin" for the registry.
        #[arg(default_value = "builtin")]
        config: String,
        /// Override the refinement level count of every scenario.
        #[arg(long)]
        levels: Option<u32>,
        /// Override the base seed of every scenario.
        #[arg(long)]
        seed: Option<u64>,
        /// Output format.
        #[arg(long, default_value = "markdown")]
        format: ReportFormat,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Include wall-clock stage timings (breaks byte reproducibility).
        #[arg(long)]
        timings: bool,
    },
    /// List the scenarios of a config (or the builtin registry).
    ListScenarios {
        #[arg(default_value = "builtin")]
        config: String,
    },
    /// Refinement study for one scenario with Richardson extrapolation.
    Converge {
        /// Scenario name from the config or registry.
        scenario: String,
        #[arg(long, default_value = "builtin")]
        config: String,
        /// Override the refinement level count (>= 3).
        #[arg(long)]
        levels: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output format (csv or json).
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(spec: &str) -> anyhow::Result<RunConfig> {
    if spec == "builtin" {
        return Ok(RunConfig::builtin());
    }
    let text = std::fs::read_to_string(spec).with_context(|| format!("reading config {spec}"))?;
    Ok(RunConfig::from_json(&text)?)
}

fn write_out(text: &str, out: Option<&PathBuf>) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(ok) => {
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> anyhow::Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            levels,
            seed,
            format,
            out,
            timings,
        } => {
            let mut cfg = load_config(&config)?;
            for s in cfg.scenarios.iter_mut() {
                if let Some(l) = levels {
                    s.refinement_levels = l;
                }
                if let Some(sd) = seed {
                    s.seed = sd;
                }
            }
            let manifest = run_all(&cfg.scenarios, thread_count(), timings)?;
            let text = emit_report(&manifest, format)?;
            write_out(&text, out.as_ref())?;
            eprintln!("{}", summarize(&manifest));
            Ok(manifest.exit_ok())
        }
        Command::ListScenarios { config } => {
            let cfg = load_config(&config)?;
            for s in &cfg.scenarios {
                println!(
                    "{:<24} {:?} levels={} eigen={} cases={} chain={}",
                    s.name,
                    s.surface,
                    s.refinement_levels,
                    s.eigen_count,
                    s.cases.len(),
                    s.chain.is_some(),
                );
            }
            Ok(true)
        }
        Command::Converge {
            scenario,
            config,
            levels,
            seed,
            format,
            out,
        } => {
            let cfg = load_config(&config)?;
            let mut found = cfg
                .scenarios
                .into_iter()
                .find(|s| s.name == scenario)
                .with_context(|| format!("scenario {scenario:?} not found"))?;
            if let Some(l) = levels {
                found.refinement_levels = l;
            }
            if let Some(sd) = seed {
                found.seed = sd;
            }
            let tables = convergence_study(&found)?;
            let text = match format {
                ReportFormat::Json => serde_json::to_string_pretty(&tables)?,
                ReportFormat::Csv => {
                    let mut s = String::new();
                    for t in &tables {
                        s.push_str(&format!("# case,{}\n", t.case));
                        s.push_str(&t.to_csv());
                    }
                    s
                }
                ReportFormat::Markdown => bail!("convergence output supports csv or json"),
            };
            write_out(&text, out.as_ref())?;
            Ok(true)
        }
    }
}
