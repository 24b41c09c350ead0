//! `qng` command-line driver.
//!
//! Exit codes: 0 on success, 1 on I/O failures, 2 on invalid scenarios,
//! 3 when the equilibrium or belief recursion fails.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qng::scenario::{self, ScenarioConfig};

/// Environment variable that overrides a scenario's output directory.
const OUTPUT_DIR_ENV: &str = "QNG_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "qng", version, about = "Bayesian learning in quadratic network games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play one scenario and write actions.csv, errors.csv and summary.json.
    Run {
        config: PathBuf,
        /// Output directory, overriding the scenario file.
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output_dir: Option<PathBuf>,
    },
    /// Play a scenario once per seed and aggregate the summaries.
    Sweep {
        config: PathBuf,
        /// Comma-separated seeds or ranges, e.g. `1,2,10..20` or `0..=19`.
        #[arg(long, value_delimiter = ',', value_parser = parse_seeds)]
        seeds: Vec<Vec<u64>>,
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output_dir: Option<PathBuf>,
    },
    /// Print the size, diameter and degree statistics of a scenario's network.
    GraphInfo {
        config: PathBuf,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let s = s.trim();
    let num = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("bad seed {t:?}: {e}"));
    if let Some((a, b)) = s.split_once("..=") {
        let (a, b) = (num(a)?, num(b)?);
        return Ok((a..=b).collect());
    }
    if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (num(a)?, num(b)?);
        return Ok((a..b).collect());
    }
    Ok(vec![num(s)?])
}

fn exit_code(err: &qng::Error) -> u8 {
    match err {
        qng::Error::Config(_) | qng::Error::Graph(_) | qng::Error::Game(_) => 2,
        qng::Error::Solve(_) => 3,
        _ => 1,
    }
}

fn load(path: &PathBuf, output_dir: Option<PathBuf>) -> qng::Result<ScenarioConfig> {
    let mut config = scenario::parse_config(path)?;
    if let Some(dir) = output_dir {
        config.output_dir = dir;
    }
    Ok(config)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3e}"))
}

fn execute(cli: Cli) -> qng::Result<()> {
    match cli.command {
        Command::Run { config, output_dir } => {
            let config = load(&config, output_dir)?;
            let summary = scenario::run(&config)?;
            let r = &summary.report;
            println!("wrote {}", config.output_dir.display());
            println!(
                "convergence step {} (diameter {}, horizon {})",
                r.convergence_step.map_or_else(|| "none".to_string(), |t| t.to_string()),
                r.diameter,
                r.horizon
            );
            println!("final gap to complete-information Nash: {}", fmt_opt(r.final_nash_gap));
            println!("largest batch discrepancy: {}", fmt_opt(r.max_batch_gap));
        }
        Command::Sweep {
            config,
            seeds,
            output_dir,
        } => {
            let config = load(&config, output_dir)?;
            let seeds: Vec<u64> = seeds.into_iter().flatten().collect();
            let summary = scenario::sweep(&config, &seeds)?;
            let agg = &summary.aggregate;
            println!("wrote {}", config.output_dir.display());
            println!("{} of {} seeds completed", agg.completed, agg.completed + agg.failed);
            for (step, count) in &agg.convergence_histogram {
                println!("convergence step {step}: {count}");
            }
            for run in summary.runs.iter().filter(|r| r.error.is_some()) {
                eprintln!("seed {} failed: {}", run.seed, run.error.as_deref().unwrap_or_default());
            }
        }
        Command::GraphInfo { config, json } => {
            let config = scenario::parse_config(&config)?;
            let info = scenario::graph_info(&config.graph);
            if json {
                println!("{}", serde_json::to_string_pretty(&info)?);
            } else {
                println!("agents: {}", info.n_agents);
                println!("edges: {}", info.n_edges);
                println!("diameter: {}", info.diameter);
                println!(
                    "degree: min {}, max {}, mean {:.3}",
                    info.degree.min, info.degree.max, info.degree.mean
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
