//! End-to-end scenario runs: validated config in, CSV and JSON files out.
//!
//! A run writes into its output directory:
//!
//! * `actions.csv` with columns `t, agent, component, value`
//!   (agents and components numbered from 1),
//! * `errors.csv` with columns `t, agent, sq_error`, the squared distance
//!   between the signal profile and the agent's estimate of it,
//! * `summary.json`, the oracle report plus scenario metadata,
//! * `coefficients.jsonl` when `write_coefficients` is set.

mod config;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

pub use config::{
    parse_config, parse_config_str, ConfigError, FieldError, Game, ScenarioConfig, ScenarioKind, DEFAULT_OUTPUT_DIR,
    MAX_AGENTS, MAX_HORIZON, MAX_STATE_DIM,
};

use crate::coefficients::{propagate_all, CoefficientModel, CoefficientTable, PropagationOptions, SolveMethod};
use crate::filter::run_game;
use crate::game::QuadraticGame;
use crate::graph::{DegreeStats, NetworkGraph};
use crate::oracle::{verify, GroundTruth, OracleReport};

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub scenario: ScenarioKind,
    pub seed: u64,
    pub solver: SolveMethod,
    #[serde(flatten)]
    pub report: OracleReport,
}

fn table_for(config: &ScenarioConfig) -> crate::Result<CoefficientTable> {
    let options = PropagationOptions { method: config.solver };
    let table = match &config.game {
        Game::Scalar(g) => propagate_all(g, &config.graph, config.horizon, options)?,
        Game::Vector(g) => propagate_all(g, &config.graph, config.horizon, options)?,
    };
    Ok(table)
}

/// Files of one seed.
struct SeedOutput {
    summary: Summary,
    actions: Vec<u8>,
    errors: Vec<u8>,
}

fn play_seed(config: &ScenarioConfig, table: &CoefficientTable, seed: u64) -> crate::Result<SeedOutput> {
    fn go<G: CoefficientModel + GroundTruth>(
        game: &G,
        config: &ScenarioConfig,
        table: &CoefficientTable,
        seed: u64,
    ) -> crate::Result<SeedOutput> {
        let signals = game.draw_signals(seed);
        let trajectory = run_game(table, &config.graph, &signals)?;
        let report = verify(&trajectory, table, &signals, game, &config.graph, config.batch_check);
        let mut actions = Vec::new();
        trajectory.write_actions_csv(&mut actions)?;
        let mut errors = Vec::new();
        trajectory.write_errors_csv(&mut errors)?;
        Ok(SeedOutput {
            summary: Summary {
                scenario: config.kind,
                seed,
                solver: config.solver,
                report,
            },
            actions,
            errors,
        })
    }
    match &config.game {
        Game::Scalar(g) => go(g, config, table, seed),
        Game::Vector(g) => go(g, config, table, seed),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> crate::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn write_seed(dir: &Path, output: &SeedOutput) -> crate::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("actions.csv"), &output.actions)?;
    fs::write(dir.join("errors.csv"), &output.errors)?;
    write_json(&dir.join("summary.json"), &output.summary)
}

fn write_coefficients(dir: &Path, table: &CoefficientTable) -> crate::Result<()> {
    fs::create_dir_all(dir)?;
    let mut out = BufWriter::new(File::create(dir.join("coefficients.jsonl"))?);
    table.write_jsonl(&mut out)?;
    out.flush()?;
    Ok(())
}

/// Runs one scenario with its own seed and writes the output files.
pub fn run(config: &ScenarioConfig) -> crate::Result<Summary> {
    let table = table_for(config)?;
    let output = play_seed(config, &table, config.seed)?;
    write_seed(&config.output_dir, &output)?;
    if config.write_coefficients {
        write_coefficients(&config.output_dir, &table)?;
    }
    Ok(output.summary)
}

/// Outcome of one seed in a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub convergence_step: Option<usize>,
    pub error: Option<String>,
}

/// Worst values over the seeds that completed.
#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub completed: usize,
    pub failed: usize,
    pub max_action_gap: f64,
    pub max_clairvoyant_gap: f64,
    pub max_batch_gap: Option<f64>,
    pub max_final_nash_gap: Option<f64>,
    pub max_final_theta_gap: f64,
    pub max_equilibrium_residual: f64,
    /// Convergence step (or `"none"`) to number of seeds.
    pub convergence_histogram: BTreeMap<String, usize>,
}

/// Contents of `sweep.json`.
#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub scenario: ScenarioKind,
    pub horizon: usize,
    pub diameter: usize,
    pub runs: Vec<SeedOutcome>,
    pub aggregate: Aggregate,
}

fn max_opt(acc: Option<f64>, v: Option<f64>) -> Option<f64> {
    match (acc, v) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, b) => a.or(b),
    }
}

fn aggregate(summaries: &[&Summary], failed: usize) -> Aggregate {
    let mut histogram = BTreeMap::new();
    let mut agg = Aggregate {
        completed: summaries.len(),
        failed,
        max_action_gap: 0.0,
        max_clairvoyant_gap: 0.0,
        max_batch_gap: None,
        max_final_nash_gap: None,
        max_final_theta_gap: 0.0,
        max_equilibrium_residual: 0.0,
        convergence_histogram: BTreeMap::new(),
    };
    for s in summaries {
        let r = &s.report;
        agg.max_action_gap = agg.max_action_gap.max(r.max_action_gap);
        agg.max_clairvoyant_gap = agg.max_clairvoyant_gap.max(r.max_clairvoyant_gap);
        agg.max_batch_gap = max_opt(agg.max_batch_gap, r.max_batch_gap);
        agg.max_final_nash_gap = max_opt(agg.max_final_nash_gap, r.final_nash_gap);
        agg.max_final_theta_gap = agg.max_final_theta_gap.max(r.final_theta_gap);
        agg.max_equilibrium_residual = agg.max_equilibrium_residual.max(r.max_equilibrium_residual);
        let key = r.convergence_step.map_or_else(|| "none".to_string(), |t| t.to_string());
        *histogram.entry(key).or_insert(0) += 1;
    }
    agg.convergence_histogram = histogram;
    agg
}

/// Runs the scenario once per seed. Seed `s` writes into `seed-<s>/`
/// below the output directory and the aggregate goes to `sweep.json`.
/// A seed that fails is recorded and the others still run.
pub fn sweep(config: &ScenarioConfig, seeds: &[u64]) -> crate::Result<SweepSummary> {
    let mut problems = Vec::new();
    if seeds.is_empty() {
        problems.push(FieldError {
            path: "seeds".into(),
            message: "a sweep needs at least one seed".into(),
        });
    }
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        problems.push(FieldError {
            path: "seeds".into(),
            message: format!("seed {} appears more than once", w[0]),
        });
    }
    if !problems.is_empty() {
        return Err(ConfigError::Invalid(problems).into());
    }

    let table = table_for(config)?;
    let results: Vec<(u64, crate::Result<Summary>)> = seeds
        .par_iter()
        .map(|&seed| {
            let out = play_seed(config, &table, seed).and_then(|o| {
                write_seed(&seed_dir(&config.output_dir, seed), &o)?;
                Ok(o.summary)
            });
            (seed, out)
        })
        .collect();
    if config.write_coefficients {
        write_coefficients(&config.output_dir, &table)?;
    }

    let runs = results
        .iter()
        .map(|(seed, r)| SeedOutcome {
            seed: *seed,
            convergence_step: r.as_ref().ok().and_then(|s| s.report.convergence_step),
            error: r.as_ref().err().map(ToString::to_string),
        })
        .collect();
    let ok: Vec<&Summary> = results.iter().filter_map(|(_, r)| r.as_ref().ok()).collect();
    let summary = SweepSummary {
        scenario: config.kind,
        horizon: config.horizon,
        diameter: config.graph.diameter(),
        aggregate: aggregate(&ok, results.len() - ok.len()),
        runs,
    };
    fs::create_dir_all(&config.output_dir)?;
    write_json(&config.output_dir.join("sweep.json"), &summary)?;
    Ok(summary)
}

/// Directory holding the files of one sweep seed.
pub fn seed_dir(output_dir: &Path, seed: u64) -> PathBuf {
    output_dir.join(format!("seed-{seed}"))
}

/// Shape of a scenario's network.
#[derive(Debug, Clone, Serialize)]
pub struct GraphInfo {
    pub n_agents: usize,
    pub n_edges: usize,
    pub diameter: usize,
    pub degree: DegreeStats,
}

pub fn graph_info(graph: &NetworkGraph) -> GraphInfo {
    GraphInfo {
        n_agents: graph.n_agents(),
        n_edges: graph.edges().len(),
        diameter: graph.diameter(),
        degree: graph.degree_stats(),
    }
}

impl ScenarioConfig {
    pub fn n_agents(&self) -> usize {
        self.graph.n_agents()
    }

    pub fn state_dim(&self) -> usize {
        match &self.game {
            Game::Scalar(g) => g.state_dim(),
            Game::Vector(g) => g.state_dim(),
        }
    }
}
