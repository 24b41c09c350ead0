//! The online filter: every agent keeps mean estimates of the signal profile
//! and the state, plays its equilibrium action, and corrects its estimates
//! from the actions of its neighbors.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::coefficients::{CoefficientTable, Gains};
use crate::error::SolveError;
use crate::game::Signals;
use crate::graph::NetworkGraph;

/// Spread below which actions count as having reached consensus.
pub const CONSENSUS_TOLERANCE: f64 = 1e-6;

/// Mean estimates held by one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentBelief {
    /// `E_i[x]`, length `Nm`, component-major.
    pub mean_x: DVector<f64>,
    /// `E_i[θ]`, length `m`.
    pub mean_theta: DVector<f64>,
}

/// Belief of an agent that has seen only its own signal `x_i` (length `m`):
/// every signal is predicted by `x_i`, and so is the state.
pub fn init_belief(n_agents: usize, own_signal: &DVector<f64>) -> AgentBelief {
    let m = own_signal.len();
    AgentBelief {
        mean_x: DVector::from_fn(n_agents * m, |r, _| own_signal[r / n_agents]),
        mean_theta: own_signal.clone(),
    }
}

/// `a = U E[x]`.
pub fn select_action(belief: &AgentBelief, coeffs: &DMatrix<f64>) -> DVector<f64> {
    coeffs * &belief.mean_x
}

/// `E[x] += K_x (a_obs − Hᵀ E[x])` and `E[θ] += K_θ (a_obs − Hᵀ E[x])`.
///
/// `observed` lists the neighbors' actions in ascending neighbor order.
/// Returns the corrected belief and the innovation.
pub fn update_belief(
    belief: &AgentBelief,
    gains: &Gains,
    observation: &DMatrix<f64>,
    observed: &DVector<f64>,
) -> Result<(AgentBelief, DVector<f64>), SolveError> {
    if observed.len() != observation.ncols() {
        return Err(SolveError::Shape(format!(
            "expected {} observed action entries, got {}",
            observation.ncols(),
            observed.len()
        )));
    }
    let innovation = observed - observation.tr_mul(&belief.mean_x);
    let next = AgentBelief {
        mean_x: &belief.mean_x + &gains.state * &innovation,
        mean_theta: &belief.mean_theta + &gains.theta * &innovation,
    };
    Ok((next, innovation))
}

/// A participant in the game. It owns its private signal and its belief,
/// and nothing about any other agent beyond what it is handed each round.
struct Agent {
    belief: AgentBelief,
}

impl Agent {
    fn new(n_agents: usize, own_signal: &DVector<f64>) -> Self {
        Agent {
            belief: init_belief(n_agents, own_signal),
        }
    }

    fn act(&self, coeffs: &DMatrix<f64>) -> DVector<f64> {
        select_action(&self.belief, coeffs)
    }

    fn observe(
        &mut self,
        gains: &Gains,
        observation: &DMatrix<f64>,
        neighbor_actions: &DVector<f64>,
    ) -> Result<DVector<f64>, SolveError> {
        let (next, innovation) = update_belief(&self.belief, gains, observation, neighbor_actions)?;
        self.belief = next;
        Ok(innovation)
    }
}

/// Everything recorded at one round.
#[derive(Debug, Clone)]
pub struct TrajectoryStep {
    pub t: usize,
    /// Action of each agent, length `m`.
    pub actions: Vec<DVector<f64>>,
    /// Beliefs held when the actions were chosen.
    pub beliefs: Vec<AgentBelief>,
    /// `‖x − E_i[x]‖²` per agent.
    pub sq_errors: Vec<f64>,
    /// Innovation seen by each agent at the end of the round (absent at the
    /// last round).
    pub innovations: Option<Vec<DVector<f64>>>,
    /// Agents whose state estimate has a negative component.
    pub negative_theta: Vec<usize>,
    /// The equilibrium system of this round was rank deficient.
    pub singular: bool,
}

impl TrajectoryStep {
    /// Largest componentwise gap between any two agents' actions.
    pub fn action_spread(&self) -> f64 {
        let m = self.actions.first().map_or(0, |a| a.len());
        (0..m)
            .map(|k| {
                let (lo, hi) = self
                    .actions
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), a| {
                        (lo.min(a[k]), hi.max(a[k]))
                    });
                hi - lo
            })
            .fold(0.0, f64::max)
    }
}

/// The played game, round by round.
#[derive(Debug, Clone)]
pub struct Trajectory {
    n: usize,
    m: usize,
    steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn n_agents(&self) -> usize {
        self.n
    }

    pub fn state_dim(&self) -> usize {
        self.m
    }

    pub fn horizon(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn steps(&self) -> &[TrajectoryStep] {
        &self.steps
    }

    pub fn step(&self, t: usize) -> &TrajectoryStep {
        &self.steps[t]
    }

    pub fn final_step(&self) -> &TrajectoryStep {
        self.steps.last().expect("trajectory has at least one step")
    }

    /// First round from which the action spread stays below `tol` until the
    /// end of the run.
    pub fn convergence_step(&self, tol: f64) -> Option<usize> {
        let mut first = None;
        for step in self.steps.iter().rev() {
            if step.action_spread() < tol {
                first = Some(step.t);
            } else {
                break;
            }
        }
        first
    }

    pub fn any_singular(&self) -> bool {
        self.steps.iter().any(|s| s.singular)
    }

    /// Rounds in which some agent's state estimate was negative.
    pub fn negative_theta_steps(&self) -> Vec<usize> {
        self.steps
            .iter()
            .filter(|s| !s.negative_theta.is_empty())
            .map(|s| s.t)
            .collect()
    }

    /// `actions.csv`: columns `t, agent, component, value`, agents and
    /// components 1-based.
    pub fn write_actions_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "agent", "component", "value"])?;
        for step in &self.steps {
            for (i, a) in step.actions.iter().enumerate() {
                for (k, v) in a.iter().enumerate() {
                    w.serialize((step.t, i + 1, k + 1, v))?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// `errors.csv`: columns `t, agent, sq_error`, agents 1-based.
    pub fn write_errors_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "agent", "sq_error"])?;
        for step in &self.steps {
            for (i, e) in step.sq_errors.iter().enumerate() {
                w.serialize((step.t, i + 1, e))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Plays the game for every round the table covers.
///
/// Rounds are synchronous: all agents act on their current beliefs, then
/// each receives its neighbors' actions of that round and updates.
pub fn run_game(table: &CoefficientTable, graph: &NetworkGraph, signals: &Signals) -> Result<Trajectory, SolveError> {
    let n = table.n_agents();
    let m = table.state_dim();
    if signals.n_agents() != n || signals.dim() != m || graph.n_agents() != n {
        return Err(SolveError::Shape(format!(
            "table is for {n} agents with {m} components, signals for {} with {}, graph for {}",
            signals.n_agents(),
            signals.dim(),
            graph.n_agents()
        )));
    }
    let mut agents: Vec<Agent> = (0..n).map(|i| Agent::new(n, &signals.own(i))).collect();
    let x = signals.stacked();
    let mut steps = Vec::with_capacity(table.horizon() + 1);
    for record in table.steps() {
        let actions: Vec<DVector<f64>> = agents
            .iter()
            .zip(&record.agents)
            .map(|(agent, rec)| agent.act(&rec.action))
            .collect();
        let beliefs: Vec<AgentBelief> = agents.iter().map(|a| a.belief.clone()).collect();
        let sq_errors = beliefs.iter().map(|b| (x - &b.mean_x).norm_squared()).collect();
        let negative_theta = beliefs
            .iter()
            .enumerate()
            .filter(|(_, b)| b.mean_theta.iter().any(|v| *v < 0.0))
            .map(|(i, _)| i)
            .collect();
        let innovations = if record.agents.iter().all(|r| r.update.is_some()) {
            let mut out = Vec::with_capacity(n);
            for (i, agent) in agents.iter_mut().enumerate() {
                let update = record.agents[i].update.as_ref().expect("checked above");
                let nbrs = graph.neighbors(i).map_err(|e| SolveError::Shape(e.to_string()))?;
                let observed =
                    DVector::from_iterator(nbrs.len() * m, nbrs.iter().flat_map(|&j| actions[j].iter().copied()));
                out.push(agent.observe(&update.gains, &update.observation, &observed)?);
            }
            Some(out)
        } else {
            None
        };
        steps.push(TrajectoryStep {
            t: record.t,
            actions,
            beliefs,
            sq_errors,
            innovations,
            negative_theta,
            singular: record.singular,
        });
    }
    Ok(Trajectory { n, m, steps })
}
