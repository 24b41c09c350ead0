//! Signal-independent recursion for the belief weights, error covariances,
//! equilibrium action coefficients and filter gains of every agent.
//!
//! None of these quantities depend on realized signals, so the whole table
//! is computed once per (game, graph, horizon) and shared across runs.

pub mod equilibrium;
pub mod init;
pub mod lmmse;

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GameError, SolveError};
use crate::game::{GameSpec, QuadraticGame, VectorGameSpec};
use crate::graph::NetworkGraph;
use crate::linalg::symmetrize;

pub use equilibrium::{
    action_weights, assemble_system, assemble_vector_system, equilibrium_residual, solve_action_coeffs,
    solve_dense_system, solve_equilibrium, unstack_coeffs, Equilibrium, SolveMethod,
};
pub use init::{init_scalar, init_vector};
pub use lmmse::{build_observation_matrix, lmmse_gains, propagate_factor, propagate_weights, Gains};

/// What agent `i` knows about how its estimates depend on the signals, at
/// one time step. `x` is the stacked signal profile of length `Nm`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientState {
    /// `E_i[x] = L x`, `Nm × Nm`.
    pub l: DMatrix<f64>,
    /// `E_i[θ] = Q x`, `m × Nm`. In the scalar case this is the row `kᵀ`.
    pub q: DMatrix<f64>,
    /// Error covariance of `x − E_i[x]`.
    pub m_xx: DMatrix<f64>,
    /// Error covariance of `θ − E_i[θ]`.
    pub m_thth: DMatrix<f64>,
    /// Cross covariance of the θ and x errors, `m × Nm`.
    pub m_thx: DMatrix<f64>,
    /// Square root `G` of the joint error covariance of `(θ, x)`, rows
    /// ordered θ first: `[M_θθ M_θx; M_xθ M_xx] = G Gᵀ`.
    pub factor: DMatrix<f64>,
    /// Largest prior variance, the reference scale for discarding
    /// innovation directions that are rounding noise.
    pub prior_scale: f64,
}

impl CoefficientState {
    /// State whose covariance blocks are read off `factor`, which has `m`
    /// θ rows followed by the x rows.
    pub fn from_factor(l: DMatrix<f64>, q: DMatrix<f64>, factor: DMatrix<f64>, m: usize, prior_scale: f64) -> Self {
        let mut cov = &factor * factor.transpose();
        symmetrize(&mut cov);
        let dim = cov.nrows() - m;
        CoefficientState {
            l,
            q,
            m_thth: cov.view((0, 0), (m, m)).into_owned(),
            m_thx: cov.view((0, m), (m, dim)).into_owned(),
            m_xx: cov.view((m, m), (dim, dim)).into_owned(),
            factor,
            prior_scale,
        }
    }
}

/// Games whose coefficient recursion can be started and solved.
pub trait CoefficientModel: QuadraticGame {
    fn initial_states(&self) -> Result<Vec<CoefficientState>, GameError>;

    /// Solves the equilibrium at one step.
    fn equilibrium(
        &self,
        states: &[CoefficientState],
        method: SolveMethod,
        step: usize,
    ) -> Result<Equilibrium, SolveError> {
        solve_equilibrium(self, states, method, step)
    }
}

impl CoefficientModel for GameSpec {
    fn initial_states(&self) -> Result<Vec<CoefficientState>, GameError> {
        Ok(init_scalar(self))
    }

    fn equilibrium(
        &self,
        states: &[CoefficientState],
        method: SolveMethod,
        step: usize,
    ) -> Result<Equilibrium, SolveError> {
        let n = self.n_agents();
        if method == SolveMethod::Structured
            || (method == SolveMethod::Auto && n * n > equilibrium::DENSE_UNKNOWN_LIMIT)
        {
            return solve_equilibrium(self, states, SolveMethod::Structured, step);
        }
        let (l_t, k_t) = assemble_system(self, states);
        let sol = solve_action_coeffs(&l_t, &k_t, self.delta(), step)?;
        let coeffs = unstack_coeffs(&sol.x, n, 1);
        let residual = equilibrium_residual(self, states, &coeffs);
        Ok(Equilibrium {
            coeffs,
            singular: sol.singular,
            residual,
            method: SolveMethod::Dense,
        })
    }
}

impl CoefficientModel for VectorGameSpec {
    fn initial_states(&self) -> Result<Vec<CoefficientState>, GameError> {
        init_vector(self)
    }
}

/// Observation and gains used by one agent between `t` and `t + 1`.
#[derive(Debug, Clone)]
pub struct AgentUpdate {
    /// `H`, `Nm × md`; column block `s` belongs to the `s`-th neighbor in
    /// ascending order.
    pub observation: DMatrix<f64>,
    pub gains: Gains,
}

/// Everything one agent carries at one step.
#[derive(Debug, Clone)]
pub struct AgentRecord {
    pub state: CoefficientState,
    /// `U_i`, `m × Nm`.
    pub action: DMatrix<f64>,
    /// `U_i L_i`: the action as a linear function of the signals.
    pub weights: DMatrix<f64>,
    /// Absent at the final step.
    pub update: Option<AgentUpdate>,
}

#[derive(Debug, Clone)]
pub struct StepRecord {
    pub t: usize,
    pub agents: Vec<AgentRecord>,
    pub singular: bool,
    pub residual: f64,
    pub method: SolveMethod,
}

/// The precomputed recursion for steps `0..=horizon`.
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    n: usize,
    m: usize,
    steps: Vec<StepRecord>,
}

impl CoefficientTable {
    pub fn n_agents(&self) -> usize {
        self.n
    }

    pub fn state_dim(&self) -> usize {
        self.m
    }

    pub fn horizon(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn step(&self, t: usize) -> &StepRecord {
        &self.steps[t]
    }

    pub fn agent(&self, i: usize, t: usize) -> &AgentRecord {
        &self.steps[t].agents[i]
    }

    /// Whether any step's equilibrium system was rank deficient.
    pub fn any_singular(&self) -> bool {
        self.steps.iter().any(|s| s.singular)
    }

    /// Largest equilibrium residual over all steps.
    pub fn max_residual(&self) -> f64 {
        self.steps.iter().fold(0.0_f64, |acc, s| acc.max(s.residual))
    }

    /// Writes one JSON object per (step, agent) for offline inspection.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            t: usize,
            agent: usize,
            method: SolveMethod,
            singular: bool,
            action: &'a [f64],
            action_shape: (usize, usize),
            l: &'a [f64],
            q: &'a [f64],
            m_xx: &'a [f64],
            m_thth: &'a [f64],
            m_thx: &'a [f64],
            innovation_rank: Option<usize>,
        }
        for step in &self.steps {
            for (i, rec) in step.agents.iter().enumerate() {
                let line = Line {
                    t: step.t,
                    agent: i + 1,
                    method: step.method,
                    singular: step.singular,
                    action: rec.action.as_slice(),
                    action_shape: rec.action.shape(),
                    l: rec.state.l.as_slice(),
                    q: rec.state.q.as_slice(),
                    m_xx: rec.state.m_xx.as_slice(),
                    m_thth: rec.state.m_thth.as_slice(),
                    m_thx: rec.state.m_thx.as_slice(),
                    innovation_rank: rec.update.as_ref().map(|u| u.gains.innovation_rank),
                };
                serde_json::to_writer(&mut out, &line)?;
                out.write_all(b"\n")?;
            }
        }
        Ok(())
    }
}

/// Options for [`propagate_all`].
#[derive(Debug, Clone, Copy, Default)]
pub struct PropagationOptions {
    pub method: SolveMethod,
}

/// Runs the recursion from `t = 0` to `t = horizon`.
pub fn propagate_all<G: CoefficientModel + ?Sized>(
    game: &G,
    graph: &NetworkGraph,
    horizon: usize,
    options: PropagationOptions,
) -> crate::Result<CoefficientTable> {
    let n = game.n_agents();
    if graph.n_agents() != n {
        return Err(SolveError::Shape(format!("graph has {} agents but the game has {n}", graph.n_agents())).into());
    }
    let mut states = game.initial_states()?;
    let mut steps = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        let eq = game.equilibrium(&states, options.method, t)?;
        let weights = action_weights(&states, &eq.coeffs);
        let outcome: Vec<(AgentRecord, Option<CoefficientState>)> = if t == horizon {
            states
                .into_iter()
                .zip(eq.coeffs)
                .zip(weights.iter().cloned())
                .map(|((state, action), w)| {
                    let rec = AgentRecord {
                        state,
                        action,
                        weights: w,
                        update: None,
                    };
                    (rec, None)
                })
                .collect()
        } else {
            states
                .into_par_iter()
                .zip(eq.coeffs.into_par_iter())
                .enumerate()
                .map(|(i, (state, action))| {
                    let h = build_observation_matrix(graph.adjacency()[i].as_slice(), &weights);
                    let (next, gains) = lmmse::update_state(&state, &h, i, t)?;
                    let rec = AgentRecord {
                        state,
                        action,
                        weights: weights[i].clone(),
                        update: Some(AgentUpdate { observation: h, gains }),
                    };
                    Ok((rec, Some(next)))
                })
                .collect::<Result<Vec<_>, SolveError>>()?
        };
        let (agents, next): (Vec<AgentRecord>, Vec<Option<CoefficientState>>) = outcome.into_iter().unzip();
        steps.push(StepRecord {
            t,
            agents,
            singular: eq.singular,
            residual: eq.residual,
            method: eq.method,
        });
        states = next.into_iter().flatten().collect();
    }
    Ok(CoefficientTable {
        n,
        m: game.state_dim(),
        steps,
    })
}
