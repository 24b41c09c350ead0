use thiserror::Error;

/// Errors raised while building or validating a network topology.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("a network needs at least 2 agents, got {0}")]
    TooFewAgents(usize),
    #[error("agent id {id} out of range for a network of {n} agents")]
    InvalidAgent { id: usize, n: usize },
    #[error("self-loop on agent {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {{{0}, {1}}}")]
    DuplicateEdge(usize, usize),
    #[error("graph is disconnected ({reached} of {n} agents reachable from agent 0)")]
    Disconnected { reached: usize, n: usize },
    #[error("invalid generator parameter: {0}")]
    InvalidParameter(String),
    #[error("no connected graph after {attempts} draws")]
    GenerationFailed { attempts: usize },
}

/// Errors raised by payoff specifications.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("{0}")]
    Domain(String),
}

impl GameError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        GameError::Domain(msg.into())
    }
}

/// Failures of the equilibrium and belief recursions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("no linear equilibrium at step {step}: least-squares residual {residual:.3e} exceeds {tolerance:.3e}")]
    NoEquilibrium { step: usize, residual: f64, tolerance: f64 },
    #[error("numerical failure for agent {agent} at step {step}: {reason}")]
    Numerical { agent: usize, step: usize, reason: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Top-level error type of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Config(#[from] crate::scenario::ConfigError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
