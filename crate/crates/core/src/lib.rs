//! Simulation of Bayesian learning in quadratic network games.
//!
//! Agents on a connected graph each hold a private noisy signal of an
//! unknown state, play a linear Bayesian Nash equilibrium of a quadratic
//! game, observe their neighbors' actions and update linear-MMSE beliefs.
//!
//! The pipeline has two halves. [`coefficients::propagate_all`] runs the
//! signal-independent recursion for weights, covariances, action
//! coefficients and gains. [`filter::run_game`] then replays it on one
//! signal draw, with each agent touching only its own signal and its
//! neighbors' actions. [`oracle`] checks the outcome against centralized
//! benchmarks.

pub mod coefficients;
pub mod error;
pub mod filter;
pub mod game;
pub mod graph;
pub mod linalg;
pub mod oracle;
pub mod rng;
pub mod scenario;

pub use coefficients::{propagate_all, CoefficientModel, CoefficientTable, PropagationOptions, SolveMethod};
pub use error::{Error, GameError, GraphError, Result, SolveError};

pub use filter::{run_game, Trajectory};
pub use game::{GameSpec, QuadraticGame, Signals, VectorGameSpec};
pub use graph::NetworkGraph;
