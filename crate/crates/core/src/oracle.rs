//! What an outside observer who knows every signal can compute: the
//! clairvoyant action table, one-shot Gaussian conditioning of each agent's
//! information, and the complete-information equilibrium.
//!
//! Nothing here reuses the recursion in [`crate::coefficients`]; the batch
//! posterior is assembled directly from the noise model.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::coefficients::lmmse::INNOVATION_CUTOFF;
use crate::coefficients::CoefficientTable;
use crate::filter::{Trajectory, CONSENSUS_TOLERANCE};
use crate::game::{GameSpec, QuadraticGame, Signals, VectorGameSpec};
use crate::graph::NetworkGraph;
use crate::linalg::{max_abs_diff, Svd};

/// `a_i(t) = U_{i,t} L_{i,t} x` for every round and agent, indexed `[t][i]`.
pub fn clairvoyant_actions(table: &CoefficientTable, x: &DVector<f64>) -> Vec<Vec<DVector<f64>>> {
    table
        .steps()
        .iter()
        .map(|step| step.agents.iter().map(|rec| &rec.action * (&rec.state.l * x)).collect())
        .collect()
}

/// Joint posterior of `(θ, x)` for one agent, expressed as weights on the
/// signal profile and error covariances.
#[derive(Debug, Clone)]
pub struct BatchPosterior {
    pub l: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub m_xx: DMatrix<f64>,
    pub m_thth: DMatrix<f64>,
    pub m_thx: DMatrix<f64>,
}

/// Joint prior of agent `i` before any observation: estimates are linear
/// in `x` (`weights`, rows for `θ` then `x`) with error covariance `cov`.
#[derive(Debug, Clone)]
pub struct BatchPrior {
    pub weights: DMatrix<f64>,
    pub cov: DMatrix<f64>,
    /// `cov = factor factorᵀ`.
    pub factor: DMatrix<f64>,
    m: usize,
}

impl BatchPrior {
    /// Agent `i` holding only `x_i`, with a flat prior on `θ`.
    ///
    /// Conditionally on `x_i`, the error of the guess `θ ≈ x_i` is `−ε_i`,
    /// and the error of `x_j ≈ x_i` is `ε_j − ε_i`. Pushing the noise
    /// covariance through this map gives the joint error covariance.
    pub fn from_noise(noise_cov: &[DMatrix<f64>], i: usize) -> Self {
        let n = noise_cov.len();
        let m = noise_cov[0].nrows();
        let dim = n * m;
        let mut sigma_eps = DMatrix::zeros(dim, dim);
        for (j, c) in noise_cov.iter().enumerate() {
            for k in 0..m {
                for l in 0..m {
                    sigma_eps[(k * n + j, l * n + j)] = c[(k, l)];
                }
            }
        }
        // error = T ε, rows ordered (θ_0..θ_{m-1}, x stacked component-major)
        let mut t_map = DMatrix::zeros(m + dim, dim);
        let mut weights = DMatrix::zeros(m + dim, dim);
        for k in 0..m {
            t_map[(k, k * n + i)] = -1.0;
            weights[(k, k * n + i)] = 1.0;
            for j in 0..n {
                let row = m + k * n + j;
                t_map[(row, k * n + j)] += 1.0;
                t_map[(row, k * n + i)] -= 1.0;
                weights[(row, k * n + i)] = 1.0;
            }
        }
        let chol = sigma_eps
            .clone()
            .cholesky()
            .expect("noise covariances are positive definite")
            .l();
        let cov = &t_map * sigma_eps * t_map.transpose();
        let factor = t_map * chol;
        BatchPrior {
            weights,
            cov,
            factor,
            m,
        }
    }

    fn split(&self, weights: DMatrix<f64>, cov: DMatrix<f64>) -> BatchPosterior {
        let m = self.m;
        let dim = weights.ncols();
        BatchPosterior {
            q: weights.rows(0, m).into_owned(),
            l: weights.rows(m, dim).into_owned(),
            m_thth: cov.view((0, 0), (m, m)).into_owned(),
            m_thx: cov.view((0, m), (m, dim)).into_owned(),
            m_xx: cov.view((m, m), (dim, dim)).into_owned(),
        }
    }
}

/// Conditions the prior on all observations `y_s = H_sᵀ x` at once.
///
/// With the prior error written as `F w` for white `w`, the innovations are
/// `ν = Zᵀ w` where `Z = F_xᵀ [H_0 … H_{t−1}]`. The columns of `Z` are
/// orthonormalized block by block in observation order, giving `Q = Z A`;
/// the posterior mean adds `F Q Aᵀ ν` and the posterior covariance is
/// `F (I − Q Qᵀ) Fᵀ`. Within a block, singular values with
/// `σ² ≤ 10⁻¹¹ · max(σ_max², ‖H_s‖_F² · prior scale)` count as zero.
pub fn batch_posterior(prior: &BatchPrior, observations: &[&DMatrix<f64>]) -> BatchPosterior {
    let m = prior.m;
    let dim = prior.weights.ncols();
    let cols: usize = observations.iter().map(|h| h.ncols()).sum();
    if cols == 0 {
        return prior.split(prior.weights.clone(), prior.cov.clone());
    }
    let mut g = DMatrix::zeros(dim, cols);
    let mut at = 0;
    for h in observations {
        g.view_mut((0, at), (dim, h.ncols())).copy_from(h);
        at += h.ncols();
    }
    let f = &prior.factor;
    let z = f.rows(m, dim).transpose() * &g;
    let prior_scale = prior.cov.diagonal().max();

    let width = z.nrows();
    let mut basis = DMatrix::<f64>::zeros(width, 0);
    let mut coeff = DMatrix::<f64>::zeros(cols, 0);
    let mut start = 0;
    for h in observations {
        let len = h.ncols();
        let mut block = z.columns(start, len).into_owned();
        let mut block_coeff = DMatrix::zeros(cols, len);
        block_coeff.view_mut((start, 0), (len, len)).fill_with_identity();
        for _ in 0..2 {
            let overlap = basis.transpose() * &block;
            block -= &basis * &overlap;
            block_coeff -= &coeff * overlap;
        }
        let svd = Svd::new(&block);
        let sigma_max = svd.sigma_max();
        let cutoff = INNOVATION_CUTOFF * (sigma_max * sigma_max).max(h.norm_squared() * prior_scale);
        let kept: Vec<usize> = (0..svd.sigma.len())
            .filter(|&k| svd.sigma[k] > 0.0 && svd.sigma[k].powi(2) > cutoff)
            .collect();
        let dirs = DMatrix::from_fn(width, kept.len(), |r, c| svd.u[(r, kept[c])]);
        let scaled_v = DMatrix::from_fn(len, kept.len(), |r, c| svd.v[(r, kept[c])] / svd.sigma[kept[c]]);
        let new_coeff = &block_coeff * scaled_v;
        basis = concat_columns(&basis, &dirs);
        coeff = concat_columns(&coeff, &new_coeff);
        start += len;
    }
    let f_q = f * &basis;
    let gain = &f_q * coeff.transpose();
    let x_hat = prior.weights.rows(m, dim);
    let innovation_map = g.transpose() * (DMatrix::identity(dim, dim) - x_hat);
    let weights = &prior.weights + gain * innovation_map;
    let mut cov = &prior.cov - &f_q * f_q.transpose();
    cov = (&cov + cov.transpose()) * 0.5;
    prior.split(weights, cov)
}

fn concat_columns(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Largest entrywise gap between a batch posterior and the recursion's
/// state for agent `i` at round `t`.
pub fn batch_gap(table: &CoefficientTable, prior: &BatchPrior, i: usize, t: usize) -> f64 {
    let obs: Vec<&DMatrix<f64>> = (0..t)
        .map(|s| {
            &table
                .agent(i, s)
                .update
                .as_ref()
                .expect("rounds before the last carry updates")
                .observation
        })
        .collect();
    let post = batch_posterior(prior, &obs);
    let state = &table.agent(i, t).state;
    [
        max_abs_diff(&post.l, &state.l),
        max_abs_diff(&post.q, &state.q),
        max_abs_diff(&post.m_xx, &state.m_xx),
        max_abs_diff(&post.m_thth, &state.m_thth),
        max_abs_diff(&post.m_thx, &state.m_thx),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// `E[θ | x]` under a flat prior: `(Σ C_i⁻¹)⁻¹ Σ C_i⁻¹ x_i`. For diagonal
/// covariances this is the componentwise precision-weighted mean.
pub fn precision_weighted_mean(signals: &Signals, noise_cov: &[DMatrix<f64>]) -> DVector<f64> {
    let m = signals.dim();
    let mut precision = DMatrix::zeros(m, m);
    let mut weighted = DVector::zeros(m);
    for (i, c) in noise_cov.iter().enumerate() {
        let p = c
            .clone()
            .try_inverse()
            .expect("noise covariances are positive definite");
        weighted += &p * signals.own(i);
        precision += p;
    }
    precision.try_inverse().expect("sum of precisions is positive definite") * weighted
}

/// Cournot benchmark `E[θ|x] / (N + 1)`.
pub fn complete_info_nash_cournot(x: &[f64], noise_var: &[f64]) -> f64 {
    let num: f64 = x.iter().zip(noise_var).map(|(xi, c)| xi / c).sum();
    let den: f64 = noise_var.iter().map(|c| 1.0 / c).sum();
    num / den / (x.len() as f64 + 1.0)
}

/// Coordination benchmark `E[θ|x]`, componentwise for diagonal covariances.
pub fn complete_info_nash_coordination(signals: &Signals, noise_cov: &[DMatrix<f64>]) -> DVector<f64> {
    precision_weighted_mean(signals, noise_cov)
}

/// Equilibrium when every signal is public: `a_i = Σ_j B_ij a_j + D E[θ|x]`.
/// `None` if that system is singular.
pub fn complete_info_nash<G: QuadraticGame + ?Sized>(game: &G, signals: &Signals) -> Option<Vec<DVector<f64>>> {
    let n = game.n_agents();
    let m = game.state_dim();
    let noise: Vec<DMatrix<f64>> = (0..n).map(|i| game.noise_cov(i)).collect();
    let target = game.state_weight() * precision_weighted_mean(signals, &noise);
    let mut a = DMatrix::identity(n * m, n * m);
    let mut rhs = DVector::zeros(n * m);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let b = game.coupling(i, j);
                let mut block = a.view_mut((i * m, j * m), (m, m));
                block -= b;
            }
        }
        rhs.rows_mut(i * m, m).copy_from(&target);
    }
    let sol = a.lu().solve(&rhs)?;
    Some((0..n).map(|i| sol.rows(i * m, m).into_owned()).collect())
}

/// Games whose ground-truth state the oracle may read.
pub trait GroundTruth {
    fn true_state(&self) -> Vec<f64>;
}

impl GroundTruth for GameSpec {
    fn true_state(&self) -> Vec<f64> {
        vec![self.theta_true()]
    }
}

impl GroundTruth for VectorGameSpec {
    fn true_state(&self) -> Vec<f64> {
        self.theta_true().iter().copied().collect()
    }
}

/// How much of the batch comparison to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchCheck {
    /// Every agent at every round.
    #[default]
    All,
    /// Every agent at the last round only.
    Final,
    Skip,
}

/// Outcome of checking one run against the outside observer.
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub n_agents: usize,
    pub state_dim: usize,
    pub horizon: usize,
    pub diameter: usize,
    /// First round from which all actions agree within 10⁻⁶.
    pub convergence_step: Option<usize>,
    pub theta_true: Vec<f64>,
    /// `E[θ|x]` under a flat prior.
    pub precision_weighted_mean: Vec<f64>,
    /// Complete-information equilibrium action of each agent.
    pub nash_actions: Option<Vec<Vec<f64>>>,
    /// Largest `|a_i(T) − a_i*|`.
    pub final_nash_gap: Option<f64>,
    /// Largest `|E_{i,T}[θ] − E[θ|x]|`.
    pub final_theta_gap: f64,
    /// Largest gap between agent-local and clairvoyant actions.
    pub max_action_gap: f64,
    /// Largest gap between agent-local means and `L x`, `Q x`, relative to
    /// `max(1, ‖x‖∞)`.
    pub max_clairvoyant_gap: f64,
    /// Largest gap between the recursion and one-shot conditioning, or
    /// `None` when skipped.
    pub max_batch_gap: Option<f64>,
    pub batch_check: BatchCheck,
    pub max_equilibrium_residual: f64,
    pub final_sq_errors: Vec<f64>,
    pub final_action_spread: f64,
    pub singular_steps: Vec<usize>,
    pub negative_theta_steps: Vec<usize>,
}

/// Checks a run end to end. Reports, never judges.
pub fn verify<G>(
    trajectory: &Trajectory,
    table: &CoefficientTable,
    signals: &Signals,
    game: &G,
    graph: &NetworkGraph,
    batch: BatchCheck,
) -> OracleReport
where
    G: QuadraticGame + GroundTruth + ?Sized,
{
    let x = signals.stacked();
    let scale = x.amax().max(1.0);
    let clair = clairvoyant_actions(table, x);
    let mut max_action_gap = 0.0_f64;
    let mut max_clairvoyant_gap = 0.0_f64;
    for (t, step) in trajectory.steps().iter().enumerate() {
        for i in 0..trajectory.n_agents() {
            max_action_gap = max_action_gap.max((&step.actions[i] - &clair[t][i]).amax());
            let state = &table.agent(i, t).state;
            let belief = &step.beliefs[i];
            let gx = (&belief.mean_x - &state.l * x).amax();
            let gth = (&belief.mean_theta - &state.q * x).amax();
            max_clairvoyant_gap = max_clairvoyant_gap.max(gx.max(gth) / scale);
        }
    }

    let n = game.n_agents();
    let noise: Vec<DMatrix<f64>> = (0..n).map(|i| game.noise_cov(i)).collect();
    let max_batch_gap = match batch {
        BatchCheck::Skip => None,
        BatchCheck::All | BatchCheck::Final => {
            let first = if batch == BatchCheck::All { 0 } else { table.horizon() };
            let mut worst = 0.0_f64;
            for i in 0..n {
                let prior = BatchPrior::from_noise(&noise, i);
                for t in first..=table.horizon() {
                    worst = worst.max(batch_gap(table, &prior, i, t));
                }
            }
            Some(worst)
        }
    };

    let pwm = precision_weighted_mean(signals, &noise);
    let last = trajectory.final_step();
    let nash = complete_info_nash(game, signals);
    let final_nash_gap = nash.as_ref().map(|a| {
        a.iter()
            .zip(&last.actions)
            .map(|(star, played)| (star - played).amax())
            .fold(0.0, f64::max)
    });
    let final_theta_gap = last
        .beliefs
        .iter()
        .map(|b| (&b.mean_theta - &pwm).amax())
        .fold(0.0, f64::max);

    OracleReport {
        n_agents: n,
        state_dim: game.state_dim(),
        horizon: trajectory.horizon(),
        diameter: graph.diameter(),
        convergence_step: trajectory.convergence_step(CONSENSUS_TOLERANCE),
        theta_true: game.true_state(),
        precision_weighted_mean: pwm.iter().copied().collect(),
        nash_actions: nash.map(|a| a.iter().map(|v| v.iter().copied().collect()).collect()),
        final_nash_gap,
        final_theta_gap,
        max_action_gap,
        max_clairvoyant_gap,
        max_batch_gap,
        batch_check: batch,
        max_equilibrium_residual: table.max_residual(),
        final_sq_errors: last.sq_errors.clone(),
        final_action_spread: last.action_spread(),
        singular_steps: table.steps().iter().filter(|s| s.singular).map(|s| s.t).collect(),
        negative_theta_steps: trajectory.negative_theta_steps(),
    }
}
