//! Quadratic payoff specifications and private-signal generation.
//!
//! Scalar games pay agent `i`
//! `u_i = -a_i²/2 + Σ_{j≠i} β_ij a_i a_j + δ a_i θ`;
//! vector games pay
//! `u_i = -Σ_j a_jᵀa_j/2 + Σ_{j≠i} a_iᵀ B_ij a_j + a_iᵀ D θ`.
//! Both best responses are linear: `a_i = Σ β_ij E[a_j] + δ E[θ]` and
//! `a_i = Σ B_ij E[a_j] + D E[θ]`.

use nalgebra::{DMatrix, DVector};

use crate::error::GameError;
use crate::rng::SeededStream;

/// Common view of scalar and vector quadratic games, in the vector form
/// (a scalar game is the `m = 1` case).
pub trait QuadraticGame: Sync {
    fn n_agents(&self) -> usize;
    /// Dimension `m` of the state and of each action.
    fn state_dim(&self) -> usize;
    /// `B_ij` (`m × m`); zero on the diagonal.
    fn coupling(&self, i: usize, j: usize) -> DMatrix<f64>;
    /// `D` (`m × m`).
    fn state_weight(&self) -> DMatrix<f64>;
    /// Noise covariance `C_i` of agent `i` (`m × m`).
    fn noise_cov(&self, i: usize) -> DMatrix<f64>;
    /// Draws `x_i = θ + ε_i` for every agent from the seeded stream.
    fn draw_signals(&self, seed: u64) -> Signals;
}

/// Scalar-state game.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    beta: DMatrix<f64>,
    delta: f64,
    noise_var: DVector<f64>,
    theta_true: f64,
}

impl GameSpec {
    pub fn new(beta: DMatrix<f64>, delta: f64, noise_var: DVector<f64>, theta_true: f64) -> Result<Self, GameError> {
        let n = noise_var.len();
        if n == 0 {
            return Err(GameError::domain("a game needs at least one agent"));
        }
        if beta.shape() != (n, n) {
            return Err(GameError::domain(format!(
                "beta must be {n}x{n}, got {}x{}",
                beta.nrows(),
                beta.ncols()
            )));
        }
        for i in 0..n {
            if beta[(i, i)] != 0.0 {
                return Err(GameError::domain(format!(
                    "beta[{i}][{i}] must be 0, got {}",
                    beta[(i, i)]
                )));
            }
        }
        if beta.iter().any(|b| !b.is_finite()) || !delta.is_finite() || !theta_true.is_finite() {
            return Err(GameError::domain("payoff coefficients must be finite"));
        }
        if let Some((i, c)) = noise_var
            .iter()
            .enumerate()
            .find(|(_, c)| !(c.is_finite() && **c > 0.0))
        {
            return Err(GameError::domain(format!("noise_var[{i}] must be positive, got {c}")));
        }
        Ok(GameSpec {
            beta,
            delta,
            noise_var,
            theta_true,
        })
    }

    pub fn beta(&self) -> &DMatrix<f64> {
        &self.beta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn noise_var(&self) -> &DVector<f64> {
        &self.noise_var
    }

    /// `Σ_j |β_ij| < 1` for every agent, which guarantees a unique linear
    /// equilibrium at every step.
    pub fn is_diagonally_dominant(&self) -> bool {
        self.beta
            .row_iter()
            .all(|row| row.iter().map(|b| b.abs()).sum::<f64>() < 1.0)
    }

    /// Ground truth, read only by signal drawing and the oracle.
    pub(crate) fn theta_true(&self) -> f64 {
        self.theta_true
    }

    /// The same game expressed as an `m = 1` vector game.
    pub fn to_vector(&self) -> VectorGameSpec {
        let n = self.noise_var.len();
        let coupling = (0..n)
            .map(|i| (0..n).map(|j| DMatrix::from_element(1, 1, self.beta[(i, j)])).collect())
            .collect();
        VectorGameSpec::new(
            coupling,
            DMatrix::from_element(1, 1, self.delta),
            self.noise_var.iter().map(|&c| DMatrix::from_element(1, 1, c)).collect(),
            DVector::from_element(1, self.theta_true),
        )
        .expect("a valid scalar game lifts to a valid vector game")
    }
}

impl QuadraticGame for GameSpec {
    fn n_agents(&self) -> usize {
        self.noise_var.len()
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn coupling(&self, i: usize, j: usize) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.beta[(i, j)])
    }

    fn state_weight(&self) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.delta)
    }

    fn noise_cov(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.noise_var[i])
    }

    fn draw_signals(&self, seed: u64) -> Signals {
        let mut stream = SeededStream::new(seed);
        let x = self
            .noise_var
            .map(|c| self.theta_true + c.sqrt() * stream.standard_normal());
        Signals::new(x.len(), 1, x)
    }
}

/// Vector-state game with `m × m` coupling blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorGameSpec {
    n: usize,
    m: usize,
    /// Row-major `N × N` grid of `B_ij`.
    coupling: Vec<DMatrix<f64>>,
    state_weight: DMatrix<f64>,
    noise_cov: Vec<DMatrix<f64>>,
    noise_chol: Vec<DMatrix<f64>>,
    theta_true: DVector<f64>,
}

impl VectorGameSpec {
    /// `coupling[i][j]` is `B_ij`. Noise covariances must be symmetric
    /// positive definite; the belief initializer further requires them to
    /// be diagonal.
    pub fn new(
        coupling: Vec<Vec<DMatrix<f64>>>,
        state_weight: DMatrix<f64>,
        noise_cov: Vec<DMatrix<f64>>,
        theta_true: DVector<f64>,
    ) -> Result<Self, GameError> {
        let n = noise_cov.len();
        let m = theta_true.len();
        if n == 0 || m == 0 {
            return Err(GameError::domain("need at least one agent and one state component"));
        }
        if state_weight.shape() != (m, m) {
            return Err(GameError::domain(format!("D must be {m}x{m}")));
        }
        if coupling.len() != n || coupling.iter().any(|row| row.len() != n) {
            return Err(GameError::domain(format!("B must be an {n}x{n} grid of blocks")));
        }
        let mut flat = Vec::with_capacity(n * n);
        for (i, row) in coupling.into_iter().enumerate() {
            for (j, block) in row.into_iter().enumerate() {
                if block.shape() != (m, m) {
                    return Err(GameError::domain(format!("B[{i}][{j}] must be {m}x{m}")));
                }
                if i == j && block.iter().any(|v| *v != 0.0) {
                    return Err(GameError::domain(format!("B[{i}][{i}] must be the zero matrix")));
                }
                if block.iter().any(|v| !v.is_finite()) {
                    return Err(GameError::domain(format!("B[{i}][{j}] must be finite")));
                }
                flat.push(block);
            }
        }
        let mut noise_chol = Vec::with_capacity(n);
        for (i, c) in noise_cov.iter().enumerate() {
            if c.shape() != (m, m) {
                return Err(GameError::domain(format!("noise_cov[{i}] must be {m}x{m}")));
            }
            if crate::linalg::asymmetry(c) > 0.0 {
                return Err(GameError::domain(format!("noise_cov[{i}] must be symmetric")));
            }
            let chol = c
                .clone()
                .cholesky()
                .ok_or_else(|| GameError::domain(format!("noise_cov[{i}] must be positive definite")))?;
            noise_chol.push(chol.l());
        }
        if theta_true.iter().any(|v| !v.is_finite()) || state_weight.iter().any(|v| !v.is_finite()) {
            return Err(GameError::domain("theta_true and D must be finite"));
        }
        Ok(VectorGameSpec {
            n,
            m,
            coupling: flat,
            state_weight,
            noise_cov,
            noise_chol,
            theta_true,
        })
    }

    pub fn coupling_block(&self, i: usize, j: usize) -> &DMatrix<f64> {
        &self.coupling[i * self.n + j]
    }

    pub fn noise_cov_block(&self, i: usize) -> &DMatrix<f64> {
        &self.noise_cov[i]
    }

    /// Whether every `C_i` is diagonal.
    pub fn has_diagonal_noise(&self) -> bool {
        self.noise_cov
            .iter()
            .all(|c| (0..self.m).all(|k| (0..self.m).all(|l| k == l || c[(k, l)] == 0.0)))
    }

    /// Ground truth, read only by signal drawing and the oracle.
    pub(crate) fn theta_true(&self) -> &DVector<f64> {
        &self.theta_true
    }
}

impl QuadraticGame for VectorGameSpec {
    fn n_agents(&self) -> usize {
        self.n
    }

    fn state_dim(&self) -> usize {
        self.m
    }

    fn coupling(&self, i: usize, j: usize) -> DMatrix<f64> {
        self.coupling_block(i, j).clone()
    }

    fn state_weight(&self) -> DMatrix<f64> {
        self.state_weight.clone()
    }

    fn noise_cov(&self, i: usize) -> DMatrix<f64> {
        self.noise_cov[i].clone()
    }

    fn draw_signals(&self, seed: u64) -> Signals {
        let mut stream = SeededStream::new(seed);
        let mut x = DVector::zeros(self.n * self.m);
        for i in 0..self.n {
            let z = DVector::from_fn(self.m, |_, _| stream.standard_normal());
            let eps = &self.noise_chol[i] * z;
            for k in 0..self.m {
                x[k * self.n + i] = self.theta_true[k] + eps[k];
            }
        }
        Signals::new(self.n, self.m, x)
    }
}

/// Private signals of every agent, stacked component-major:
/// entry `k·N + i` is component `k` of agent `i`'s signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Signals {
    n: usize,
    m: usize,
    stacked: DVector<f64>,
}

impl Signals {
    pub fn new(n: usize, m: usize, stacked: DVector<f64>) -> Self {
        assert_eq!(stacked.len(), n * m, "signal vector must have N·m entries");
        Signals { n, m, stacked }
    }

    /// Builds signals from per-agent vectors.
    pub fn from_agents(per_agent: &[DVector<f64>]) -> Self {
        let n = per_agent.len();
        let m = per_agent.first().map_or(0, |v| v.len());
        let mut stacked = DVector::zeros(n * m);
        for (i, xi) in per_agent.iter().enumerate() {
            assert_eq!(xi.len(), m, "all agents need signals of the same dimension");
            for k in 0..m {
                stacked[k * n + i] = xi[k];
            }
        }
        Signals { n, m, stacked }
    }

    pub fn n_agents(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn stacked(&self) -> &DVector<f64> {
        &self.stacked
    }

    /// Agent `i`'s own `m`-dimensional signal.
    pub fn own(&self, i: usize) -> DVector<f64> {
        DVector::from_fn(self.m, |k, _| self.stacked[k * self.n + i])
    }
}

/// Scalar payoff `-a_i²/2 + Σ_{j≠i} β_ij a_i a_j + δ a_i θ`.
pub fn utility_scalar(spec: &GameSpec, i: usize, actions: &[f64], theta: f64) -> f64 {
    let ai = actions[i];
    let coupling: f64 = actions
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(j, aj)| spec.beta[(i, j)] * ai * aj)
        .sum();
    -0.5 * ai * ai + coupling + spec.delta * ai * theta
}

/// `∂u_i/∂a_i` of the scalar payoff; zero exactly at the best response.
pub fn marginal_utility_scalar(spec: &GameSpec, i: usize, actions: &[f64], theta: f64) -> f64 {
    -actions[i] + best_response_scalar(spec, i, actions, theta)
}

/// `Σ_{j≠i} β_ij a_j + δ θ`; the entry `actions[i]` is ignored.
pub fn best_response_scalar(spec: &GameSpec, i: usize, actions: &[f64], theta: f64) -> f64 {
    actions
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(j, aj)| spec.beta[(i, j)] * aj)
        .sum::<f64>()
        + spec.delta * theta
}

/// Vector payoff `-Σ_j a_jᵀa_j/2 + Σ_{j≠i} a_iᵀ B_ij a_j + a_iᵀ D θ`.
pub fn utility_vector(spec: &VectorGameSpec, i: usize, actions: &[DVector<f64>], theta: &DVector<f64>) -> f64 {
    let quad: f64 = actions.iter().map(|a| a.dot(a)).sum();
    let coupling: f64 = (0..spec.n)
        .filter(|&j| j != i)
        .map(|j| actions[i].dot(&(spec.coupling_block(i, j) * &actions[j])))
        .sum();
    -0.5 * quad + coupling + actions[i].dot(&(&spec.state_weight * theta))
}

/// Gradient of the vector payoff with respect to `a_i`.
pub fn marginal_utility_vector(
    spec: &VectorGameSpec,
    i: usize,
    actions: &[DVector<f64>],
    theta: &DVector<f64>,
) -> DVector<f64> {
    best_response_vector(spec, i, actions, theta) - &actions[i]
}

/// `Σ_{j≠i} B_ij a_j + D θ`.
pub fn best_response_vector(
    spec: &VectorGameSpec,
    i: usize,
    actions: &[DVector<f64>],
    theta: &DVector<f64>,
) -> DVector<f64> {
    let mut out = &spec.state_weight * theta;
    for j in (0..spec.n).filter(|&j| j != i) {
        out += spec.coupling_block(i, j) * &actions[j];
    }
    out
}

/// Cournot market with linear inverse demand `p - Σ a_j` and unit cost `c`.
///
/// With `θ = p - c` the profit `(θ - a_i - Σ_{j≠i} a_j) a_i` is twice the
/// quadratic payoff with `β_ij = -1/2` and `δ = 1/2`.
pub fn cournot_spec(price: f64, unit_cost: f64, noise_var: Vec<f64>, n: usize) -> Result<GameSpec, GameError> {
    if !(price > unit_cost) {
        return Err(GameError::domain(format!(
            "market price {price} must exceed unit cost {unit_cost}"
        )));
    }
    if noise_var.len() != n {
        return Err(GameError::domain(format!(
            "expected {n} noise variances, got {}",
            noise_var.len()
        )));
    }
    let beta = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { -0.5 });
    GameSpec::new(beta, 0.5, DVector::from_vec(noise_var), price - unit_cost)
}

/// Cournot profit `(θ - a_i - Σ_{j≠i} a_j) a_i`.
pub fn cournot_profit(i: usize, actions: &[f64], theta: f64) -> f64 {
    let total: f64 = actions.iter().sum();
    (theta - total) * actions[i]
}

/// Coordination game on `m`-dimensional directions: `D = (1-λ) I` and
/// `B_ij = λ/(N-1) I`.
pub fn coordination_spec(
    lambda: f64,
    noise_cov: Vec<DMatrix<f64>>,
    n: usize,
    theta_true: DVector<f64>,
) -> Result<VectorGameSpec, GameError> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(GameError::domain(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    if n < 2 {
        return Err(GameError::domain("a coordination game needs at least 2 agents"));
    }
    if noise_cov.len() != n {
        return Err(GameError::domain(format!(
            "expected {n} noise covariances, got {}",
            noise_cov.len()
        )));
    }
    let m = theta_true.len();
    let weight = lambda / (n - 1) as f64;
    let coupling = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        DMatrix::zeros(m, m)
                    } else {
                        DMatrix::identity(m, m) * weight
                    }
                })
                .collect()
        })
        .collect();
    VectorGameSpec::new(
        coupling,
        DMatrix::identity(m, m) * (1.0 - lambda),
        noise_cov,
        theta_true,
    )
}

/// Raw coordination payoff
/// `-(1-λ)/2 ‖a_i - θ‖² - λ/(2(N-1)) Σ_{j≠i} ‖a_i - a_j‖²`.
pub fn coordination_payoff(lambda: f64, i: usize, actions: &[DVector<f64>], theta: &DVector<f64>) -> f64 {
    let n = actions.len();
    let estimation = (&actions[i] - theta).norm_squared();
    let coordination: f64 = (0..n)
        .filter(|&j| j != i)
        .map(|j| (&actions[i] - &actions[j]).norm_squared())
        .sum();
    -0.5 * (1.0 - lambda) * estimation - lambda / (2.0 * (n - 1) as f64) * coordination
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_game(beta: f64, delta: f64) -> GameSpec {
        let b = DMatrix::from_row_slice(2, 2, &[0.0, beta, beta, 0.0]);
        GameSpec::new(b, delta, DVector::from_vec(vec![1.0, 1.0]), 0.0).unwrap()
    }

    #[test]
    fn scalar_utility_examples() {
        let g = pair_game(0.0, 1.0);
        assert_eq!(utility_scalar(&g, 0, &[1.0, 0.0], 2.0), 1.5);
        let g = pair_game(0.5, 0.0);
        assert_eq!(utility_scalar(&g, 0, &[1.0, 1.0], 7.0), 0.0);
        let g = pair_game(0.3, 0.9);
        assert_eq!(utility_scalar(&g, 0, &[0.0, 5.0], 3.0), 0.0);
    }

    #[test]
    fn vector_utility_zero_actions() {
        let spec = coordination_spec(
            0.5,
            vec![DMatrix::identity(2, 2); 3],
            3,
            DVector::from_vec(vec![10.0, 20.0]),
        )
        .unwrap();
        let zeros = vec![DVector::zeros(2); 3];
        assert_eq!(
            utility_vector(&spec, 1, &zeros, &DVector::from_vec(vec![1.0, 2.0])),
            0.0
        );
    }

    #[test]
    fn coordination_payoff_is_zero_at_perfect_agreement() {
        let theta = DVector::from_vec(vec![10.0, 20.0]);
        let actions = vec![theta.clone(); 4];
        assert_eq!(coordination_payoff(0.5, 2, &actions, &theta), 0.0);
    }

    #[test]
    fn game_spec_validation() {
        let bad_diag = DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, 0.0]);
        let err = GameSpec::new(bad_diag, 1.0, DVector::from_vec(vec![1.0, 1.0]), 0.0).unwrap_err();
        assert!(err.to_string().contains("beta[0][0]"));
        let err = GameSpec::new(DMatrix::zeros(2, 2), 1.0, DVector::from_vec(vec![1.0, 0.0]), 0.0).unwrap_err();
        assert!(err.to_string().contains("noise_var[1]"));
    }

    #[test]
    fn cournot_construction() {
        let g = cournot_spec(14.0, 2.0, vec![1.0; 5], 5).unwrap();
        assert_eq!(g.theta_true(), 12.0);
        assert_eq!(g.delta(), 0.5);
        for i in 0..5 {
            let row_sum: f64 = g.beta().row(i).iter().sum();
            assert_eq!(row_sum, -2.0);
        }
        assert!(!g.is_diagonally_dominant());
        assert!(!cournot_spec(5.0, 1.0, vec![1.0; 3], 3)
            .unwrap()
            .is_diagonally_dominant());
        assert!(cournot_spec(5.0, 1.0, vec![1.0; 2], 2)
            .unwrap()
            .is_diagonally_dominant());
        assert!(cournot_spec(1.0, 1.0, vec![1.0; 2], 2).is_err());
        assert!(cournot_spec(1.0, 2.0, vec![1.0; 2], 2).is_err());
    }

    #[test]
    fn coordination_construction() {
        let theta = DVector::from_vec(vec![10.0, 20.0]);
        let g = coordination_spec(0.5, vec![DMatrix::identity(2, 2); 50], 50, theta.clone()).unwrap();
        assert_eq!(g.coupling_block(0, 1), &(DMatrix::identity(2, 2) * (0.5 / 49.0)));
        assert_eq!(g.state_weight(), DMatrix::identity(2, 2) * 0.5);
        assert_eq!(g.theta_true(), &theta);
        let g = coordination_spec(0.999, vec![DMatrix::identity(2, 2); 4], 4, theta.clone()).unwrap();
        assert_eq!(g.coupling_block(3, 0)[(0, 0)], 0.999 / 3.0);
        for bad in [0.0, 1.0, -0.2, 1.5] {
            assert!(coordination_spec(bad, vec![DMatrix::identity(2, 2); 4], 4, theta.clone()).is_err());
        }
    }

    #[test]
    fn vector_spec_rejects_nonzero_self_coupling() {
        let mut coupling = vec![vec![DMatrix::zeros(1, 1); 2]; 2];
        coupling[1][1] = DMatrix::from_element(1, 1, 0.2);
        let err = VectorGameSpec::new(
            coupling,
            DMatrix::identity(1, 1),
            vec![DMatrix::identity(1, 1); 2],
            DVector::zeros(1),
        )
        .unwrap_err();
        assert!(err.to_string().contains("B[1][1]"));
    }

    #[test]
    fn signals_are_deterministic_and_near_truth_for_tiny_noise() {
        let g = GameSpec::new(DMatrix::zeros(4, 4), 1.0, DVector::from_element(4, 1e-12), 3.0).unwrap();
        let x = g.draw_signals(17);
        assert_eq!(x, g.draw_signals(17));
        assert!(x.stacked().iter().all(|xi| (xi - 3.0).abs() < 1e-4));
    }

    #[test]
    fn signal_sample_mean_matches_truth() {
        let n = 100_000;
        let g = GameSpec::new(DMatrix::zeros(1, 1), 1.0, DVector::from_element(1, 4.0), 12.0).unwrap();
        let mean = (0..n as u64).map(|s| g.draw_signals(s).stacked()[0]).sum::<f64>() / n as f64;
        let bound = 3.0 * 2.0 / (n as f64).sqrt();
        assert!((mean - 12.0).abs() < bound, "mean {mean}");
    }

    #[test]
    fn vector_signals_layout_is_component_major() {
        let theta = DVector::from_vec(vec![10.0, 20.0]);
        let spec = coordination_spec(0.5, vec![DMatrix::identity(2, 2) * 1e-14; 3], 3, theta).unwrap();
        let x = spec.draw_signals(1);
        for i in 0..3 {
            assert!((x.stacked()[i] - 10.0).abs() < 1e-5);
            assert!((x.stacked()[3 + i] - 20.0).abs() < 1e-5);
            assert!((x.own(i)[1] - 20.0).abs() < 1e-5);
        }
    }
}
