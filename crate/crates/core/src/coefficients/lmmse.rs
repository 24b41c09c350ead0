//! One linear-MMSE update of an agent's weights and error covariances after
//! observing its neighbors' actions.

use nalgebra::DMatrix;

use super::CoefficientState;
use crate::error::SolveError;
use crate::linalg::Svd;

/// Innovation variances below this fraction of the reference scale get
/// zero gain.
pub const INNOVATION_CUTOFF: f64 = 1e-11;

/// Gains of one update.
#[derive(Debug, Clone)]
pub struct Gains {
    /// `K_x = M_xx H S⁺`, `Nm × md`.
    pub state: DMatrix<f64>,
    /// `K_θ = M_θx H S⁺`, `m × md`.
    pub theta: DMatrix<f64>,
    /// Numerical rank of the innovation covariance `S = Hᵀ M_xx H`.
    pub innovation_rank: usize,
}

/// Observation matrix of an agent: `Hᵀ` stacks the action weights `U_j L_j`
/// of its neighbors in ascending order, so `Hᵀ x` is the vector of observed
/// actions.
pub fn build_observation_matrix(neighbors: &[usize], weights: &[DMatrix<f64>]) -> DMatrix<f64> {
    let dim = weights.first().map_or(0, |w| w.ncols());
    let m = weights.first().map_or(0, |w| w.nrows());
    let mut h_t = DMatrix::zeros(m * neighbors.len(), dim);
    for (slot, &j) in neighbors.iter().enumerate() {
        h_t.view_mut((slot * m, 0), (m, dim)).copy_from(&weights[j]);
    }
    h_t.transpose()
}

/// Gains from the SVD of `Z = G_xᵀ H`, where `G` is the error factor and
/// `S = ZᵀZ`, together with the orthonormal innovation directions `U_k`
/// in factor coordinates.
///
/// Directions with `σ² ≤ 10⁻¹¹ · max(σ_max², ‖H‖_F² · scale)` are
/// discarded, where `scale` is the agent's prior variance scale. An
/// innovation that is pure rounding noise therefore gets zero gain.
fn gains_and_directions(state: &CoefficientState, h: &DMatrix<f64>) -> (Gains, DMatrix<f64>) {
    let m = state.m_thth.nrows();
    let dim = state.l.nrows();
    let g_theta = state.factor.rows(0, m);
    let g_x = state.factor.rows(m, dim);
    let z = g_x.transpose() * h;
    let svd = Svd::new(&z);
    let reference = svd.sigma_max().powi(2).max(h.norm_squared() * state.prior_scale);
    let kept: Vec<usize> = (0..svd.sigma.len())
        .filter(|&j| svd.sigma[j] > 0.0 && svd.sigma[j].powi(2) > INNOVATION_CUTOFF * reference)
        .collect();
    let rank = kept.len();
    let u_k = DMatrix::from_fn(z.nrows(), rank, |r, c| svd.u[(r, kept[c])]);
    // Σ_k⁻¹ V_kᵀ
    let right = DMatrix::from_fn(rank, z.ncols(), |r, c| svd.v[(c, kept[r])] / svd.sigma[kept[r]]);
    let gains = Gains {
        state: g_x * &u_k * &right,
        theta: g_theta * &u_k * right,
        innovation_rank: rank,
    };
    (gains, u_k)
}

/// Gains `K_x = M_xx H S⁺` and `K_θ = M_θx H S⁺` with `S = Hᵀ M_xx H`,
/// computed from the error factor so that `S` is never formed.
pub fn lmmse_gains(state: &CoefficientState, h: &DMatrix<f64>) -> Gains {
    gains_and_directions(state, h).0
}

/// `L' = L + K_x (Hᵀ − Hᵀ L)` and `Q' = Q + K_θ (Hᵀ − Hᵀ L)`.
pub fn propagate_weights(state: &CoefficientState, gains: &Gains, h: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let h_t = h.transpose();
    let surprise = &h_t - &h_t * &state.l;
    let l = &state.l + &gains.state * &surprise;
    let q = &state.q + &gains.theta * surprise;
    (l, q)
}

/// Posterior error factor `G' = G (I − U_k U_kᵀ)`. Its covariance blocks
/// equal `M_xx − K_x Hᵀ M_xx`, `M_θθ − K_θ Hᵀ M_xθ` and
/// `M_θx − K_θ Hᵀ M_xx`.
pub fn propagate_factor(
    state: &CoefficientState,
    directions: &DMatrix<f64>,
    agent: usize,
    step: usize,
) -> Result<DMatrix<f64>, SolveError> {
    let projected = &state.factor * directions;
    let factor = &state.factor - projected * directions.transpose();
    if factor.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::Numerical {
            agent,
            step,
            reason: "error factor has non-finite entries".into(),
        });
    }
    Ok(factor)
}

/// Full update of one agent's state.
pub fn update_state(
    state: &CoefficientState,
    h: &DMatrix<f64>,
    agent: usize,
    step: usize,
) -> Result<(CoefficientState, Gains), SolveError> {
    let (gains, directions) = gains_and_directions(state, h);
    let (l, q) = propagate_weights(state, &gains, h);
    let factor = propagate_factor(state, &directions, agent, step)?;
    let next = CoefficientState::from_factor(l, q, factor, state.m_thth.nrows(), state.prior_scale);
    Ok((next, gains))
}
