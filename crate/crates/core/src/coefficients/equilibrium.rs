//! The linear equilibrium of the stage game at one time step.
//!
//! Agent `i` plays `a_i = U_i L_i x` where `U_i` is `m × Nm`. Stacking the
//! best-response conditions over agents gives the joint system
//!
//! ```text
//! L_iᵀ U_iᵀ − Σ_j L_iᵀ L_jᵀ U_jᵀ B_ijᵀ = Q_iᵀ Dᵀ      for every i,
//! ```
//!
//! which in the scalar case reads `L_t v = δ k_t`.
//!
//! Two routes solve it. The dense route assembles the `N²m² × N²m²` matrix
//! and takes its minimum-norm least-squares solution. The structured route
//! solves for the action weights `W_i = L_iᵀ U_iᵀ` with GMRES, since the
//! weights alone fix every action and observation, and then recovers the
//! minimum-norm `U_iᵀ = L_iᵀ⁺ W_i` agent by agent. When the weights are
//! unique both routes return the same coefficients.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::CoefficientState;
use crate::error::SolveError;
use crate::game::{GameSpec, QuadraticGame};
use crate::linalg::{gmres, min_norm_solve, pinv_with_rank, MinNormSolution};

/// Relative residual above which the system is declared to have no linear
/// equilibrium.
pub const EQUILIBRIUM_TOLERANCE: f64 = 1e-6;

/// Largest number of unknowns the automatic choice hands to the dense route.
pub const DENSE_UNKNOWN_LIMIT: usize = 400;

const GMRES_TOL: f64 = 1e-14;
const GMRES_RESTART: usize = 120;
const GMRES_MAX_ITER: usize = 4000;

/// Which route to use for the equilibrium system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// Dense below [`DENSE_UNKNOWN_LIMIT`] unknowns, structured above.
    #[default]
    Auto,
    Dense,
    Structured,
}

impl SolveMethod {
    fn resolve(self, unknowns: usize) -> SolveMethod {
        match self {
            SolveMethod::Auto if unknowns <= DENSE_UNKNOWN_LIMIT => SolveMethod::Dense,
            SolveMethod::Auto => SolveMethod::Structured,
            other => other,
        }
    }
}

/// Action coefficients of every agent at one step.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    /// `U_i`, each `m × Nm`. In the scalar case row 0 is `v_iᵀ`.
    pub coeffs: Vec<DMatrix<f64>>,
    /// The system matrix (dense route) or some `L_iᵀ` (structured route)
    /// was numerically rank deficient.
    pub singular: bool,
    /// Max-abs residual of the joint system at the returned coefficients.
    pub residual: f64,
    pub method: SolveMethod,
}

/// Scalar system `L_t v = δ k_t`: diagonal blocks `L_iᵀ`, off-diagonal
/// blocks `−β_ij L_iᵀ L_jᵀ`.
pub fn assemble_system(spec: &GameSpec, states: &[CoefficientState]) -> (DMatrix<f64>, DVector<f64>) {
    let n = spec.n_agents();
    let beta = spec.beta();
    let mut big = DMatrix::zeros(n * n, n * n);
    let mut k_t = DVector::zeros(n * n);
    for i in 0..n {
        let l_i_t = states[i].l.transpose();
        for j in 0..n {
            let block = if i == j {
                l_i_t.clone()
            } else if beta[(i, j)] == 0.0 {
                continue;
            } else {
                &l_i_t * states[j].l.transpose() * (-beta[(i, j)])
            };
            big.view_mut((i * n, j * n), (n, n)).copy_from(&block);
        }
        k_t.rows_mut(i * n, n).copy_from(&states[i].q.row(0).transpose());
    }
    (big, k_t)
}

/// Vector system in Kronecker form. The unknown is the concatenation of
/// `vec(U_iᵀ)` (column-major); block `(i, i)` is `I_m ⊗ L_iᵀ` and block
/// `(i, j)` is `−B_ij ⊗ L_iᵀ L_jᵀ`. The right-hand side stacks
/// `vec(Q_iᵀ Dᵀ)`.
pub fn assemble_vector_system<G: QuadraticGame + ?Sized>(
    game: &G,
    states: &[CoefficientState],
) -> (DMatrix<f64>, DVector<f64>) {
    let n = game.n_agents();
    let m = game.state_dim();
    let dim = n * m;
    let block = dim * m;
    let d = game.state_weight();
    let mut big = DMatrix::zeros(n * block, n * block);
    let mut rhs = DVector::zeros(n * block);
    for i in 0..n {
        let l_i_t = states[i].l.transpose();
        for j in 0..n {
            let piece = if i == j {
                DMatrix::<f64>::identity(m, m).kronecker(&l_i_t)
            } else {
                let b_ij = game.coupling(i, j);
                if b_ij.iter().all(|v| *v == 0.0) {
                    continue;
                }
                -b_ij.kronecker(&(&l_i_t * states[j].l.transpose()))
            };
            big.view_mut((i * block, j * block), (block, block)).copy_from(&piece);
        }
        let target = states[i].q.transpose() * d.transpose();
        rhs.rows_mut(i * block, block).copy_from_slice(target.as_slice());
    }
    (big, rhs)
}

/// Minimum-norm solution of the scalar system `L_t v = δ k_t`.
///
/// Fails with [`SolveError::NoEquilibrium`] when the least-squares residual
/// exceeds `10⁻⁶ ‖δ k_t‖`.
pub fn solve_action_coeffs(
    l_t: &DMatrix<f64>,
    k_t: &DVector<f64>,
    delta: f64,
    step: usize,
) -> Result<MinNormSolution, SolveError> {
    solve_dense_system(l_t, &(k_t * delta), step)
}

/// Minimum-norm solution of an assembled system (scalar or Kronecker form).
pub fn solve_dense_system(a: &DMatrix<f64>, rhs: &DVector<f64>, step: usize) -> Result<MinNormSolution, SolveError> {
    if a.nrows() != rhs.len() {
        return Err(SolveError::Shape(format!(
            "system has {} rows but right-hand side has {}",
            a.nrows(),
            rhs.len()
        )));
    }
    let sol = min_norm_solve(a, rhs);
    let residual = (a * &sol.x - rhs).norm();
    let tolerance = EQUILIBRIUM_TOLERANCE * rhs.norm();
    if residual > tolerance {
        return Err(SolveError::NoEquilibrium {
            step,
            residual,
            tolerance,
        });
    }
    Ok(sol)
}

/// Splits a stacked `vec(U_iᵀ)` solution into the per-agent `U_i`.
pub fn unstack_coeffs(v: &DVector<f64>, n: usize, m: usize) -> Vec<DMatrix<f64>> {
    let dim = n * m;
    let block = dim * m;
    (0..n)
        .map(|i| DMatrix::from_column_slice(dim, m, &v.as_slice()[i * block..(i + 1) * block]).transpose())
        .collect()
}

/// Action weights `W_iᵀ = U_i L_i`: agent `i` plays `W_iᵀ x`.
pub fn action_weights(states: &[CoefficientState], coeffs: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    coeffs.iter().zip(states).map(|(u, s)| u * &s.l).collect()
}

fn coupling_table<G: QuadraticGame + ?Sized>(game: &G) -> Vec<Vec<Option<DMatrix<f64>>>> {
    let n = game.n_agents();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let b = game.coupling(i, j);
                    (i != j && b.iter().any(|v| *v != 0.0)).then(|| b.transpose())
                })
                .collect()
        })
        .collect()
}

/// `Σ_j W_j B_ijᵀ` for every `i`, with `W_j` given as `Nm × m` blocks.
fn mix(weights: &[DMatrix<f64>], couplings_t: &[Vec<Option<DMatrix<f64>>>]) -> Vec<DMatrix<f64>> {
    let (dim, m) = weights[0].shape();
    couplings_t
        .iter()
        .map(|row| {
            let mut acc = DMatrix::zeros(dim, m);
            for (w_j, b_t) in weights.iter().zip(row) {
                if let Some(b_t) = b_t {
                    acc.gemm(1.0, w_j, b_t, 1.0);
                }
            }
            acc
        })
        .collect()
}

/// Max-abs residual of the joint system at coefficients `U_i`.
pub fn equilibrium_residual<G: QuadraticGame + ?Sized>(
    game: &G,
    states: &[CoefficientState],
    coeffs: &[DMatrix<f64>],
) -> f64 {
    let d_t = game.state_weight().transpose();
    let weights: Vec<DMatrix<f64>> = coeffs
        .iter()
        .zip(states)
        .map(|(u, s)| s.l.transpose() * u.transpose())
        .collect();
    let mixed = mix(&weights, &coupling_table(game));
    let mut worst = 0.0_f64;
    for i in 0..states.len() {
        let l_i_t = states[i].l.transpose();
        let r = &weights[i] - &l_i_t * &mixed[i] - states[i].q.transpose() * &d_t;
        worst = worst.max(r.amax());
    }
    worst
}

/// Structured route: GMRES on `W_i − L_iᵀ Σ_j W_j B_ijᵀ = Q_iᵀ Dᵀ`, then
/// `U_iᵀ = L_iᵀ⁺ W_i`.
pub fn solve_structured<G: QuadraticGame + ?Sized>(
    game: &G,
    states: &[CoefficientState],
    step: usize,
) -> Result<Equilibrium, SolveError> {
    let n = game.n_agents();
    let m = game.state_dim();
    let dim = n * m;
    let block = dim * m;
    let couplings_t = coupling_table(game);
    let l_t: Vec<DMatrix<f64>> = states.iter().map(|s| s.l.transpose()).collect();
    let d_t = game.state_weight().transpose();

    let split = |v: &DVector<f64>| -> Vec<DMatrix<f64>> {
        (0..n)
            .map(|i| DMatrix::from_column_slice(dim, m, &v.as_slice()[i * block..(i + 1) * block]))
            .collect()
    };
    let apply = |v: &DVector<f64>| -> DVector<f64> {
        let w = split(v);
        let mixed = mix(&w, &couplings_t);
        let mut out = DVector::zeros(n * block);
        for i in 0..n {
            let r = &w[i] - &l_t[i] * &mixed[i];
            out.rows_mut(i * block, block).copy_from_slice(r.as_slice());
        }
        out
    };
    let mut rhs = DVector::zeros(n * block);
    for i in 0..n {
        let target = states[i].q.transpose() * &d_t;
        rhs.rows_mut(i * block, block).copy_from_slice(target.as_slice());
    }

    let sol = gmres(apply, &rhs, GMRES_TOL, GMRES_RESTART, GMRES_MAX_ITER);
    let weights = split(&sol.x);
    let mut singular = false;
    let coeffs: Vec<DMatrix<f64>> = weights
        .iter()
        .zip(&l_t)
        .map(|(w, l)| {
            let (inv, rank) = pinv_with_rank(l);
            singular |= rank < dim;
            (inv * w).transpose()
        })
        .collect();
    let residual = equilibrium_residual(game, states, &coeffs);
    check_residual(residual, &rhs, step)?;
    Ok(Equilibrium {
        coeffs,
        singular,
        residual,
        method: SolveMethod::Structured,
    })
}

fn check_residual(residual_max: f64, rhs: &DVector<f64>, step: usize) -> Result<(), SolveError> {
    let tolerance = EQUILIBRIUM_TOLERANCE * rhs.norm();
    if residual_max > tolerance || !residual_max.is_finite() {
        return Err(SolveError::NoEquilibrium {
            step,
            residual: residual_max,
            tolerance,
        });
    }
    Ok(())
}

/// Dense route for any game through the Kronecker assembly.
pub fn solve_dense<G: QuadraticGame + ?Sized>(
    game: &G,
    states: &[CoefficientState],
    step: usize,
) -> Result<Equilibrium, SolveError> {
    let (a, rhs) = assemble_vector_system(game, states);
    let sol = solve_dense_system(&a, &rhs, step)?;
    let coeffs = unstack_coeffs(&sol.x, game.n_agents(), game.state_dim());
    let residual = equilibrium_residual(game, states, &coeffs);
    Ok(Equilibrium {
        coeffs,
        singular: sol.singular,
        residual,
        method: SolveMethod::Dense,
    })
}

/// Solves the step-`step` equilibrium with the requested route.
pub fn solve_equilibrium<G: QuadraticGame + ?Sized>(
    game: &G,
    states: &[CoefficientState],
    method: SolveMethod,
    step: usize,
) -> Result<Equilibrium, SolveError> {
    let n = game.n_agents();
    let m = game.state_dim();
    if states.len() != n {
        return Err(SolveError::Shape(format!(
            "expected {n} agent states, got {}",
            states.len()
        )));
    }
    match method.resolve(n * n * m * m) {
        SolveMethod::Dense => solve_dense(game, states, step),
        _ => solve_structured(game, states, step),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::init::{init_scalar, init_vector};
    use crate::game::{coordination_spec, cournot_spec};
    use crate::linalg::max_abs_diff;

    #[test]
    fn initial_cournot_coefficients_play_own_signal_share() {
        // At t = 0 agent i predicts every signal by x_i, so with a_j = w x_j
        // the best response a_i = ½ x_i − ½ Σ_{j≠i} w x_i forces w = 1/(N+1).
        let spec = cournot_spec(12.0, 0.0, vec![1.0; 3], 3).unwrap();
        let states = init_scalar(&spec);
        let eq = solve_equilibrium(&spec, &states, SolveMethod::Dense, 0).unwrap();
        let weights = action_weights(&states, &eq.coeffs);
        for (i, w) in weights.iter().enumerate() {
            for j in 0..3 {
                let expected = if i == j { 0.25 } else { 0.0 };
                assert!(
                    (w[(0, j)] - expected).abs() < 1e-12,
                    "agent {i} weight {j}: {}",
                    w[(0, j)]
                );
            }
        }
        assert!(eq.singular);
        assert!(eq.residual < 1e-12);
    }

    #[test]
    fn scalar_assembly_matches_kronecker_assembly() {
        let spec = cournot_spec(5.0, 1.0, vec![1.0, 2.0, 0.5, 3.0], 4).unwrap();
        let states = init_scalar(&spec);
        let (a, k) = assemble_system(&spec, &states);
        let (b, rhs) = assemble_vector_system(&spec, &states);
        assert_eq!(max_abs_diff(&a, &b), 0.0);
        assert!((k * spec.delta() - rhs).amax() < 1e-15);
    }

    #[test]
    fn routes_agree_on_vector_game() {
        let spec = coordination_spec(
            0.4,
            vec![DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0])); 3],
            3,
            DVector::from_vec(vec![1.0, -1.0]),
        )
        .unwrap();
        let states = init_vector(&spec).unwrap();
        let dense = solve_equilibrium(&spec, &states, SolveMethod::Dense, 0).unwrap();
        let structured = solve_equilibrium(&spec, &states, SolveMethod::Structured, 0).unwrap();
        for (a, b) in dense.coeffs.iter().zip(&structured.coeffs) {
            assert!(max_abs_diff(a, b) < 1e-10);
        }
    }

    #[test]
    fn inconsistent_system_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let k = DVector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(
            solve_action_coeffs(&a, &k, 1.0, 3),
            Err(SolveError::NoEquilibrium { step: 3, .. })
        ));
    }

    #[test]
    fn zero_rhs_gives_zero_coefficients() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let k = DVector::from_vec(vec![1.0, 0.0]);
        let sol = solve_action_coeffs(&a, &k, 0.0, 0).unwrap();
        assert_eq!(sol.x.amax(), 0.0);
    }
}
