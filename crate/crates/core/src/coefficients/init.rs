//! Beliefs at `t = 0`, when agent `i` has seen only its own signal.

use nalgebra::{DMatrix, DVector};

use super::CoefficientState;
use crate::error::GameError;
use crate::game::{GameSpec, QuadraticGame, VectorGameSpec};

/// `ē_i`: all ones except a zero at `i`.
fn ones_except(n: usize, i: usize) -> DVector<f64> {
    DVector::from_fn(n, |j, _| if j == i { 0.0 } else { 1.0 })
}

fn prior_scale(m_xx: &DMatrix<f64>, m_thth: &DMatrix<f64>) -> f64 {
    m_xx.diagonal()
        .iter()
        .chain(m_thth.diagonal().iter())
        .fold(0.0_f64, |acc, v| acc.max(*v))
}

/// Error factor at `t = 0`: the θ error is `−ε_i` and the error on `x_j`
/// is `ε_j − ε_i`, with `ε` scaled to unit variance by `sd(j, k)`.
fn initial_factor(n: usize, m: usize, i: usize, sd: impl Fn(usize, usize) -> f64) -> DMatrix<f64> {
    let dim = n * m;
    let mut g = DMatrix::zeros(m + dim, dim);
    for k in 0..m {
        let own = k * n + i;
        g[(k, own)] = -sd(i, k);
        for j in (0..n).filter(|&j| j != i) {
            g[(m + k * n + j, k * n + j)] = sd(j, k);
            g[(m + k * n + j, own)] = -sd(i, k);
        }
    }
    g
}

/// Scalar initializer:
/// `L = 𝟙e_iᵀ`, `k = e_i`, `M_xx = diag(ē_i) diag(c) + ē_i ē_iᵀ c_i`,
/// `M_θθ = c_i`, `M_θx = c_i ē_iᵀ`.
pub fn init_scalar(spec: &GameSpec) -> Vec<CoefficientState> {
    let n = spec.n_agents();
    let c = spec.noise_var();
    (0..n)
        .map(|i| {
            let e_bar = ones_except(n, i);
            let l = DMatrix::from_fn(n, n, |_, col| if col == i { 1.0 } else { 0.0 });
            let q = DMatrix::from_fn(1, n, |_, col| if col == i { 1.0 } else { 0.0 });
            let m_xx = DMatrix::from_diagonal(&e_bar.component_mul(c)) + &e_bar * e_bar.transpose() * c[i];
            let m_thth = DMatrix::from_element(1, 1, c[i]);
            let m_thx = DMatrix::from_row_slice(1, n, (e_bar * c[i]).as_slice());
            let scale = prior_scale(&m_xx, &m_thth);
            CoefficientState {
                l,
                q,
                m_xx,
                m_thth,
                m_thx,
                factor: initial_factor(n, 1, i, |j, _| c[j].sqrt()),
                prior_scale: scale,
            }
        })
        .collect()
}

/// Vector initializer with component-major signal stacking.
///
/// `L` is block diagonal with `m` copies of `𝟙e_iᵀ`; row `k` of `Q` selects
/// `x_i[k]`; the `k`-th diagonal block of `M_xx` is
/// `diag(ē_i) diag(C_{·}[k,k]) + ē_i ē_iᵀ C_i[k,k]`; `M_θθ = C_i`; and
/// `M_θx = C_i S` with row `k` of `S` equal to `ē_iᵀ` in block `k`.
///
/// Requires every `C_i` to be diagonal.
pub fn init_vector(spec: &VectorGameSpec) -> Result<Vec<CoefficientState>, GameError> {
    if !spec.has_diagonal_noise() {
        return Err(GameError::domain(
            "belief initialization requires diagonal noise covariances",
        ));
    }
    let n = spec.n_agents();
    let m = spec.state_dim();
    let dim = n * m;
    let states = (0..n)
        .map(|i| {
            let e_bar = ones_except(n, i);
            let c_i = spec.noise_cov_block(i);
            let mut l = DMatrix::zeros(dim, dim);
            let mut q = DMatrix::zeros(m, dim);
            let mut selector = DMatrix::zeros(m, dim);
            let mut m_xx = DMatrix::zeros(dim, dim);
            for k in 0..m {
                let off = k * n;
                q[(k, off + i)] = 1.0;
                for row in 0..n {
                    l[(off + row, off + i)] = 1.0;
                    selector[(k, off + row)] = e_bar[row];
                }
                let c_kk = DVector::from_fn(n, |j, _| spec.noise_cov_block(j)[(k, k)]);
                let block =
                    DMatrix::from_diagonal(&e_bar.component_mul(&c_kk)) + &e_bar * e_bar.transpose() * c_i[(k, k)];
                m_xx.view_mut((off, off), (n, n)).copy_from(&block);
            }
            let m_thth = c_i.clone();
            let m_thx = c_i * selector;
            let scale = prior_scale(&m_xx, &m_thth);
            CoefficientState {
                l,
                q,
                m_xx,
                m_thth,
                m_thx,
                factor: initial_factor(n, m, i, |j, k| spec.noise_cov_block(j)[(k, k)].sqrt()),
                prior_scale: scale,
            }
        })
        .collect();
    Ok(states)
}
