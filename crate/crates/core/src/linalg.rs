//! Small dense linear-algebra helpers shared by the recursions and the oracle.

use nalgebra::{DMatrix, DVector};

/// Relative cutoff below which singular values (or eigenvalues of a PSD
/// matrix) are treated as zero.
pub const RELATIVE_CUTOFF: f64 = 1e-10;

/// Replaces `m` by `(m + mᵀ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Smallest eigenvalue of a symmetric matrix (`+inf` for an empty matrix).
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    m.clone().symmetric_eigenvalues().min()
}

/// Largest absolute asymmetry `|m_ij - m_ji|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Max-abs entry of a matrix.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Max-abs entrywise difference between two equally shaped matrices.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_abs_diff");
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Moore-Penrose pseudo-inverse through the SVD with the relative cutoff.
pub fn pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    pinv_with_rank(a).0
}

/// [`pinv`] together with the numerical rank of `a`.
pub fn pinv_with_rank(a: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return (DMatrix::zeros(cols, rows), 0);
    }
    let svd = Svd::new(a);
    let cutoff = RELATIVE_CUTOFF * svd.sigma_max();
    let mut out = DMatrix::zeros(cols, rows);
    let mut rank = 0;
    for (k, &sigma) in svd.sigma.iter().enumerate() {
        if sigma > cutoff && sigma > 0.0 {
            rank += 1;
            out += (svd.v.column(k) * svd.u.column(k).transpose()) / sigma;
        }
    }
    (out, rank)
}

/// Thin singular value decomposition `a = U diag(σ) Vᵀ` by one-sided
/// Jacobi rotations. Singular values come out unsorted.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl Svd {
    const MAX_SWEEPS: usize = 80;

    pub fn new(a: &DMatrix<f64>) -> Self {
        if a.nrows() < a.ncols() {
            let t = Svd::new(&a.transpose());
            return Svd {
                u: t.v,
                sigma: t.sigma,
                v: t.u,
            };
        }
        let (rows, n) = a.shape();
        let mut w = a.clone();
        let mut v = DMatrix::<f64>::identity(n, n);
        let tol = f64::EPSILON * rows.max(1) as f64;
        // Columns below this squared norm are zero to working precision.
        let negligible = (f64::EPSILON * a.norm()).powi(2);
        for _ in 0..Self::MAX_SWEEPS {
            let mut rotated = false;
            for p in 0..n {
                for q in (p + 1)..n {
                    let alpha = w.column(p).norm_squared();
                    let beta = w.column(q).norm_squared();
                    if alpha <= negligible || beta <= negligible {
                        continue;
                    }
                    let gamma = w.column(p).dot(&w.column(q));
                    if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    rotate_columns(&mut w, p, q, c, s);
                    rotate_columns(&mut v, p, q, c, s);
                }
            }
            if !rotated {
                break;
            }
        }
        let sigma = DVector::from_fn(n, |j, _| w.column(j).norm());
        let mut u = w;
        for j in 0..n {
            if sigma[j] > 0.0 {
                u.column_mut(j).unscale_mut(sigma[j]);
            }
        }
        Svd { u, sigma, v }
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma.iter().fold(0.0_f64, |acc, s| acc.max(*s))
    }
}

fn rotate_columns(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for r in 0..m.nrows() {
        let mp = m[(r, p)];
        let mq = m[(r, q)];
        m[(r, p)] = c * mp - s * mq;
        m[(r, q)] = s * mp + c * mq;
    }
}

/// Result of a minimum-norm least-squares solve.
#[derive(Debug, Clone)]
pub struct MinNormSolution {
    pub x: DVector<f64>,
    /// Whether the smallest singular value fell under the relative cutoff.
    pub singular: bool,
    pub rank: usize,
}

/// Minimum-Euclidean-norm least-squares solution of `a x = b`.
///
/// For a nonsingular `a` this is the unique solution.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> MinNormSolution {
    let n = a.ncols();
    if a.nrows() == 0 || n == 0 {
        return MinNormSolution {
            x: DVector::zeros(n),
            singular: n > 0,
            rank: 0,
        };
    }
    let svd = Svd::new(a);
    let cutoff = RELATIVE_CUTOFF * svd.sigma_max();
    let mut x = DVector::zeros(n);
    let mut rank = 0;
    for (k, &sigma) in svd.sigma.iter().enumerate() {
        if sigma > cutoff && sigma > 0.0 {
            rank += 1;
            let coef = svd.u.column(k).dot(b) / sigma;
            x.axpy(coef, &svd.v.column(k), 1.0);
        }
    }
    MinNormSolution {
        x,
        singular: rank < n.min(a.nrows()) || a.nrows() != n,
        rank,
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone)]
pub struct IterativeSolution {
    pub x: DVector<f64>,
    pub relative_residual: f64,
    pub iterations: usize,
}

/// Restarted GMRES for a square operator given only through `apply`.
///
/// Starts from zero. Stops once `‖b - A x‖ ≤ tol ‖b‖` or after `max_iter`
/// Arnoldi steps in total.
pub fn gmres<F>(apply: F, b: &DVector<f64>, tol: f64, restart: usize, max_iter: usize) -> IterativeSolution
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = b.len();
    let b_norm = b.norm();
    let mut x = DVector::zeros(n);
    if b_norm == 0.0 {
        return IterativeSolution {
            x,
            relative_residual: 0.0,
            iterations: 0,
        };
    }
    let restart = restart.max(1).min(n.max(1));
    let mut total = 0;
    loop {
        let r = b - apply(&x);
        let beta = r.norm();
        if beta <= tol * b_norm || total >= max_iter {
            return IterativeSolution {
                x,
                relative_residual: beta / b_norm,
                iterations: total,
            };
        }
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(restart + 1);
        basis.push(r / beta);
        // Hessenberg matrix stored column by column, reduced on the fly
        // with Givens rotations.
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(restart);
        let mut cs: Vec<f64> = Vec::with_capacity(restart);
        let mut sn: Vec<f64> = Vec::with_capacity(restart);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k_done = 0;
        for k in 0..restart {
            total += 1;
            let mut w = apply(&basis[k]);
            let mut col = vec![0.0; k + 2];
            // Modified Gram-Schmidt, twice for stability.
            for _ in 0..2 {
                for (j, q) in basis.iter().enumerate() {
                    let proj = q.dot(&w);
                    col[j] += proj;
                    w.axpy(-proj, q, 1.0);
                }
            }
            let w_norm = w.norm();
            col[k + 1] = w_norm;
            for j in 0..k {
                let tmp = cs[j] * col[j] + sn[j] * col[j + 1];
                col[j + 1] = -sn[j] * col[j] + cs[j] * col[j + 1];
                col[j] = tmp;
            }
            let denom = col[k].hypot(col[k + 1]);
            let (c, s) = if denom == 0.0 {
                (1.0, 0.0)
            } else {
                (col[k] / denom, col[k + 1] / denom)
            };
            cs.push(c);
            sn.push(s);
            col[k] = c * col[k] + s * col[k + 1];
            col[k + 1] = 0.0;
            g[k + 1] = -s * g[k];
            g[k] *= c;
            h.push(col);
            k_done = k + 1;
            let breakdown = w_norm <= f64::EPSILON * beta;
            if g[k + 1].abs() <= tol * b_norm || total >= max_iter || breakdown {
                break;
            }
            basis.push(w / w_norm);
        }
        // Back substitution on the triangular system.
        let mut y = vec![0.0; k_done];
        for i in (0..k_done).rev() {
            let mut acc = g[i];
            for j in (i + 1)..k_done {
                acc -= h[j][i] * y[j];
            }
            y[i] = if h[i][i] == 0.0 { 0.0 } else { acc / h[i][i] };
        }
        for (j, yj) in y.iter().enumerate() {
            x.axpy(*yj, &basis[j], 1.0);
        }
    }
}
