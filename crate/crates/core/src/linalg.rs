//! Dense matrix primitives and the structural operators used throughout the
//! crate: column-stacking vectorisation, Kronecker products, the block
//! rearrangement used for nearest-Kronecker-product problems, the
//! covariance transformation permutation, companion matrices, spectral
//! radius and the leading singular triplet.
//!
//! Matrices are `nalgebra::DMatrix<f64>`, which is stored column-major, so
//! `vec` is a plain copy of the storage.

use nalgebra::{DMatrix, DVector};

use crate::error::{MatinarError, Result};

pub type RealMatrix = DMatrix<f64>;
pub type RealVector = DVector<f64>;

/// Iteration cap shared by the power iterations in this module.
pub const POWER_ITER_CAP: usize = 10_000;
/// Default convergence tolerance for the power iterations.
pub const POWER_ITER_TOL: f64 = 1e-12;

/// Stacks the columns of `m` into a single vector.
pub fn vec(m: &RealMatrix) -> RealVector {
    RealVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(v: &[f64], rows: usize, cols: usize) -> Result<RealMatrix> {
    if v.len() != rows * cols {
        return Err(MatinarError::Dimension(format!(
            "cannot reshape vector of length {} into {}x{}",
            v.len(),
            rows,
            cols
        )));
    }
    Ok(RealMatrix::from_column_slice(rows, cols, v))
}

/// Kronecker product `b ⊗ a`.
pub fn kron(b: &RealMatrix, a: &RealMatrix) -> RealMatrix {
    b.kronecker(a)
}

/// Rearranges an `mn x mn` matrix into an `m² x n²` matrix whose column
/// `j*n + i` (0-based) is the vectorised `m x m` block at block-row `i`,
/// block-column `j`. For a Kronecker product this gives
/// `rearrange(B ⊗ A) = vec(A) vec(B)ᵀ`.
pub fn rearrange(phi: &RealMatrix, m: usize, n: usize) -> Result<RealMatrix> {
    let d = m * n;
    if phi.nrows() != d || phi.ncols() != d {
        return Err(MatinarError::Dimension(format!(
            "rearrange expects a {d}x{d} matrix, got {}x{}",
            phi.nrows(),
            phi.ncols()
        )));
    }
    let mut out = RealMatrix::zeros(m * m, n * n);
    for j in 0..n {
        for i in 0..n {
            let c = j * n + i;
            for q in 0..m {
                for r in 0..m {
                    out[(q * m + r, c)] = phi[(i * m + r, j * m + q)];
                }
            }
        }
    }
    Ok(out)
}

/// Inverse of [`rearrange`]: maps an `m² x n²` matrix back to `mn x mn`.
pub fn unrearrange(tilde: &RealMatrix, m: usize, n: usize) -> Result<RealMatrix> {
    if tilde.nrows() != m * m || tilde.ncols() != n * n {
        return Err(MatinarError::Dimension(format!(
            "unrearrange expects a {}x{} matrix, got {}x{}",
            m * m,
            n * n,
            tilde.nrows(),
            tilde.ncols()
        )));
    }
    let mut out = RealMatrix::zeros(m * n, m * n);
    for j in 0..n {
        for i in 0..n {
            let c = j * n + i;
            for q in 0..m {
                for r in 0..m {
                    out[(i * m + r, j * m + q)] = tilde[(q * m + r, c)];
                }
            }
        }
    }
    Ok(out)
}

/// The `mn x mn` permutation that turns the Kronecker-arranged
/// autocovariance into column-wise (`T Γ`) or row-wise (`Γ T`) blocks.
///
/// In 1-based indices, `t[i, j] = 1` iff `i ∈ {sm+1, …, (s+1)m}` and
/// `j = (s+1) + (i - sm - 1) n` for `s = ⌊(i-1)/m⌋`.
pub fn transformation_matrix(m: usize, n: usize) -> RealMatrix {
    let d = m * n;
    let mut t = RealMatrix::zeros(d, d);
    for i in 1..=d {
        let s = (i - 1) / m;
        let j = (s + 1) + (i - s * m - 1) * n;
        t[(i - 1, j - 1)] = 1.0;
    }
    t
}

/// Block companion matrix with first block-row `phis[0], …, phis[p-1]` and
/// identity blocks on the block sub-diagonal.
pub fn companion(phis: &[RealMatrix]) -> Result<RealMatrix> {
    let p = phis.len();
    if p == 0 {
        return Err(MatinarError::InvalidParameter(
            "companion matrix needs at least one block".into(),
        ));
    }
    let d = phis[0].nrows();
    if phis.iter().any(|b| b.nrows() != d || b.ncols() != d) {
        return Err(MatinarError::Dimension(
            "companion blocks must be square and of equal size".into(),
        ));
    }
    let mut c = RealMatrix::zeros(d * p, d * p);
    for (j, block) in phis.iter().enumerate() {
        c.view_mut((0, j * d), (d, d)).copy_from(block);
    }
    for i in 1..p {
        c.view_mut((i * d, (i - 1) * d), (d, d))
            .fill_with_identity();
    }
    Ok(c)
}

/// Spectral radius of a square matrix.
///
/// Entrywise nonnegative matrices use power iteration on `M + I`, whose
/// dominant eigenvalue is `ρ(M) + 1` and strictly dominant in modulus even
/// when `M` is periodic. Anything else, or a power iteration that hits the
/// cap, goes through a dense Schur decomposition.
pub fn spectral_radius(m: &RealMatrix, tol: f64) -> Result<f64> {
    if !m.is_square() {
        return Err(MatinarError::Dimension(format!(
            "spectral radius of a non-square {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    if m.iter().all(|&x| x >= 0.0) {
        // A nonnegative matrix is nilpotent exactly when its support graph
        // has no cycle; power iteration would crawl on that Jordan structure.
        if support_is_acyclic(m) {
            return Ok(0.0);
        }
        if let Some(r) = perron_root(m, tol) {
            return Ok(r);
        }
    }
    dense_spectral_radius(m)
}

fn support_is_acyclic(m: &RealMatrix) -> bool {
    let d = m.nrows();
    let mut indegree: Vec<usize> = (0..d)
        .map(|j| (0..d).filter(|&i| m[(i, j)] != 0.0).count())
        .collect();
    let mut ready: Vec<usize> = (0..d).filter(|&j| indegree[j] == 0).collect();
    let mut removed = 0;
    while let Some(i) = ready.pop() {
        removed += 1;
        for j in 0..d {
            if m[(i, j)] != 0.0 {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.push(j);
                }
            }
        }
    }
    removed == d
}

fn perron_root(m: &RealMatrix, tol: f64) -> Option<f64> {
    let d = m.nrows();
    let mut x = RealVector::from_element(d, 1.0 / (d as f64).sqrt());
    let mut lambda = f64::NAN;
    for _ in 0..POWER_ITER_CAP {
        let mut y = m * &x;
        y += &x;
        let norm = y.norm();
        if !norm.is_finite() {
            return None;
        }
        y /= norm;
        let converged = (norm - lambda).abs() <= tol * norm && (&y - &x).norm() <= tol;
        lambda = norm;
        x = y;
        if converged {
            return Some((lambda - 1.0).max(0.0));
        }
    }
    None
}

/// Maximum eigenvalue modulus via a real Schur decomposition.
pub fn dense_spectral_radius(m: &RealMatrix) -> Result<f64> {
    let schur =
        m.clone()
            .try_schur(f64::EPSILON, 100_000)
            .ok_or_else(|| MatinarError::NoConvergence {
                iterations: 100_000,
                context: "Schur decomposition for spectral radius".into(),
            })?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// Leading singular triplet: `sigma * u * vᵀ` is the best rank-1 Frobenius
/// approximation.
#[derive(Debug, Clone)]
pub struct Rank1Svd {
    pub sigma: f64,
    pub u: RealVector,
    pub v: RealVector,
}

impl Rank1Svd {
    pub fn outer(&self) -> RealMatrix {
        &self.u * self.v.transpose() * self.sigma
    }
}

/// Leading singular triplet by power iteration on `MᵀM`.
///
/// Sign convention: the entries of `u` sum to a nonnegative number; on an
/// exact tie the first nonzero entry of `u` is positive.
pub fn rank1_svd(m: &RealMatrix) -> Result<Rank1Svd> {
    let scale = m.amax();
    if scale == 0.0 || m.is_empty() {
        return Err(MatinarError::ZeroMatrix);
    }
    // Start from the column of MᵀM with the largest norm.
    let gram = m.transpose() * m;
    let start = (0..gram.ncols())
        .max_by(|&a, &b| gram.column(a).norm().total_cmp(&gram.column(b).norm()))
        .unwrap_or(0);
    let mut v: RealVector = gram.column(start).into_owned();
    let vn = v.norm();
    if vn == 0.0 {
        return Err(MatinarError::ZeroMatrix);
    }
    v /= vn;
    for _ in 0..POWER_ITER_CAP {
        let mut w = &gram * &v;
        let wn = w.norm();
        if wn == 0.0 {
            break;
        }
        w /= wn;
        let delta = (&w - &v).norm();
        v = w;
        if delta <= POWER_ITER_TOL {
            break;
        }
    }
    let mut u = m * &v;
    let sigma = u.norm();
    if sigma == 0.0 {
        return Err(MatinarError::ZeroMatrix);
    }
    u /= sigma;
    let sum: f64 = u.iter().sum();
    let tie = sum.abs() <= 1e-14 * u.iter().map(|x| x.abs()).sum::<f64>();
    let flip = if tie {
        u.iter().find(|x| **x != 0.0).is_some_and(|x| *x < 0.0)
    } else {
        sum < 0.0
    };
    if flip {
        u.neg_mut();
        v.neg_mut();
    }
    Ok(Rank1Svd { sigma, u, v })
}

/// Moore–Penrose style solve of `x * g = rhs` for symmetric positive
/// semi-definite `g`, discarding singular values below `rel_cutoff * σ_max`.
/// Returns the solution and whether any singular value was cut.
pub(crate) fn solve_right_psd(
    rhs: &RealMatrix,
    g: &RealMatrix,
    rel_cutoff: f64,
) -> (RealMatrix, bool) {
    if let Some(chol) = g.clone().cholesky() {
        let diag = chol.l_dirty().diagonal();
        let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), &d| {
            (lo.min(d), hi.max(d))
        });
        // Squared ratio of Cholesky diagonals bounds the eigenvalue spread loosely.
        if hi > 0.0 && (lo / hi).powi(2) > 1e3 * rel_cutoff {
            let xt = chol.solve(&rhs.transpose());
            return (xt.transpose(), false);
        }
    }
    let (pinv, cut) = pseudo_inverse(g, rel_cutoff);
    (rhs * pinv, cut)
}

pub(crate) fn pseudo_inverse(g: &RealMatrix, rel_cutoff: f64) -> (RealMatrix, bool) {
    let svd = g.clone().svd(true, true);
    let smax = svd.singular_values.amax();
    let thresh = rel_cutoff * smax;
    let mut cut = false;
    let inv_s: Vec<f64> = svd
        .singular_values
        .iter()
        .map(|&s| {
            if s > thresh && s > 0.0 {
                1.0 / s
            } else {
                cut = true;
                0.0
            }
        })
        .collect();
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    let mut vs = vt.transpose();
    for (j, s) in inv_s.iter().enumerate() {
        vs.column_mut(j).scale_mut(*s);
    }
    (vs * u.transpose(), cut)
}
