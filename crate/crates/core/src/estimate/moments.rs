//! Lagged cross-product sums that make ICLS sweeps independent of `T`.

use crate::error::Result;
use crate::linalg::{RealMatrix, RealVector};
use crate::process::ModelParams;

/// `S_{kl} = Σ_t vec(Y_{t-k}) vec(Y_{t-l})ᵀ` and `s_k = Σ_t vec(Y_{t-k})` over
/// the responses `t = p+1..T`, for `k, l = 0..=p`.
#[derive(Debug, Clone)]
pub struct LagMoments {
    m: usize,
    n: usize,
    p: usize,
    count: usize,
    stacked: RealMatrix,
    sums: RealVector,
}

impl LagMoments {
    pub fn new(obs: &[RealMatrix], p: usize) -> Result<Self> {
        let (m, n) = super::check_fit_input(obs, p)?;
        let d = m * n;
        let width = (p + 1) * d;
        let mut stacked = RealMatrix::zeros(width, width);
        let mut sums = RealVector::zeros(width);
        let mut z = RealVector::zeros(width);
        for t in p..obs.len() {
            for k in 0..=p {
                z.rows_mut(k * d, d).copy_from_slice(obs[t - k].as_slice());
            }
            stacked.ger(1.0, &z, &z, 1.0);
            sums += &z;
        }
        Ok(LagMoments {
            m,
            n,
            p,
            count: obs.len() - p,
            stacked,
            sums,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of responses `T - p`.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn cross(&self, k: usize, l: usize) -> RealMatrix {
        let d = self.m * self.n;
        self.stacked.view((k * d, l * d), (d, d)).into_owned()
    }

    /// `Σ_t Y_{t-k}` as an `m x n` matrix.
    pub fn sum(&self, k: usize) -> RealMatrix {
        let d = self.m * self.n;
        RealMatrix::from_column_slice(self.m, self.n, self.sums.rows(k * d, d).as_slice())
    }

    /// `Σ_t Y_{t-k} D Y_{t-l}ᵀ` for an `n x n` matrix `D`.
    pub(crate) fn contract_rows(&self, k: usize, l: usize, dmat: &RealMatrix) -> RealMatrix {
        let (m, n) = (self.m, self.n);
        let (r0, c0) = (k * m * n, l * m * n);
        RealMatrix::from_fn(m, m, |i, j| {
            let mut acc = 0.0;
            for b in 0..n {
                for a in 0..n {
                    acc += dmat[(a, b)] * self.stacked[(r0 + i + a * m, c0 + j + b * m)];
                }
            }
            acc
        })
    }

    /// `Σ_t Y_{t-k}ᵀ E Y_{t-l}` for an `m x m` matrix `E`.
    pub(crate) fn contract_cols(&self, k: usize, l: usize, emat: &RealMatrix) -> RealMatrix {
        let (m, n) = (self.m, self.n);
        let (r0, c0) = (k * m * n, l * m * n);
        RealMatrix::from_fn(n, n, |a, b| {
            let mut acc = 0.0;
            for j in 0..m {
                for i in 0..m {
                    acc += emat[(i, j)] * self.stacked[(r0 + i + a * m, c0 + j + b * m)];
                }
            }
            acc
        })
    }

    /// Least-squares criterion `Σ_t ‖Y_t - Σ_l A_l Y_{t-l} B_lᵀ - Λ‖_F²`.
    pub fn rss(&self, params: &ModelParams) -> f64 {
        let d = self.m * self.n;
        let width = (self.p + 1) * d;
        // residual r_t = W z_t - λ with W = [I, -Φ_1, …, -Φ_p]
        let mut w = RealMatrix::zeros(d, width);
        w.view_mut((0, 0), (d, d)).fill_with_identity();
        for (l, phi) in params.phis().iter().enumerate() {
            w.view_mut((0, (l + 1) * d), (d, d)).copy_from(&(-phi));
        }
        let lam = RealVector::from_column_slice(params.lambda().as_slice());
        let ws = &w * &self.stacked;
        let quad = ws.component_mul(&w).sum();
        let lin = lam.dot(&(&w * &self.sums));
        (quad - 2.0 * lin + self.count as f64 * lam.norm_squared()).max(0.0)
    }
}
