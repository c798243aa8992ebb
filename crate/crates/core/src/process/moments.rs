//! Empirical second moments of a matrix series in the Kronecker layout and
//! its column-wise / row-wise rearrangements.

use serde::Serialize;

use crate::error::{MatinarError, Result};
use crate::linalg::{transformation_matrix, RealMatrix};

fn check_series(series: &[RealMatrix], h: usize) -> Result<(usize, usize)> {
    let t = series.len();
    if t == 0 || h >= t {
        return Err(MatinarError::SeriesTooShort(format!(
            "lag {h} needs more than {h} observations, got {t}"
        )));
    }
    let shape = series[0].shape();
    if series.iter().any(|y| y.shape() != shape) {
        return Err(MatinarError::Dimension(
            "series matrices differ in shape".into(),
        ));
    }
    Ok(shape)
}

fn centered(series: &[RealMatrix]) -> Vec<RealMatrix> {
    let mut mean = RealMatrix::zeros(series[0].nrows(), series[0].ncols());
    for y in series {
        mean += y;
    }
    mean /= series.len() as f64;
    series.iter().map(|y| y - &mean).collect()
}

/// Sum over the common window of `X_{t+h}[i,j] * X_t[l,k]`, stored at
/// `[i*n + k, j*m + l]`. Products always take the earlier observation
/// first and the window is traversed forward, so lags `h` and `-h` touch
/// identical floating-point sums.
fn lagged_kron_sum(x: &[RealMatrix], h: isize) -> RealMatrix {
    let (m, n) = x[0].shape();
    let d = m * n;
    let lag = h.unsigned_abs();
    let mut out = RealMatrix::zeros(d, d);
    for s in 0..x.len() - lag {
        let (early, late) = (&x[s], &x[s + lag]);
        for j in 0..n {
            for i in 0..m {
                for k in 0..n {
                    for l in 0..m {
                        // lead = Y_{t+h}[i,j], lagged = Y_t[l,k]
                        let v = if h >= 0 {
                            early[(l, k)] * late[(i, j)]
                        } else {
                            early[(i, j)] * late[(l, k)]
                        };
                        out[(i * n + k, j * m + l)] += v;
                    }
                }
            }
        }
    }
    out
}

/// Sample `Γ_h⊗ = E[(Y_{t+h} - μ) ⊗ (Y_t - μ)ᵀ]`, centred at the full-sample
/// mean and averaged over the `T - |h|` available pairs. `h` may be negative.
pub fn empirical_autocov_kron(series: &[RealMatrix], h: isize) -> Result<RealMatrix> {
    check_series(series, h.unsigned_abs())?;
    let x = centered(series);
    let mut g = lagged_kron_sum(&x, h);
    g /= (series.len() - h.unsigned_abs()) as f64;
    Ok(g)
}

#[derive(Debug, Clone, Serialize)]
pub struct ColumnRowAutocov {
    /// `T Γ_h⊗`: `n x n` grid of `m x m` column covariance blocks.
    #[serde(with = "crate::io::rows")]
    pub sigma_c: RealMatrix,
    /// `Γ_h⊗ T`: `m x m` grid of `n x n` row covariance blocks.
    #[serde(with = "crate::io::rows")]
    pub sigma_r: RealMatrix,
}

pub fn column_row_autocov(series: &[RealMatrix], h: isize) -> Result<ColumnRowAutocov> {
    let g = empirical_autocov_kron(series, h)?;
    let (m, n) = series[0].shape();
    let t = transformation_matrix(m, n);
    Ok(ColumnRowAutocov {
        sigma_c: &t * &g,
        sigma_r: &g * &t,
    })
}

/// Lag-indexed cross-correlations in the column-wise and row-wise layouts.
#[derive(Debug, Clone, Serialize)]
pub struct CrossAcf {
    pub m: usize,
    pub n: usize,
    #[serde(with = "crate::io::rows_vec")]
    pub column_wise: Vec<RealMatrix>,
    #[serde(with = "crate::io::rows_vec")]
    pub row_wise: Vec<RealMatrix>,
}

impl CrossAcf {
    /// Long-format rows `(layout, lag, row, col, value)`, 1-based indices.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layout,lag,row,col,value\n");
        for (layout, mats) in [("column", &self.column_wise), ("row", &self.row_wise)] {
            for (h, mat) in mats.iter().enumerate() {
                for r in 0..mat.nrows() {
                    for c in 0..mat.ncols() {
                        out.push_str(&format!(
                            "{layout},{h},{},{},{}\n",
                            r + 1,
                            c + 1,
                            mat[(r, c)]
                        ));
                    }
                }
            }
        }
        out
    }
}

/// Cross-correlations for lags `0..=max_lag`. Every lag uses the
/// denominator `T`, so values stay within `[-1, 1]`.
pub fn cross_acf(series: &[RealMatrix], max_lag: usize) -> Result<CrossAcf> {
    let (m, n) = check_series(series, max_lag)?;
    let t_len = series.len() as f64;
    let x = centered(series);
    let mut var = RealMatrix::zeros(m, n);
    for xt in &x {
        var += xt.component_mul(xt);
    }
    var /= t_len;
    if let Some((idx, _)) = var.iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(MatinarError::ZeroVariance(format!(
            "({}, {})",
            idx % m + 1,
            idx / m + 1
        )));
    }
    let tm = transformation_matrix(m, n);
    let mut column_wise = Vec::with_capacity(max_lag + 1);
    let mut row_wise = Vec::with_capacity(max_lag + 1);
    for h in 0..=max_lag {
        let mut g = lagged_kron_sum(&x, h as isize);
        for j in 0..n {
            for i in 0..m {
                for k in 0..n {
                    for l in 0..m {
                        let e = &mut g[(i * n + k, j * m + l)];
                        *e = *e / t_len / (var[(i, j)] * var[(l, k)]).sqrt();
                    }
                }
            }
        }
        column_wise.push(&tm * &g);
        row_wise.push(&g * &tm);
    }
    Ok(CrossAcf {
        m,
        n,
        column_wise,
        row_wise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Poisson};

    fn random_series(seed: u64, t: usize, m: usize, n: usize) -> Vec<RealMatrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..t)
            .map(|_| RealMatrix::from_fn(m, n, |_, _| rng.random_range(0..10) as f64))
            .collect()
    }

    /// Direct covariance of two scalar component series over a lag.
    fn brute_cov(series: &[RealMatrix], h: usize, a: (usize, usize), b: (usize, usize)) -> f64 {
        let t = series.len();
        let mean =
            |(r, c): (usize, usize)| series.iter().map(|y| y[(r, c)]).sum::<f64>() / t as f64;
        let (ma, mb) = (mean(a), mean(b));
        (0..t - h)
            .map(|s| (series[s + h][a] - ma) * (series[s][b] - mb))
            .sum::<f64>()
            / (t - h) as f64
    }

    #[test]
    fn constant_series_has_zero_autocov() {
        let s = vec![RealMatrix::from_element(2, 3, 4.0); 10];
        for h in [-2, 0, 3] {
            assert_eq!(
                empirical_autocov_kron(&s, h).unwrap(),
                RealMatrix::zeros(6, 6)
            );
        }
        assert!(empirical_autocov_kron(&s, 10).is_err());
    }

    #[test]
    fn kron_layout_matches_brute_force() {
        let s = random_series(1, 40, 2, 3);
        let (m, n) = (2, 3);
        for h in [0usize, 1, 4] {
            let g = empirical_autocov_kron(&s, h as isize).unwrap();
            for i in 0..m {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..m {
                            let want = brute_cov(&s, h, (i, j), (l, k));
                            assert!((g[(i * n + k, j * m + l)] - want).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn poisson_variance_at_lag_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pois = Poisson::new(3.0).unwrap();
        let s: Vec<RealMatrix> = (0..50_000)
            .map(|_| RealMatrix::from_element(1, 1, pois.sample(&mut rng)))
            .collect();
        let g = empirical_autocov_kron(&s, 0).unwrap();
        assert!((g[(0, 0)] - 3.0).abs() < 0.1);
    }

    #[test]
    fn permutation_relation_between_lags() {
        let s = random_series(3, 60, 3, 2);
        let t = transformation_matrix(3, 2);
        for h in 1..=5 {
            let pos = empirical_autocov_kron(&s, h).unwrap();
            let neg = empirical_autocov_kron(&s, -h).unwrap();
            assert_eq!(pos, (&t * neg * &t).transpose());
        }
    }

    #[test]
    fn column_and_row_blocks() {
        let (m, n) = (3, 2);
        let s = random_series(4, 80, m, n);
        let cr = column_row_autocov(&s, 0).unwrap();
        for col in 0..n {
            let block = cr.sigma_c.view((col * m, col * m), (m, m));
            for a in 0..m {
                for b in 0..m {
                    assert!((block[(a, b)] - brute_cov(&s, 0, (a, col), (b, col))).abs() < 1e-12);
                }
            }
        }
        for row in 0..m {
            let block = cr.sigma_r.view((row * n, row * n), (n, n));
            for a in 0..n {
                for b in 0..n {
                    assert!((block[(a, b)] - brute_cov(&s, 0, (row, a), (row, b))).abs() < 1e-12);
                }
            }
        }
        let g = empirical_autocov_kron(&s, 0).unwrap();
        let sorted = |x: &RealMatrix| {
            let mut v: Vec<f64> = x.iter().copied().collect();
            v.sort_by(f64::total_cmp);
            v
        };
        assert_eq!(sorted(&g), sorted(&cr.sigma_c));
        assert_eq!(sorted(&g), sorted(&cr.sigma_r));
    }

    #[test]
    fn scalar_case_reduces_to_autocov() {
        let s = random_series(5, 30, 1, 1);
        let cr = column_row_autocov(&s, 2).unwrap();
        let want = brute_cov(&s, 2, (0, 0), (0, 0));
        assert!((cr.sigma_c[(0, 0)] - want).abs() < 1e-12);
        assert!((cr.sigma_r[(0, 0)] - want).abs() < 1e-12);
    }

    #[test]
    fn cross_acf_bounds() {
        let s = random_series(6, 100, 2, 2);
        let acf = cross_acf(&s, 5).unwrap();
        assert_eq!(acf.column_wise.len(), 6);
        for i in 0..4 {
            assert_eq!(acf.column_wise[0][(i, i)], 1.0);
            assert_eq!(acf.row_wise[0][(i, i)], 1.0);
        }
        for mat in acf.column_wise.iter().chain(&acf.row_wise) {
            assert!(mat.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
        assert!(acf.to_csv().lines().count() == 1 + 2 * 6 * 16);
        let mut flat = s.clone();
        for y in &mut flat {
            y[(1, 1)] = 2.0;
        }
        assert!(matches!(
            cross_acf(&flat, 2),
            Err(MatinarError::ZeroVariance(_))
        ));
    }
}
