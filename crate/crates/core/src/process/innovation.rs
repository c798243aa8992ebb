//! Innovation samplers: i.i.d. nonnegative-integer matrices with mean `Λ`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{MatinarError, Result};
use crate::linalg::RealMatrix;
use crate::thinning::{CountMatrix, RngStream};

/// Source of the innovation matrices `ε_t`.
///
/// Implementations must return `rows x cols` count matrices whose mean is
/// [`InnovationSampler::mean`] and whose second moment is finite.
pub trait InnovationSampler: Send + Sync {
    fn name(&self) -> &str;
    fn shape(&self) -> (usize, usize);
    fn mean(&self) -> RealMatrix;
    fn sample(&self, rng: &mut RngStream) -> CountMatrix;
}

/// Independent Poisson entries with means `λ_ij`. Zero means draw zero.
#[derive(Debug, Clone)]
pub struct PoissonInnovations {
    lambda: RealMatrix,
    dists: Vec<Option<Poisson<f64>>>,
}

impl PoissonInnovations {
    pub fn new(lambda: &RealMatrix) -> Result<Self> {
        let dists = lambda
            .iter()
            .map(|&l| {
                if !(l.is_finite() && l >= 0.0) {
                    Err(MatinarError::InvalidParameter(format!(
                        "Poisson mean must be finite and nonnegative, got {l}"
                    )))
                } else if l == 0.0 {
                    Ok(None)
                } else {
                    Poisson::new(l)
                        .map(Some)
                        .map_err(|e| MatinarError::InvalidParameter(format!("Poisson({l}): {e}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PoissonInnovations {
            lambda: lambda.clone(),
            dists,
        })
    }
}

impl InnovationSampler for PoissonInnovations {
    fn name(&self) -> &str {
        "poisson"
    }

    fn shape(&self) -> (usize, usize) {
        self.lambda.shape()
    }

    fn mean(&self) -> RealMatrix {
        self.lambda.clone()
    }

    fn sample(&self, rng: &mut RngStream) -> CountMatrix {
        let (m, n) = self.lambda.shape();
        // column-major, same order as the `dists` vector
        let vals = self
            .dists
            .iter()
            .map(|d| d.as_ref().map_or(0, |d| d.sample(rng) as u64));
        CountMatrix::from_iterator(m, n, vals)
    }
}

/// Independent entries, each drawn from its own probability table over
/// `0, 1, …, K`.
#[derive(Debug, Clone)]
pub struct PmfTableInnovations {
    rows: usize,
    cols: usize,
    // column-major per-entry cumulative tables
    cdfs: Vec<Vec<f64>>,
    mean: RealMatrix,
}

impl PmfTableInnovations {
    /// `tables` is row-major: `tables[i][j]` is the pmf of entry `(i, j)`.
    pub fn new(tables: &[Vec<Vec<f64>>]) -> Result<Self> {
        let rows = tables.len();
        let cols = tables.first().map_or(0, |r| r.len());
        if rows == 0 || cols == 0 || tables.iter().any(|r| r.len() != cols) {
            return Err(MatinarError::Dimension(
                "pmf tables must form a non-empty rectangular grid".into(),
            ));
        }
        let mut cdfs = Vec::with_capacity(rows * cols);
        let mut mean = RealMatrix::zeros(rows, cols);
        for j in 0..cols {
            for (i, row) in tables.iter().enumerate() {
                let pmf = &row[j];
                if pmf.is_empty() || pmf.iter().any(|&p| !(p.is_finite() && p >= 0.0)) {
                    return Err(MatinarError::InvalidParameter(format!(
                        "pmf for entry ({}, {}) must be non-empty with nonnegative weights",
                        i + 1,
                        j + 1
                    )));
                }
                let total: f64 = pmf.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(MatinarError::InvalidParameter(format!(
                        "pmf for entry ({}, {}) sums to {total}",
                        i + 1,
                        j + 1
                    )));
                }
                let mut acc = 0.0;
                let cdf: Vec<f64> = pmf
                    .iter()
                    .map(|p| {
                        acc += p / total;
                        acc
                    })
                    .collect();
                mean[(i, j)] = pmf
                    .iter()
                    .enumerate()
                    .map(|(k, p)| k as f64 * p)
                    .sum::<f64>()
                    / total;
                cdfs.push(cdf);
            }
        }
        Ok(PmfTableInnovations {
            rows,
            cols,
            cdfs,
            mean,
        })
    }
}

impl InnovationSampler for PmfTableInnovations {
    fn name(&self) -> &str {
        "pmf-table"
    }

    fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn mean(&self) -> RealMatrix {
        self.mean.clone()
    }

    fn sample(&self, rng: &mut RngStream) -> CountMatrix {
        let vals = self.cdfs.iter().map(|cdf| {
            let u: f64 = rng.random();
            cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1) as u64
        });
        CountMatrix::from_iterator(self.rows, self.cols, vals)
    }
}

/// Serializable choice of innovation distribution.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InnovationSpec {
    /// Independent Poisson entries with the model's `Λ` as means.
    #[default]
    Poisson,
    /// Per-entry probability tables, row-major `tables[i][j][k] = P(ε_ij = k)`.
    PmfTable { tables: Vec<Vec<Vec<f64>>> },
}

impl InnovationSpec {
    pub fn build(&self, lambda: &RealMatrix) -> Result<Box<dyn InnovationSampler>> {
        match self {
            InnovationSpec::Poisson => Ok(Box::new(PoissonInnovations::new(lambda)?)),
            InnovationSpec::PmfTable { tables } => {
                let s = PmfTableInnovations::new(tables)?;
                if s.shape() != lambda.shape() {
                    return Err(MatinarError::Dimension(format!(
                        "pmf tables are {:?} but the model is {:?}",
                        s.shape(),
                        lambda.shape()
                    )));
                }
                Ok(Box::new(s))
            }
        }
    }
}
