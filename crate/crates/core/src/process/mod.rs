//! The MAT-INAR(p) process
//!
//! `Y_t = Σ_l A_l ∘_L Y_{t-l} ∘_R B_lᵀ + ε_t` with `m x m` row-interaction
//! matrices `A_l`, `n x n` column-interaction matrices `B_l` and i.i.d.
//! count innovations with mean `Λ`.

mod innovation;
mod moments;

pub use innovation::{InnovationSampler, InnovationSpec, PmfTableInnovations, PoissonInnovations};
pub use moments::{
    column_row_autocov, cross_acf, empirical_autocov_kron, ColumnRowAutocov, CrossAcf,
};

use serde::{Deserialize, Serialize};

use crate::error::{MatinarError, Result};
use crate::linalg::{self, RealMatrix, RealVector};
use crate::thinning::{add_sandwich_unchecked, CountMatrix, RngStream};

/// Default number of discarded warm-up steps.
pub const DEFAULT_BURN_IN: usize = 500;

/// Coefficients of a MAT-INAR(p) model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsDoc", into = "ParamsDoc")]
pub struct ModelParams {
    m: usize,
    n: usize,
    a: Vec<RealMatrix>,
    b: Vec<RealMatrix>,
    lambda: RealMatrix,
}

impl ModelParams {
    /// Checks shapes and finiteness. Probability ranges are only enforced
    /// where they matter (simulation), since estimates may leave `[0, 1]`.
    pub fn new(a: Vec<RealMatrix>, b: Vec<RealMatrix>, lambda: RealMatrix) -> Result<Self> {
        let (m, n) = lambda.shape();
        if m == 0 || n == 0 {
            return Err(MatinarError::Dimension("Lambda must be non-empty".into()));
        }
        if a.is_empty() || a.len() != b.len() {
            return Err(MatinarError::InvalidParameter(format!(
                "need the same positive number of A and B matrices, got {} and {}",
                a.len(),
                b.len()
            )));
        }
        for (l, (al, bl)) in a.iter().zip(&b).enumerate() {
            if al.shape() != (m, m) {
                return Err(MatinarError::Dimension(format!(
                    "A_{} is {}x{}, expected {m}x{m}",
                    l + 1,
                    al.nrows(),
                    al.ncols()
                )));
            }
            if bl.shape() != (n, n) {
                return Err(MatinarError::Dimension(format!(
                    "B_{} is {}x{}, expected {n}x{n}",
                    l + 1,
                    bl.nrows(),
                    bl.ncols()
                )));
            }
        }
        if a.iter()
            .chain(&b)
            .chain(std::iter::once(&lambda))
            .any(|x| x.iter().any(|v| !v.is_finite()))
        {
            return Err(MatinarError::InvalidParameter(
                "non-finite coefficient".into(),
            ));
        }
        Ok(ModelParams { m, n, a, b, lambda })
    }

    /// All-zero coefficients with the given innovation mean.
    pub fn zeros(p: usize, lambda: RealMatrix) -> Result<Self> {
        let (m, n) = lambda.shape();
        Self::new(
            vec![RealMatrix::zeros(m, m); p],
            vec![RealMatrix::zeros(n, n); p],
            lambda,
        )
    }

    pub fn m(&self) -> usize {
        self.m
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn p(&self) -> usize {
        self.a.len()
    }
    pub fn a(&self) -> &[RealMatrix] {
        &self.a
    }
    pub fn b(&self) -> &[RealMatrix] {
        &self.b
    }
    pub fn lambda(&self) -> &RealMatrix {
        &self.lambda
    }

    /// `Φ_l = B_l ⊗ A_l` for each lag.
    pub fn phis(&self) -> Vec<RealMatrix> {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(a, b)| linalg::kron(b, a))
            .collect()
    }

    pub fn companion(&self) -> RealMatrix {
        linalg::companion(&self.phis()).expect("validated block shapes")
    }

    /// Rescales each pair to `(A_l / ‖A_l‖_F, ‖A_l‖_F B_l)`; zero `A_l` is left alone.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.a.iter_mut().zip(out.b.iter_mut()) {
            let norm = a.norm();
            if norm > 0.0 {
                *a /= norm;
                *b *= norm;
            }
        }
        out
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        self.a.iter().all(|a| (a.norm() - 1.0).abs() <= tol)
    }

    /// Nearest parameters usable for simulation: `A_l` clamped to `[0, 1]`
    /// and renormalised, `B_l` clamped to `[0, 1]`, `Λ` clamped at zero.
    pub fn feasible(&self) -> Self {
        let clamp01 = |x: &RealMatrix| x.map(|v| v.clamp(0.0, 1.0));
        let mut out = self.clone();
        for (a, b) in out.a.iter_mut().zip(out.b.iter_mut()) {
            *a = clamp01(a);
            let norm = a.norm();
            if norm > 0.0 {
                *a /= norm;
                *b *= norm;
            }
            *b = clamp01(b);
        }
        out.lambda = out.lambda.map(|v| v.max(0.0));
        out
    }

    /// Scales all `B_l` by `factor`.
    pub fn with_scaled_b(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for b in &mut out.b {
            *b *= factor;
        }
        out
    }

    fn check_probabilities(&self) -> Result<()> {
        for (l, (a, b)) in self.a.iter().zip(&self.b).enumerate() {
            for (name, mat) in [("A", a), ("B", b)] {
                if let Some(v) = mat.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                    return Err(MatinarError::Probability {
                        value: *v,
                        context: format!("{name}_{}", l + 1),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct ParamsDoc {
    m: usize,
    n: usize,
    p: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "B")]
    b: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "Lambda")]
    lambda: Vec<Vec<f64>>,
}

impl From<ModelParams> for ParamsDoc {
    fn from(p: ModelParams) -> Self {
        ParamsDoc {
            m: p.m,
            n: p.n,
            p: p.p(),
            a: p.a.iter().map(to_rows).collect(),
            b: p.b.iter().map(to_rows).collect(),
            lambda: to_rows(&p.lambda),
        }
    }
}

impl TryFrom<ParamsDoc> for ModelParams {
    type Error = MatinarError;

    fn try_from(doc: ParamsDoc) -> Result<Self> {
        if doc.a.len() != doc.p || doc.b.len() != doc.p {
            return Err(MatinarError::InvalidParameter(format!(
                "p = {} but {} A and {} B matrices given",
                doc.p,
                doc.a.len(),
                doc.b.len()
            )));
        }
        let a = doc
            .a
            .iter()
            .map(|r| from_rows(r))
            .collect::<Result<Vec<_>>>()?;
        let b = doc
            .b
            .iter()
            .map(|r| from_rows(r))
            .collect::<Result<Vec<_>>>()?;
        let params = ModelParams::new(a, b, from_rows(&doc.lambda)?)?;
        if params.m != doc.m || params.n != doc.n {
            return Err(MatinarError::Dimension(format!(
                "declared m = {}, n = {} but Lambda is {}x{}",
                doc.m, doc.n, params.m, params.n
            )));
        }
        Ok(params)
    }
}

/// Row-major nested representation of a matrix.
pub fn to_rows(m: &RealMatrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Inverse of [`to_rows`]; rows must be non-empty and of equal length.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<RealMatrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    if r == 0 || c == 0 || rows.iter().any(|x| x.len() != c) {
        return Err(MatinarError::Dimension(
            "matrix rows must be non-empty and rectangular".into(),
        ));
    }
    Ok(RealMatrix::from_row_iterator(
        r,
        c,
        rows.iter().flatten().copied(),
    ))
}

/// Ordered sequence of equally shaped count matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct IntMatrixSeries {
    rows: usize,
    cols: usize,
    origin: usize,
    items: Vec<CountMatrix>,
}

impl IntMatrixSeries {
    /// Builds a series whose first observation carries time index `origin`.
    pub fn new(items: Vec<CountMatrix>, origin: usize) -> Result<Self> {
        let (rows, cols) = items
            .first()
            .map(|y| y.shape())
            .ok_or_else(|| MatinarError::SeriesTooShort("empty series".into()))?;
        if let Some((t, y)) = items
            .iter()
            .enumerate()
            .find(|(_, y)| y.shape() != (rows, cols))
        {
            return Err(MatinarError::Dimension(format!(
                "observation {} is {}x{}, expected {rows}x{cols}",
                origin + t,
                y.nrows(),
                y.ncols()
            )));
        }
        Ok(IntMatrixSeries {
            rows,
            cols,
            origin,
            items,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
    pub fn origin(&self) -> usize {
        self.origin
    }
    pub fn items(&self) -> &[CountMatrix] {
        &self.items
    }

    pub fn to_real(&self) -> Vec<RealMatrix> {
        self.items.iter().map(|y| y.map(|v| v as f64)).collect()
    }

    /// Observations `range` as a new series, keeping their time labels.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.end > self.items.len() || range.start >= range.end {
            return Err(MatinarError::SeriesTooShort(format!(
                "cannot take observations {range:?} of a series of length {}",
                self.items.len()
            )));
        }
        IntMatrixSeries::new(
            self.items[range.clone()].to_vec(),
            self.origin + range.start,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stationarity {
    pub radius: f64,
    pub stationary: bool,
}

/// Spectral radius of the companion matrix and whether it is below one.
pub fn check_stationary(params: &ModelParams) -> Result<Stationarity> {
    let radius = linalg::spectral_radius(&params.companion(), linalg::POWER_ITER_TOL)?;
    Ok(Stationarity {
        radius,
        stationary: radius < 1.0,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SimulationOptions {
    pub burn_in: usize,
    pub force_nonstationary: bool,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            burn_in: DEFAULT_BURN_IN,
            force_nonstationary: false,
        }
    }
}

/// Simulates `t_len` observations after discarding `opts.burn_in` warm-up
/// steps started from zero matrices.
pub fn simulate(
    params: &ModelParams,
    t_len: usize,
    opts: SimulationOptions,
    innovations: &dyn InnovationSampler,
    rng: &mut RngStream,
) -> Result<IntMatrixSeries> {
    if t_len == 0 {
        return Err(MatinarError::InvalidParameter(
            "series length must be at least 1".into(),
        ));
    }
    if innovations.shape() != (params.m, params.n) {
        return Err(MatinarError::Dimension(format!(
            "innovations are {:?} but the model is {}x{}",
            innovations.shape(),
            params.m,
            params.n
        )));
    }
    params.check_probabilities()?;
    if !opts.force_nonstationary {
        let st = check_stationary(params)?;
        if !st.stationary {
            return Err(MatinarError::NonStationary { radius: st.radius });
        }
    }
    let p = params.p();
    let total = t_len + opts.burn_in;
    // history[0] is Y_{t-1}, history[p-1] is Y_{t-p}
    let mut history = vec![CountMatrix::zeros(params.m, params.n); p];
    let mut out = Vec::with_capacity(t_len);
    for step in 0..total {
        let mut y = innovations.sample(rng);
        for (l, prev) in history.iter().enumerate() {
            add_sandwich_unchecked(&mut y, &params.a[l], prev, &params.b[l], rng);
        }
        history.rotate_right(1);
        history[0] = y;
        if step >= opts.burn_in {
            out.push(history[0].clone());
        }
    }
    IntMatrixSeries::new(out, 1)
}

/// [`simulate`] with Poisson innovations and stream `(seed, 0)`.
pub fn simulate_poisson(
    params: &ModelParams,
    t_len: usize,
    burn_in: usize,
    seed: u64,
) -> Result<IntMatrixSeries> {
    let innov = PoissonInnovations::new(params.lambda())?;
    let mut rng = RngStream::new(seed, 0);
    simulate(
        params,
        t_len,
        SimulationOptions {
            burn_in,
            force_nonstationary: false,
        },
        &innov,
        &mut rng,
    )
}

/// `Σ_l A_l Y_{t-l} B_lᵀ + Λ` given observations in time order, so that
/// `history.last()` is `Y_{t-1}`.
pub fn conditional_mean(params: &ModelParams, history: &[RealMatrix]) -> Result<RealMatrix> {
    let p = params.p();
    if history.len() < p {
        return Err(MatinarError::SeriesTooShort(format!(
            "conditional mean needs {p} lagged observations, got {}",
            history.len()
        )));
    }
    let mut mean = params.lambda.clone();
    for l in 0..p {
        let y = &history[history.len() - 1 - l];
        if y.shape() != (params.m, params.n) {
            return Err(MatinarError::Dimension(
                "history shape does not match the model".into(),
            ));
        }
        mean += &params.a[l] * y * params.b[l].transpose();
    }
    Ok(mean)
}

/// `unvec((I - Σ_l B_l ⊗ A_l)⁻¹ vec(Λ))`.
pub fn stationary_mean(params: &ModelParams) -> Result<RealMatrix> {
    let st = check_stationary(params)?;
    if !st.stationary {
        return Err(MatinarError::NonStationary { radius: st.radius });
    }
    let d = params.m * params.n;
    let mut system = RealMatrix::identity(d, d);
    for phi in params.phis() {
        system -= phi;
    }
    let rhs: RealVector = linalg::vec(&params.lambda);
    let sol = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| MatinarError::Singular("I - Σ B_l ⊗ A_l".into()))?;
    linalg::unvec(sol.as_slice(), params.m, params.n)
}
