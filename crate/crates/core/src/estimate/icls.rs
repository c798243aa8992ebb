//! Iterative conditional least squares: block-coordinate minimisation of
//! `Σ_t ‖Y_t - Σ_l A_l Y_{t-l} B_lᵀ - Λ‖_F²` over `A_l`, `B_l` and `Λ`.

use serde::Serialize;

use super::{
    check_fit_input, model_residuals, proj_fit, Estimator, EstimatorOptions, FitResult,
    IterationInfo, LagMoments, ParamSe,
};
use crate::error::{MatinarError, Result};
use crate::linalg::{kron, pseudo_inverse, solve_right_psd, RealMatrix};
use crate::process::ModelParams;
use crate::thinning::RngStream;

/// Middle term of the sandwich covariance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MiddleTerm {
    /// `(1/N) Σ_t P_t Û_t Û_tᵀ P_tᵀ`: robust to conditional heteroscedasticity,
    /// which thinning always produces.
    #[default]
    Sandwich,
    /// `(1/N) Σ_t P_t Σ̂_U P_tᵀ` with a single pooled residual covariance.
    Pooled,
}

#[derive(Debug, Clone)]
pub struct IclsOptions {
    pub max_sweeps: usize,
    /// Stop once no block moves by more than this in Frobenius norm.
    pub tol: f64,
    /// Relative singular-value cutoff for the per-block normal equations.
    pub singular_cutoff: f64,
    pub standard_errors: bool,
    pub middle: MiddleTerm,
}

impl Default for IclsOptions {
    fn default() -> Self {
        IclsOptions {
            max_sweeps: 500,
            tol: 1e-9,
            singular_cutoff: 1e-12,
            standard_errors: true,
            middle: MiddleTerm::Sandwich,
        }
    }
}

/// Current iterate of the sweep.
#[derive(Debug, Clone)]
pub struct IclsState {
    pub a: Vec<RealMatrix>,
    pub b: Vec<RealMatrix>,
    pub lambda: RealMatrix,
}

impl IclsState {
    fn from_params(p: &ModelParams) -> Self {
        IclsState {
            a: p.a().to_vec(),
            b: p.b().to_vec(),
            lambda: p.lambda().clone(),
        }
    }

    fn to_params(&self) -> Result<ModelParams> {
        ModelParams::new(self.a.clone(), self.b.clone(), self.lambda.clone())
    }

    /// `‖A_l‖_F = 1` with a nonnegative entry sum; the product `B_l ⊗ A_l`
    /// is unchanged.
    fn fix_gauge(&mut self) {
        for (a, b) in self.a.iter_mut().zip(self.b.iter_mut()) {
            let norm = a.norm();
            if norm > 0.0 {
                let sum = a.sum();
                let first_negative = a.iter().find(|v| **v != 0.0).is_some_and(|v| *v < 0.0);
                let sign = if sum < 0.0 || (sum == 0.0 && first_negative) {
                    -1.0
                } else {
                    1.0
                };
                *a *= sign / norm;
                *b *= sign * norm;
            }
        }
    }

    fn max_change(&self, other: &IclsState) -> f64 {
        let pairs = self
            .a
            .iter()
            .zip(&other.a)
            .chain(self.b.iter().zip(&other.b));
        pairs
            .map(|(x, y)| (x - y).norm())
            .fold((&self.lambda - &other.lambda).norm(), f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct IclsFit {
    pub params: ModelParams,
    pub sweeps: usize,
    pub converged: bool,
    /// Criterion at the start and after every sweep.
    pub objective_trace: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Least-squares criterion of `params` on `obs`, summed over `t = p+1..T`.
pub fn icls_objective(params: &ModelParams, obs: &[RealMatrix]) -> Result<f64> {
    Ok(model_residuals(params, obs)?
        .iter()
        .map(|r| r.norm_squared())
        .sum())
}

/// Runs the sweeps from `init` (the projection estimate when `None`).
pub fn icls_fit(
    obs: &[RealMatrix],
    p: usize,
    init: Option<&ModelParams>,
    opts: &IclsOptions,
) -> Result<IclsFit> {
    let (m, n) = check_fit_input(obs, p)?;
    let start = match init {
        Some(params) => {
            if params.p() != p || (params.m(), params.n()) != (m, n) {
                return Err(MatinarError::Dimension(format!(
                    "initial values are order {} {}x{}, data needs order {p} {m}x{n}",
                    params.p(),
                    params.m(),
                    params.n()
                )));
            }
            params.clone()
        }
        None => proj_fit(obs, p)?.params,
    };
    let mom = LagMoments::new(obs, p)?;
    let count = mom.count() as f64;
    let mut state = IclsState::from_params(&start);
    state.fix_gauge();
    let mut warnings = Vec::new();
    let mut trace = vec![mom.rss(&state.to_params()?)];
    let mut converged = false;
    let mut sweeps = 0;
    let mut cut_noted = false;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let prev = state.clone();
        for l in 0..p {
            let lag = l + 1;
            // A_l given everything else
            let bl = state.b[l].clone();
            let g = mom.contract_rows(lag, lag, &(bl.transpose() * &bl));
            let mut rhs = mom.contract_rows(0, lag, &bl);
            for k in (0..p).filter(|&k| k != l) {
                rhs -= &state.a[k] * mom.contract_rows(k + 1, lag, &(state.b[k].transpose() * &bl));
            }
            rhs -= &state.lambda * &bl * mom.sum(lag).transpose();
            let (al, cut_a) = solve_right_psd(&rhs, &g, opts.singular_cutoff);
            state.a[l] = al;
            // B_l given the new A_l
            let al = state.a[l].clone();
            let h = mom.contract_cols(lag, lag, &(al.transpose() * &al));
            let mut rhs = mom.contract_cols(0, lag, &al);
            for k in (0..p).filter(|&k| k != l) {
                rhs -= &state.b[k] * mom.contract_cols(k + 1, lag, &(state.a[k].transpose() * &al));
            }
            rhs -= state.lambda.transpose() * &al * mom.sum(lag);
            let (bl, cut_b) = solve_right_psd(&rhs, &h, opts.singular_cutoff);
            state.b[l] = bl;
            if (cut_a || cut_b) && !cut_noted {
                cut_noted = true;
                warnings.push(format!(
                    "singular normal equations for lag {lag} at sweep {sweeps}; pseudo-inverse used"
                ));
            }
        }
        let mut lam = mom.sum(0);
        for l in 0..p {
            lam -= &state.a[l] * mom.sum(l + 1) * state.b[l].transpose();
        }
        state.lambda = lam / count;
        state.fix_gauge();
        let obj = mom.rss(&state.to_params()?);
        let last = *trace.last().expect("trace starts non-empty");
        if obj > last + 1e-9 * last.max(1.0) {
            warnings.push(format!(
                "criterion rose from {last} to {obj} at sweep {sweeps}"
            ));
        }
        trace.push(obj);
        if state.max_change(&prev) < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        warnings.push(format!("no convergence within {} sweeps", opts.max_sweeps));
    }
    Ok(IclsFit {
        params: state.to_params()?,
        sweeps,
        converged,
        objective_trace: trace,
        warnings,
    })
}

/// Sandwich standard errors of the normalised ICLS estimates.
#[derive(Debug, Clone, Serialize)]
pub struct IclsSe {
    #[serde(with = "crate::io::rows_vec")]
    pub a: Vec<RealMatrix>,
    #[serde(with = "crate::io::rows_vec")]
    pub b: Vec<RealMatrix>,
    #[serde(with = "crate::io::rows")]
    pub lambda: RealMatrix,
    pub middle: MiddleTerm,
    /// Whether the bread matrix needed a pseudo-inverse.
    pub singular: bool,
}

/// Asymptotic standard errors `sqrt(diag(Q̂⁻¹ M̂ Q̂⁻¹) / N)`.
///
/// The stacked parameter is `(vec A_1, vec B_1ᵀ, …, vec A_p, vec B_pᵀ, vec Λ)`,
/// `P_tᵀ = ∂ vec E(Y_t | past) / ∂θᵀ`, and `Q̂ = (1/N) Σ_t P_t P_tᵀ + Σ_l γ_l γ_lᵀ`
/// where `γ_l` carries `vec A_l` in the `A_l` slot (the norm constraint).
pub fn icls_standard_errors(
    params: &ModelParams,
    obs: &[RealMatrix],
    middle: MiddleTerm,
) -> Result<IclsSe> {
    let p = params.p();
    let (m, n) = check_fit_input(obs, p)?;
    let d = m * n;
    let block = m * m + n * n;
    let dim = p * block + d;
    let residuals = model_residuals(params, obs)?;
    let count = residuals.len() as f64;
    let eye_m = RealMatrix::identity(m, m);
    let eye_n = RealMatrix::identity(n, n);
    let jacobian = |t: usize| {
        let mut pt = RealMatrix::zeros(d, dim);
        for l in 0..p {
            let y = &obs[t - l - 1];
            let (a, b) = (&params.a()[l], &params.b()[l]);
            pt.view_mut((0, l * block), (d, m * m))
                .copy_from(&kron(&(b * y.transpose()), &eye_m));
            pt.view_mut((0, l * block + m * m), (d, n * n))
                .copy_from(&kron(&eye_n, &(a * y)));
        }
        pt.view_mut((0, p * block), (d, d)).fill_with_identity();
        pt
    };
    let mut q = RealMatrix::zeros(dim, dim);
    let mut meat = RealMatrix::zeros(dim, dim);
    let pooled = match middle {
        MiddleTerm::Pooled => {
            let mut s = RealMatrix::zeros(d, d);
            for u in &residuals {
                let u = RealMatrix::from_column_slice(d, 1, u.as_slice());
                s += &u * u.transpose();
            }
            Some(s / count)
        }
        MiddleTerm::Sandwich => None,
    };
    for (i, t) in (p..obs.len()).enumerate() {
        let pt = jacobian(t);
        q += pt.transpose() * &pt;
        match &pooled {
            Some(s) => meat += pt.transpose() * s * &pt,
            None => {
                let score =
                    pt.transpose() * RealMatrix::from_column_slice(d, 1, residuals[i].as_slice());
                meat += &score * score.transpose();
            }
        }
    }
    q /= count;
    meat /= count;
    for l in 0..p {
        let mut gamma = RealMatrix::zeros(dim, 1);
        gamma
            .view_mut((l * block, 0), (m * m, 1))
            .copy_from_slice(params.a()[l].as_slice());
        q += &gamma * gamma.transpose();
    }
    let (q_inv, singular) = match q.clone().cholesky() {
        Some(ch) => (ch.inverse(), false),
        None => {
            let (pinv, _) = pseudo_inverse(&q, 1e-12);
            (pinv, true)
        }
    };
    let cov = &q_inv * meat * &q_inv;
    let se = |k: usize| (cov[(k, k)] / count).max(0.0).sqrt();
    let a = (0..p)
        .map(|l| RealMatrix::from_fn(m, m, |i, j| se(l * block + i + j * m)))
        .collect();
    // B entries sit in vec(Bᵀ) order: B[r, c] is at r*n + c
    let b = (0..p)
        .map(|l| RealMatrix::from_fn(n, n, |r, c| se(l * block + m * m + r * n + c)))
        .collect();
    let lambda = RealMatrix::from_fn(m, n, |i, j| se(p * block + i + j * m));
    Ok(IclsSe {
        a,
        b,
        lambda,
        middle,
        singular,
    })
}

/// Registry entry for the ICLS method.
pub struct IclsEstimator {
    opts: EstimatorOptions,
}

impl IclsEstimator {
    pub fn new(opts: EstimatorOptions) -> Self {
        IclsEstimator { opts }
    }
}

impl Estimator for IclsEstimator {
    fn name(&self) -> &'static str {
        "icls"
    }

    fn fit(&self, obs: &[RealMatrix], p: usize, _rng: &RngStream) -> Result<FitResult> {
        let init = proj_fit(obs, p)?;
        let fit = icls_fit(obs, p, Some(&init.params), &self.opts.icls)?;
        let mut warnings = fit.warnings;
        let se = if self.opts.standard_errors && self.opts.icls.standard_errors {
            let se = icls_standard_errors(&fit.params, obs, self.opts.icls.middle)?;
            if se.singular {
                warnings
                    .push("standard-error bread matrix is singular; pseudo-inverse used".into());
            }
            Some(ParamSe {
                a: Some(se.a),
                b: Some(se.b),
                lambda: se.lambda,
                ab_source: match se.middle {
                    MiddleTerm::Sandwich => "asymptotic sandwich".into(),
                    MiddleTerm::Pooled => "asymptotic, pooled residual covariance".into(),
                },
            })
        } else {
            None
        };
        Ok(FitResult {
            method: self.name().into(),
            residuals: model_residuals(&fit.params, obs)?,
            rss: *fit.objective_trace.last().expect("trace starts non-empty"),
            params: fit.params,
            se,
            se_phi: None,
            n_obs: obs.len(),
            condition_number: Some(init.cls.condition_number),
            iterations: Some(IterationInfo {
                sweeps: fit.sweeps,
                converged: fit.converged,
                objective_trace: fit.objective_trace,
            }),
            warnings,
        })
    }
}
