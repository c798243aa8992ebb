//! Projection estimator: unrestricted conditional least squares on the
//! vectorised model, then the nearest Kronecker product of each `Φ̂_l`.

use rayon::prelude::*;
use serde::Serialize;

use super::{
    check_fit_input, model_residuals, Estimator, EstimatorOptions, FitResult, LagMoments, ParamSe,
};
use crate::error::{MatinarError, Result};
use crate::linalg::{self, RealMatrix};
use crate::process::{
    check_stationary, simulate, ModelParams, PoissonInnovations, SimulationOptions, DEFAULT_BURN_IN,
};
use crate::thinning::RngStream;

/// Singular-value ratio below which the CLS design counts as rank deficient.
const RANK_CUTOFF: f64 = 1e-12;

/// Regression form of the vectorised model: row `t` of `x` is
/// `(vec Y_{t-1}ᵀ, …, vec Y_{t-p}ᵀ, 1)` and row `t` of `y` is `vec Y_tᵀ`,
/// for `t = p+1..T`.
#[derive(Debug, Clone)]
pub struct ClsDesign {
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub x: RealMatrix,
    pub y: RealMatrix,
}

impl ClsDesign {
    pub fn new(obs: &[RealMatrix], p: usize) -> Result<Self> {
        let (m, n) = check_fit_input(obs, p)?;
        let d = m * n;
        let rows = obs.len() - p;
        let mut x = RealMatrix::zeros(rows, p * d + 1);
        let mut y = RealMatrix::zeros(rows, d);
        for (r, t) in (p..obs.len()).enumerate() {
            for l in 1..=p {
                for (c, v) in obs[t - l].iter().enumerate() {
                    x[(r, (l - 1) * d + c)] = *v;
                }
            }
            x[(r, p * d)] = 1.0;
            for (c, v) in obs[t].iter().enumerate() {
                y[(r, c)] = *v;
            }
        }
        Ok(ClsDesign { m, n, p, x, y })
    }
}

/// Unrestricted CLS estimates of `Φ_1..Φ_p` and `vec Λ`.
#[derive(Debug, Clone)]
pub struct ClsFit {
    pub phis: Vec<RealMatrix>,
    pub lambda: RealMatrix,
    /// `(T-p) x mn` residuals `Û_tᵀ` of the vectorised regression.
    pub residuals: RealMatrix,
    /// `(𝒳ᵀ𝒳)⁻¹`, or its pseudo-inverse when the design is rank deficient.
    pub xtx_inv: RealMatrix,
    pub condition_number: f64,
    pub rank_deficient: bool,
}

pub fn cls_fit(obs: &[RealMatrix], p: usize) -> Result<ClsFit> {
    let design = ClsDesign::new(obs, p)?;
    let (m, n) = (design.m, design.n);
    let d = m * n;
    let qr = design.x.clone().qr();
    let r = qr.r();
    let sv = r.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition_number = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    let rank_deficient = !(smin > RANK_CUTOFF * smax);
    let (psi, xtx_inv) = if rank_deficient {
        let svd = design.x.clone().svd(true, true);
        let pinv = svd
            .pseudo_inverse(RANK_CUTOFF * smax.max(f64::MIN_POSITIVE))
            .map_err(|e| MatinarError::Singular(format!("CLS design: {e}")))?;
        let xtx_inv = &pinv * pinv.transpose();
        (&pinv * &design.y, xtx_inv)
    } else {
        let qty = qr.q().transpose() * &design.y;
        let psi = r
            .solve_upper_triangular(&qty)
            .ok_or_else(|| MatinarError::Singular("CLS design R factor".into()))?;
        let r_inv = r
            .solve_upper_triangular(&RealMatrix::identity(r.nrows(), r.ncols()))
            .ok_or_else(|| MatinarError::Singular("CLS design R factor".into()))?;
        let xtx_inv = &r_inv * r_inv.transpose();
        (psi, xtx_inv)
    };
    let residuals = &design.y - &design.x * &psi;
    let phis = (0..p).map(|l| psi.rows(l * d, d).transpose()).collect();
    let lambda = RealMatrix::from_iterator(m, n, psi.row(p * d).iter().copied());
    Ok(ClsFit {
        phis,
        lambda,
        residuals,
        xtx_inv,
        condition_number,
        rank_deficient,
    })
}

/// Nearest `B ⊗ A` to `phi` in Frobenius norm, returned as `(A, B)` with
/// `‖A‖_F = 1` and the entries of `A` summing to a nonnegative number.
pub fn nkp_project(phi: &RealMatrix, m: usize, n: usize) -> Result<(RealMatrix, RealMatrix)> {
    let tilde = linalg::rearrange(phi, m, n)?;
    match linalg::rank1_svd(&tilde) {
        Ok(svd) => {
            let a = RealMatrix::from_column_slice(m, m, svd.u.as_slice());
            let b = RealMatrix::from_column_slice(n, n, (svd.v * svd.sigma).as_slice());
            Ok((a, b))
        }
        Err(MatinarError::ZeroMatrix) => Ok((RealMatrix::zeros(m, m), RealMatrix::zeros(n, n))),
        Err(e) => Err(e),
    }
}

/// Analytic standard errors of the unrestricted CLS coefficients.
#[derive(Debug, Clone, Serialize)]
pub struct ProjSe {
    #[serde(with = "crate::io::rows_vec")]
    pub phi: Vec<RealMatrix>,
    #[serde(with = "crate::io::rows")]
    pub lambda: RealMatrix,
    /// `Σ̂_U = Σ_t Û_t Û_tᵀ / (T - mn - p)`.
    #[serde(with = "crate::io::rows")]
    pub sigma_u: RealMatrix,
}

/// `SE(Φ̂_l[j, c]) = sqrt(Σ̂_U[j, j] Ĥ⁻¹[r, r] / (T - p))` with
/// `Ĥ = 𝒳ᵀ𝒳 / (T - p)` and `r` the regressor index of `vec(Y_{t-l})[c]`.
pub fn proj_standard_errors(cls: &ClsFit, t_len: usize, m: usize, n: usize) -> Result<ProjSe> {
    let d = m * n;
    let p = cls.phis.len();
    let dof = t_len as isize - d as isize - p as isize;
    if dof <= 0 {
        return Err(MatinarError::SeriesTooShort(format!(
            "residual covariance needs T > mn + p, got T = {t_len}"
        )));
    }
    let sigma_u = cls.residuals.transpose() * &cls.residuals / dof as f64;
    // Ĥ⁻¹ / (T - p) is exactly (𝒳ᵀ𝒳)⁻¹
    let se = |j: usize, r: usize| (sigma_u[(j, j)] * cls.xtx_inv[(r, r)]).max(0.0).sqrt();
    let phi = (0..p)
        .map(|l| RealMatrix::from_fn(d, d, |j, c| se(j, l * d + c)))
        .collect();
    let lambda = RealMatrix::from_fn(m, n, |i, j| se(i + j * m, p * d));
    Ok(ProjSe {
        phi,
        lambda,
        sigma_u,
    })
}

/// Projection fit: CLS, then a per-lag Kronecker projection.
#[derive(Debug, Clone)]
pub struct ProjFit {
    pub cls: ClsFit,
    pub params: ModelParams,
}

pub fn proj_fit(obs: &[RealMatrix], p: usize) -> Result<ProjFit> {
    let cls = cls_fit(obs, p)?;
    let (m, n) = cls.lambda.shape();
    let mut a = Vec::with_capacity(p);
    let mut b = Vec::with_capacity(p);
    for phi in &cls.phis {
        let (al, bl) = nkp_project(phi, m, n)?;
        a.push(al);
        b.push(bl);
    }
    let params = ModelParams::new(a, b, cls.lambda.clone())?;
    Ok(ProjFit { cls, params })
}

/// Spread of projection estimates across series simulated from a fitted model.
#[derive(Debug, Clone, Serialize)]
pub struct BootstrapSe {
    #[serde(with = "crate::io::rows_vec")]
    pub a: Vec<RealMatrix>,
    #[serde(with = "crate::io::rows_vec")]
    pub b: Vec<RealMatrix>,
    #[serde(with = "crate::io::rows")]
    pub lambda: RealMatrix,
    /// Replicates that produced a fit.
    pub reps_used: usize,
    /// Factor applied to every `B_l` to make the resampling model stationary.
    pub b_shrink: f64,
}

/// Parametric bootstrap: simulate `reps` series of length `t_len` from the
/// feasible version of `params` with Poisson innovations, refit each by
/// projection and report entrywise standard deviations. Replicate `r` uses
/// `rng.derive(r)`, so results do not depend on thread scheduling.
pub fn bootstrap_standard_errors(
    params: &ModelParams,
    t_len: usize,
    reps: usize,
    rng: &RngStream,
) -> Result<BootstrapSe> {
    if reps < 2 {
        return Err(MatinarError::InvalidParameter(
            "bootstrap needs at least 2 replicates".into(),
        ));
    }
    let mut truth = params.feasible();
    let mut b_shrink = 1.0;
    let mut radius = check_stationary(&truth)?.radius;
    while radius >= 1.0 {
        let f = 0.99 / radius;
        b_shrink *= f;
        truth = truth.with_scaled_b(f);
        radius = check_stationary(&truth)?.radius;
    }
    let innovations = PoissonInnovations::new(truth.lambda())?;
    let p = truth.p();
    let opts = SimulationOptions {
        burn_in: DEFAULT_BURN_IN,
        force_nonstationary: false,
    };
    let fits: Vec<ModelParams> = (0..reps as u64)
        .into_par_iter()
        .filter_map(|r| {
            let mut stream = rng.derive(r);
            let series = simulate(&truth, t_len, opts, &innovations, &mut stream).ok()?;
            proj_fit(&series.to_real(), p).ok().map(|f| f.params)
        })
        .collect();
    if fits.len() < 2 {
        return Err(MatinarError::NoConvergence {
            iterations: reps,
            context: "bootstrap refits".into(),
        });
    }
    let sd = |get: &dyn Fn(&ModelParams) -> RealMatrix| {
        let k = fits.len() as f64;
        let mean: RealMatrix = fits.iter().map(get).sum::<RealMatrix>() / k;
        let ss: RealMatrix = fits
            .iter()
            .map(|f| {
                let dev = get(f) - &mean;
                dev.component_mul(&dev)
            })
            .sum();
        (ss / (k - 1.0)).map(f64::sqrt)
    };
    Ok(BootstrapSe {
        a: (0..p).map(|l| sd(&|f| f.a()[l].clone())).collect(),
        b: (0..p).map(|l| sd(&|f| f.b()[l].clone())).collect(),
        lambda: sd(&|f| f.lambda().clone()),
        reps_used: fits.len(),
        b_shrink,
    })
}

/// Registry entry for the projection method.
pub struct ProjEstimator {
    opts: EstimatorOptions,
}

impl ProjEstimator {
    pub fn new(opts: EstimatorOptions) -> Self {
        ProjEstimator { opts }
    }
}

impl Estimator for ProjEstimator {
    fn name(&self) -> &'static str {
        "proj"
    }

    fn fit(&self, obs: &[RealMatrix], p: usize, rng: &RngStream) -> Result<FitResult> {
        let fit = proj_fit(obs, p)?;
        let (m, n) = fit.cls.lambda.shape();
        let mut warnings = Vec::new();
        if fit.cls.rank_deficient {
            warnings.push(format!(
                "CLS design is rank deficient (condition number {:.3e}); minimum-norm solution used",
                fit.cls.condition_number
            ));
        }
        let outside = fit
            .params
            .a()
            .iter()
            .chain(fit.params.b())
            .any(|x| x.iter().any(|v| !(0.0..=1.0).contains(v)));
        if outside {
            warnings.push("some projected A/B entries lie outside [0, 1]".into());
        }
        let (se, se_phi) = if self.opts.standard_errors {
            let analytic = proj_standard_errors(&fit.cls, obs.len(), m, n)?;
            let (a, b, source) = if self.opts.bootstrap_reps >= 2 {
                let boot = bootstrap_standard_errors(
                    &fit.params,
                    obs.len(),
                    self.opts.bootstrap_reps,
                    rng,
                )?;
                if boot.b_shrink < 1.0 {
                    warnings.push(format!(
                        "bootstrap model shrank B by {:.4} to stay stationary",
                        boot.b_shrink
                    ));
                }
                (
                    Some(boot.a),
                    Some(boot.b),
                    format!("parametric bootstrap, {} replicates", boot.reps_used),
                )
            } else {
                (None, None, "not computed".to_string())
            };
            (
                Some(ParamSe {
                    a,
                    b,
                    lambda: analytic.lambda,
                    ab_source: source,
                }),
                Some(analytic.phi),
            )
        } else {
            (None, None)
        };
        let rss = LagMoments::new(obs, p)?.rss(&fit.params);
        Ok(FitResult {
            method: self.name().into(),
            residuals: model_residuals(&fit.params, obs)?,
            params: fit.params,
            se,
            se_phi,
            rss,
            n_obs: obs.len(),
            condition_number: Some(fit.cls.condition_number),
            iterations: None,
            warnings,
        })
    }
}
