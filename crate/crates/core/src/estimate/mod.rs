//! Parameter estimation.
//!
//! Each method implements [`Estimator`] and is registered by name in an
//! [`EstimatorRegistry`]; callers pick one at runtime (`"proj"`, `"icls"`).

mod icls;
mod moments;
mod proj;

pub use icls::{
    icls_fit, icls_objective, icls_standard_errors, IclsEstimator, IclsFit, IclsOptions, IclsSe,
    IclsState, MiddleTerm,
};
pub use moments::LagMoments;
pub use proj::{
    bootstrap_standard_errors, cls_fit, nkp_project, proj_fit, proj_standard_errors, BootstrapSe,
    ClsDesign, ClsFit, ProjEstimator, ProjFit, ProjSe,
};

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{MatinarError, Result};
use crate::linalg::RealMatrix;
use crate::process::{conditional_mean, ModelParams};
use crate::thinning::RngStream;

/// Entrywise standard errors laid out like the parameters they belong to.
#[derive(Debug, Clone, Serialize)]
pub struct ParamSe {
    #[serde(with = "crate::io::rows_opt_vec")]
    pub a: Option<Vec<RealMatrix>>,
    #[serde(with = "crate::io::rows_opt_vec")]
    pub b: Option<Vec<RealMatrix>>,
    #[serde(with = "crate::io::rows")]
    pub lambda: RealMatrix,
    /// How the A/B errors were obtained.
    pub ab_source: String,
}

/// ICLS iteration record carried by a [`FitResult`].
#[derive(Debug, Clone, Serialize)]
pub struct IterationInfo {
    pub sweeps: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
}

/// Method-independent outcome of a fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub method: String,
    pub params: ModelParams,
    pub se: Option<ParamSe>,
    /// Entrywise errors of the unrestricted `Φ_l` (projection method only).
    pub se_phi: Option<Vec<RealMatrix>>,
    /// Least-squares criterion at the estimates.
    pub rss: f64,
    /// Number of observations the fit used (`T`).
    pub n_obs: usize,
    /// `Y_t - E(Y_t | past)` for `t = p+1, …, T`.
    pub residuals: Vec<RealMatrix>,
    pub condition_number: Option<f64>,
    pub iterations: Option<IterationInfo>,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn p(&self) -> usize {
        self.params.p()
    }
}

/// A fitting method for MAT-INAR(p) models.
pub trait Estimator: Send + Sync {
    fn name(&self) -> &'static str;

    /// Fits order `p` to `obs`. `rng` only feeds resampling-based error
    /// estimates; deterministic methods ignore it.
    fn fit(&self, obs: &[RealMatrix], p: usize, rng: &RngStream) -> Result<FitResult>;
}

/// Knobs shared by the built-in estimators.
#[derive(Debug, Clone)]
pub struct EstimatorOptions {
    /// Compute standard errors at all.
    pub standard_errors: bool,
    /// Parametric-bootstrap replicates for projection A/B errors (0 = off).
    pub bootstrap_reps: usize,
    pub icls: IclsOptions,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            standard_errors: true,
            bootstrap_reps: 200,
            icls: IclsOptions::default(),
        }
    }
}

impl EstimatorOptions {
    /// Point estimates only; what order selection and bootstraps use.
    pub fn point_only() -> Self {
        EstimatorOptions {
            standard_errors: false,
            bootstrap_reps: 0,
            icls: IclsOptions {
                standard_errors: false,
                ..IclsOptions::default()
            },
        }
    }
}

pub type EstimatorFactory = fn(&EstimatorOptions) -> Box<dyn Estimator>;

/// Name → constructor table for estimators.
pub struct EstimatorRegistry {
    factories: BTreeMap<&'static str, EstimatorFactory>,
}

impl EstimatorRegistry {
    pub fn empty() -> Self {
        EstimatorRegistry {
            factories: BTreeMap::new(),
        }
    }

    /// Registry holding `proj` and `icls`.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("proj", |o| Box::new(ProjEstimator::new(o.clone())));
        r.register("icls", |o| Box::new(IclsEstimator::new(o.clone())));
        r
    }

    pub fn register(&mut self, name: &'static str, factory: EstimatorFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn create(&self, name: &str, opts: &EstimatorOptions) -> Result<Box<dyn Estimator>> {
        self.factories
            .get(name)
            .map(|f| f(opts))
            .ok_or_else(|| MatinarError::Unknown {
                kind: "estimation method",
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }
}

impl Default for EstimatorRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Residual matrices `Y_t - Σ A_l Y_{t-l} B_lᵀ - Λ` for `t = p+1..T`.
pub fn model_residuals(params: &ModelParams, obs: &[RealMatrix]) -> Result<Vec<RealMatrix>> {
    let p = params.p();
    (p..obs.len())
        .map(|t| Ok(&obs[t] - conditional_mean(params, &obs[t - p..t])?))
        .collect()
}

pub(crate) fn check_fit_input(obs: &[RealMatrix], p: usize) -> Result<(usize, usize)> {
    if p == 0 {
        return Err(MatinarError::InvalidParameter(
            "order p must be at least 1".into(),
        ));
    }
    let (m, n) = obs
        .first()
        .map(|y| y.shape())
        .ok_or_else(|| MatinarError::SeriesTooShort("empty series".into()))?;
    if obs.iter().any(|y| y.shape() != (m, n)) {
        return Err(MatinarError::Dimension(
            "series matrices differ in shape".into(),
        ));
    }
    let need = p * m * n + 1;
    if obs.len() <= need + p {
        return Err(MatinarError::SeriesTooShort(format!(
            "order {p} with {m}x{n} observations needs more than {} time points, got {}",
            need + p,
            obs.len()
        )));
    }
    Ok((m, n))
}
