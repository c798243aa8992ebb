//! Monte-Carlo studies: estimator bias/SD/SE tables and order-selection
//! frequencies.
//!
//! Replication `r` draws from `RngStream::new(seed, r)` and sub-streams
//! derived from it, so results are identical for any thread count.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{MatinarError, Result};
use crate::estimate::{EstimatorOptions, EstimatorRegistry, FitResult};
use crate::order::select_order;
use crate::process::{
    simulate, ModelParams, PoissonInnovations, SimulationOptions, DEFAULT_BURN_IN,
};
use crate::scenario::Scenario;
use crate::thinning::RngStream;

/// Stream id reserved for drawing a study-wide random truth.
const TRUTH_STREAM: u64 = u64::MAX;

fn sim_rng(seed: u64, rep: usize, t_len: usize) -> RngStream {
    RngStream::new(seed, rep as u64).derive(t_len as u64)
}

fn fit_rng(seed: u64, rep: usize, t_len: usize, method: usize) -> RngStream {
    RngStream::new(seed, rep as u64).derive(((method as u64 + 1) << 40) | t_len as u64)
}

fn simulate_rep(
    truth: &ModelParams,
    t_len: usize,
    burn_in: usize,
    rng: &mut RngStream,
) -> Result<Vec<crate::linalg::RealMatrix>> {
    let innov = PoissonInnovations::new(truth.lambda())?;
    let opts = SimulationOptions {
        burn_in,
        force_nonstationary: false,
    };
    Ok(simulate(truth, t_len, opts, &innov, rng)?.to_real())
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub seed: u64,
    pub reps: usize,
    pub t_values: Vec<usize>,
    pub burn_in: usize,
    pub methods: Vec<String>,
    pub options: EstimatorOptions,
}

impl StudyConfig {
    pub fn new(seed: u64, reps: usize, t_values: Vec<usize>, methods: Vec<String>) -> Self {
        StudyConfig {
            seed,
            reps,
            t_values,
            burn_in: DEFAULT_BURN_IN,
            methods,
            options: EstimatorOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamStat {
    pub name: String,
    pub truth: f64,
    pub bias: f64,
    pub sd: f64,
    /// Mean reported standard error, when the method produced one.
    pub mean_se: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimationCell {
    pub method: String,
    pub t_len: usize,
    /// Successful fits.
    pub reps: usize,
    pub failures: usize,
    /// Iterative fits that hit the sweep cap.
    pub nonconverged: usize,
    pub stats: Vec<ParamStat>,
}

impl EstimationCell {
    pub fn stat(&self, name: &str) -> Option<&ParamStat> {
        self.stats.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplicationReport {
    pub scenario: String,
    pub seed: u64,
    pub requested_reps: usize,
    pub truth: ModelParams,
    pub cells: Vec<EstimationCell>,
}

/// Entry names and extractors in reporting order: `A1[i,j]`, `B1[i,j]`, …, `Lambda[i,j]`.
fn flatten(params: &ModelParams) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    for l in 0..params.p() {
        for (label, mat) in [("A", &params.a()[l]), ("B", &params.b()[l])] {
            for i in 0..mat.nrows() {
                for j in 0..mat.ncols() {
                    out.push((
                        format!("{label}{}[{},{}]", l + 1, i + 1, j + 1),
                        mat[(i, j)],
                    ));
                }
            }
        }
    }
    let lam = params.lambda();
    for i in 0..lam.nrows() {
        for j in 0..lam.ncols() {
            out.push((format!("Lambda[{},{}]", i + 1, j + 1), lam[(i, j)]));
        }
    }
    out
}

/// Standard errors in [`flatten`] order, `None` where unavailable.
fn flatten_se(fit: &FitResult) -> Vec<Option<f64>> {
    let params = &fit.params;
    let mut out = Vec::new();
    let se = fit.se.as_ref();
    for l in 0..params.p() {
        for (block, dim) in [
            (se.and_then(|s| s.a.as_ref()), params.m()),
            (se.and_then(|s| s.b.as_ref()), params.n()),
        ] {
            for i in 0..dim {
                for j in 0..dim {
                    out.push(block.map(|b| b[l][(i, j)]));
                }
            }
        }
    }
    for i in 0..params.m() {
        for j in 0..params.n() {
            out.push(se.map(|s| s.lambda[(i, j)]));
        }
    }
    out
}

impl ReplicationReport {
    pub fn cell(&self, method: &str, t_len: usize) -> Option<&EstimationCell> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.t_len == t_len)
    }

    /// Aligned text table: one block per method, one row per parameter,
    /// Bias/SD/SE columns for every `T`.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "scenario {}  seed {}  replications {}\n",
            self.scenario, self.seed, self.requested_reps
        );
        let mut methods: Vec<&str> = Vec::new();
        for c in &self.cells {
            if !methods.contains(&c.method.as_str()) {
                methods.push(&c.method);
            }
        }
        for method in methods {
            let cells: Vec<&EstimationCell> =
                self.cells.iter().filter(|c| c.method == method).collect();
            out.push_str(&format!("\n{method}\n{:<14}{:>9}", "parameter", "true"));
            for c in &cells {
                let head = format!("T={}", c.t_len);
                out.push_str(&format!("  {head:>8}{:>9}{:>9}", "", ""));
            }
            out.push_str(&format!("\n{:<14}{:>9}", "", ""));
            for _ in &cells {
                out.push_str(&format!("  {:>8}{:>9}{:>9}", "Bias", "SD", "SE"));
            }
            out.push('\n');
            let names: Vec<(String, f64)> = cells
                .first()
                .map(|c| c.stats.iter().map(|s| (s.name.clone(), s.truth)).collect())
                .unwrap_or_default();
            for (k, (name, truth)) in names.iter().enumerate() {
                out.push_str(&format!("{name:<14}{truth:>9.4}"));
                for c in &cells {
                    let s = &c.stats[k];
                    let se = s.mean_se.map_or("-".to_string(), |v| format!("{v:.4}"));
                    out.push_str(&format!("  {:>8.4}{:>9.4}{:>9}", s.bias, s.sd, se));
                }
                out.push('\n');
            }
            for c in &cells {
                if c.failures > 0 || c.nonconverged > 0 {
                    out.push_str(&format!(
                        "T={}: {} failed fits, {} without convergence\n",
                        c.t_len, c.failures, c.nonconverged
                    ));
                }
            }
        }
        out
    }
}

fn summarize(
    method: &str,
    t_len: usize,
    truth: &ModelParams,
    fits: &[Result<FitResult>],
) -> Result<EstimationCell> {
    let ok: Vec<&FitResult> = fits.iter().filter_map(|f| f.as_ref().ok()).collect();
    if ok.len() < 2 {
        return Err(MatinarError::NoConvergence {
            iterations: fits.len(),
            context: format!("{method} at T={t_len}: fewer than 2 successful fits"),
        });
    }
    let k = ok.len() as f64;
    let truth_flat = flatten(truth);
    let est: Vec<Vec<f64>> = ok
        .iter()
        .map(|f| flatten(&f.params).into_iter().map(|(_, v)| v).collect())
        .collect();
    let ses: Vec<Vec<Option<f64>>> = ok.iter().map(|f| flatten_se(f)).collect();
    let stats = truth_flat
        .iter()
        .enumerate()
        .map(|(i, (name, tv))| {
            let mean = est.iter().map(|e| e[i]).sum::<f64>() / k;
            let var = est.iter().map(|e| (e[i] - mean).powi(2)).sum::<f64>() / (k - 1.0);
            let se_vals: Option<Vec<f64>> = ses.iter().map(|s| s[i]).collect();
            ParamStat {
                name: name.clone(),
                truth: *tv,
                bias: mean - tv,
                sd: var.sqrt(),
                mean_se: se_vals.map(|v| v.iter().sum::<f64>() / k),
            }
        })
        .collect();
    Ok(EstimationCell {
        method: method.into(),
        t_len,
        reps: ok.len(),
        failures: fits.len() - ok.len(),
        nonconverged: ok
            .iter()
            .filter(|f| f.iterations.as_ref().is_some_and(|i| !i.converged))
            .count(),
        stats,
    })
}

/// Bias, SD and mean SE of every parameter for each method and `T`. All
/// methods see the same simulated series within a replication.
pub fn estimation_study(
    scenario: &dyn Scenario,
    cfg: &StudyConfig,
    registry: &EstimatorRegistry,
) -> Result<ReplicationReport> {
    if cfg.reps < 2 {
        return Err(MatinarError::InvalidParameter(
            "replication count must be at least 2".into(),
        ));
    }
    let truth = scenario
        .params(&mut RngStream::new(cfg.seed, TRUTH_STREAM))?
        .normalized();
    let estimators = cfg
        .methods
        .iter()
        .map(|m| registry.create(m, &cfg.options))
        .collect::<Result<Vec<_>>>()?;
    let p = truth.p();
    let mut cells = Vec::new();
    for &t_len in &cfg.t_values {
        let per_rep: Vec<Vec<Result<FitResult>>> = (0..cfg.reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = sim_rng(cfg.seed, r, t_len);
                match simulate_rep(&truth, t_len, cfg.burn_in, &mut rng) {
                    Ok(series) => estimators
                        .iter()
                        .enumerate()
                        .map(|(k, e)| e.fit(&series, p, &fit_rng(cfg.seed, r, t_len, k)))
                        .collect(),
                    Err(e) => {
                        let msg = e.to_string();
                        estimators
                            .iter()
                            .map(|_| Err(MatinarError::InvalidParameter(msg.clone())))
                            .collect()
                    }
                }
            })
            .collect();
        for (k, est) in estimators.iter().enumerate() {
            let fits: Vec<Result<FitResult>> = per_rep
                .iter()
                .map(|row| match &row[k] {
                    Ok(f) => Ok(f.clone()),
                    Err(e) => Err(MatinarError::InvalidParameter(e.to_string())),
                })
                .collect();
            cells.push(summarize(est.name(), t_len, &truth, &fits)?);
        }
    }
    Ok(ReplicationReport {
        scenario: scenario.name().into(),
        seed: cfg.seed,
        requested_reps: cfg.reps,
        truth,
        cells,
    })
}

#[derive(Debug, Clone)]
pub struct OrderStudyConfig {
    pub seed: u64,
    pub reps: usize,
    pub t_values: Vec<usize>,
    pub p_bar: usize,
    pub burn_in: usize,
    pub method: String,
    /// Draw a fresh truth in every replication instead of one per study.
    pub redraw_truth: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderFrequency {
    pub t_len: usize,
    pub reps: usize,
    pub failures: usize,
    /// Share of successful replications with `p̂ = p`, `p̂ > p`, `p̂ < p`.
    pub correct: f64,
    pub over: f64,
    pub under: f64,
    /// `counts[k]` replications chose order `k + 1`.
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderStudyReport {
    pub scenario: String,
    pub seed: u64,
    pub method: String,
    pub p_true: usize,
    pub p_bar: usize,
    /// The study-wide truth; absent when it is redrawn per replication.
    pub truth: Option<ModelParams>,
    pub rows: Vec<OrderFrequency>,
}

impl OrderStudyReport {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "scenario {}  seed {}  method {}  p = {}  p_bar = {}\n{:>6}{:>8}{:>10}{:>10}{:>10}\n",
            self.scenario,
            self.seed,
            self.method,
            self.p_true,
            self.p_bar,
            "T",
            "reps",
            "{p^=p}",
            "{p^>p}",
            "{p^<p}"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:>6}{:>8}{:>10.3}{:>10.3}{:>10.3}\n",
                r.t_len, r.reps, r.correct, r.over, r.under
            ));
        }
        out
    }
}

/// Frequency with which IC₁ recovers the true order at each `T`.
pub fn order_study(
    scenario: &dyn Scenario,
    cfg: &OrderStudyConfig,
    registry: &EstimatorRegistry,
) -> Result<OrderStudyReport> {
    if cfg.reps < 2 {
        return Err(MatinarError::InvalidParameter(
            "replication count must be at least 2".into(),
        ));
    }
    let estimator = registry.create(&cfg.method, &EstimatorOptions::point_only())?;
    let fixed_truth = if cfg.redraw_truth && scenario.is_random() {
        None
    } else {
        Some(scenario.params(&mut RngStream::new(cfg.seed, TRUTH_STREAM))?)
    };
    let p_true = match &fixed_truth {
        Some(t) => t.p(),
        None => scenario
            .params(&mut RngStream::new(cfg.seed, 0).derive(TRUTH_STREAM))?
            .p(),
    };
    let mut rows = Vec::new();
    for &t_len in &cfg.t_values {
        let picks: Vec<Option<usize>> = (0..cfg.reps)
            .into_par_iter()
            .map(|r| {
                let truth = match &fixed_truth {
                    Some(t) => t.clone(),
                    None => scenario
                        .params(&mut RngStream::new(cfg.seed, r as u64).derive(TRUTH_STREAM))
                        .ok()?,
                };
                let mut rng = sim_rng(cfg.seed, r, t_len);
                let series = simulate_rep(&truth, t_len, cfg.burn_in, &mut rng).ok()?;
                select_order(
                    &series,
                    cfg.p_bar,
                    estimator.as_ref(),
                    &fit_rng(cfg.seed, r, t_len, 0),
                )
                .ok()
                .map(|s| s.p_hat)
            })
            .collect();
        let mut counts = vec![0usize; cfg.p_bar];
        for p in picks.iter().flatten() {
            counts[p - 1] += 1;
        }
        let ok: usize = counts.iter().sum();
        let share = |n: usize| if ok == 0 { 0.0 } else { n as f64 / ok as f64 };
        let correct = counts.get(p_true - 1).copied().unwrap_or(0);
        let under: usize = counts.iter().take(p_true - 1).sum();
        rows.push(OrderFrequency {
            t_len,
            reps: ok,
            failures: cfg.reps - ok,
            correct: share(correct),
            over: share(ok - correct - under),
            under: share(under),
            counts,
        });
    }
    Ok(OrderStudyReport {
        scenario: scenario.name().into(),
        seed: cfg.seed,
        method: cfg.method.clone(),
        p_true,
        p_bar: cfg.p_bar,
        truth: fixed_truth,
        rows,
    })
}
