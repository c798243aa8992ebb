//! Residual portmanteau tests and the combined diagnostics report.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{MatinarError, Result};
use crate::estimate::model_residuals;
use crate::forecast::{cmpe, mrss};
use crate::linalg::RealMatrix;
use crate::process::ModelParams;

pub const PORTMANTEAU_METHOD: &str =
    "Hosking multivariate portmanteau; chi-square reference with (mn)^2 K degrees of freedom, not reduced for estimated parameters";

#[derive(Debug, Clone, Serialize)]
pub struct PortmanteauRow {
    pub delay: usize,
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
}

/// `Q(K) = T² Σ_{h=1}^K (T-h)⁻¹ tr(Ĉ_hᵀ Ĉ_0⁻¹ Ĉ_h Ĉ_0⁻¹)` for `K = 1..=max_delay`,
/// where `Ĉ_h = (1/T) Σ_t u_t u_{t-h}ᵀ` over the mean-centred residual
/// vectors `u_t = vec(Û_t)`.
pub fn portmanteau(residuals: &[RealMatrix], max_delay: usize) -> Result<Vec<PortmanteauRow>> {
    let t_len = residuals.len();
    if max_delay == 0 || max_delay >= t_len {
        return Err(MatinarError::SeriesTooShort(format!(
            "portmanteau delays 1..{max_delay} need more than {max_delay} residuals, got {t_len}"
        )));
    }
    let d = residuals[0].len();
    let mut mean = RealMatrix::zeros(d, 1);
    for u in residuals {
        mean += RealMatrix::from_column_slice(d, 1, u.as_slice());
    }
    mean /= t_len as f64;
    let cols: Vec<RealMatrix> = residuals
        .iter()
        .map(|u| RealMatrix::from_column_slice(d, 1, u.as_slice()) - &mean)
        .collect();
    let autocov = |h: usize| {
        let mut c = RealMatrix::zeros(d, d);
        for t in h..t_len {
            c += &cols[t] * cols[t - h].transpose();
        }
        c / t_len as f64
    };
    let c0_inv = autocov(0)
        .cholesky()
        .ok_or_else(|| MatinarError::Singular("lag-0 residual covariance".into()))?
        .inverse();
    let tf = t_len as f64;
    let mut q = 0.0;
    let mut rows = Vec::with_capacity(max_delay);
    for h in 1..=max_delay {
        let ch = autocov(h);
        let term = (ch.transpose() * &c0_inv * &ch * &c0_inv).trace();
        q += tf * tf / (tf - h as f64) * term;
        let df = (d * d * h) as f64;
        let chi = ChiSquared::new(df).expect("positive degrees of freedom");
        rows.push(PortmanteauRow {
            delay: h,
            statistic: q,
            df,
            p_value: chi.sf(q).clamp(0.0, 1.0),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    /// In-sample mean residual norm over the training part.
    pub mrss: f64,
    pub mspe: Option<f64>,
    pub cmpe: Option<Vec<f64>>,
    pub portmanteau_method: &'static str,
    pub portmanteau: Vec<PortmanteauRow>,
}

/// MRSS and residual portmanteau on `series[..train_len]`; MSPE/CMPE for
/// `horizon` steps past `train_len` when a positive horizon is given.
pub fn diagnose(
    params: &ModelParams,
    series: &[RealMatrix],
    train_len: usize,
    horizon: usize,
    max_delay: usize,
) -> Result<DiagnosticsReport> {
    if train_len > series.len() {
        return Err(MatinarError::InvalidParameter(format!(
            "training length {train_len} exceeds the {} observations",
            series.len()
        )));
    }
    let train = &series[..train_len];
    let resid = model_residuals(params, train)?;
    let (mspe, cmpe) = if horizon > 0 {
        let curve = cmpe(params, series, train_len, horizon)?;
        (Some(curve[horizon - 1]), Some(curve))
    } else {
        (None, None)
    };
    Ok(DiagnosticsReport {
        mrss: mrss(params, train)?,
        mspe,
        cmpe,
        portmanteau_method: PORTMANTEAU_METHOD,
        portmanteau: portmanteau(&resid, max_delay)?,
    })
}
