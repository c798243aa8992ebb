//! Multi-step forecasts and in/out-of-sample accuracy measures.

use serde::{Deserialize, Serialize};

use crate::error::{MatinarError, Result};
use crate::linalg::RealMatrix;
use crate::process::{conditional_mean, ModelParams};

/// How to turn real-valued conditional means into count forecasts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rounding {
    Nearest,
    Floor,
}

impl Rounding {
    /// Negative means round to zero.
    pub fn apply(self, m: &RealMatrix) -> RealMatrix {
        m.map(|v| match self {
            Rounding::Nearest => v.max(0.0).round(),
            Rounding::Floor => v.max(0.0).floor(),
        })
    }
}

/// Forecasts `Ŷ_origin(h)`, `h = 1..=horizon`, from data up to `origin`.
#[derive(Debug, Clone, Serialize)]
pub struct ForecastPath {
    /// Number of observations the forecast conditions on.
    pub origin: usize,
    pub horizon: usize,
    #[serde(with = "crate::io::rows_vec")]
    pub means: Vec<RealMatrix>,
    #[serde(
        with = "crate::io::rows_opt_vec",
        skip_serializing_if = "Option::is_none"
    )]
    pub rounded: Option<Vec<RealMatrix>>,
}

impl ForecastPath {
    pub fn with_rounding(mut self, mode: Rounding) -> Self {
        self.rounded = Some(self.means.iter().map(|m| mode.apply(m)).collect());
        self
    }
}

/// Iterated conditional expectation: `Ŷ(h) = Σ_l A_l Ỹ(h-l) B_lᵀ + Λ`, with
/// `Ỹ(k)` the observation for `k <= 0` and the earlier forecast for `k >= 1`.
pub fn forecast(
    params: &ModelParams,
    history: &[RealMatrix],
    horizon: usize,
) -> Result<ForecastPath> {
    let p = params.p();
    if history.len() < p {
        return Err(MatinarError::SeriesTooShort(format!(
            "forecasting needs {p} observations of history, got {}",
            history.len()
        )));
    }
    let mut window: Vec<RealMatrix> = history[history.len() - p..].to_vec();
    let mut means = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let next = conditional_mean(params, &window)?;
        window.remove(0);
        window.push(next.clone());
        means.push(next);
    }
    Ok(ForecastPath {
        origin: history.len(),
        horizon,
        means,
        rounded: None,
    })
}

/// `(1/T) Σ_{t=p+1}^T ‖Y_t - E(Y_t | Y_{t-1}, …, Y_{t-p})‖_F`.
pub fn mrss(params: &ModelParams, series: &[RealMatrix]) -> Result<f64> {
    let p = params.p();
    if series.len() <= p {
        return Err(MatinarError::SeriesTooShort(format!(
            "MRSS needs more than {p} observations, got {}",
            series.len()
        )));
    }
    let mut total = 0.0;
    for t in p..series.len() {
        total += (&series[t] - conditional_mean(params, &series[t - p..t])?).norm();
    }
    Ok(total / series.len() as f64)
}

/// `‖Ŷ_origin(h) - Y_{origin+h}‖_F` for `h = 1..=horizon`; `origin` counts
/// the observations used as history.
pub fn prediction_errors(
    params: &ModelParams,
    series: &[RealMatrix],
    origin: usize,
    horizon: usize,
) -> Result<Vec<f64>> {
    if horizon == 0 {
        return Err(MatinarError::InvalidParameter(
            "horizon must be at least 1".into(),
        ));
    }
    if origin + horizon > series.len() {
        return Err(MatinarError::SeriesTooShort(format!(
            "horizon {horizon} from origin {origin} exceeds the {} available observations",
            series.len()
        )));
    }
    let path = forecast(params, &series[..origin], horizon)?;
    Ok(path
        .means
        .iter()
        .zip(&series[origin..origin + horizon])
        .map(|(f, y)| (f - y).norm())
        .collect())
}

/// `(1/H) Σ_{h=1}^H ‖Ŷ_origin(h) - Y_{origin+h}‖_F`.
pub fn mspe(
    params: &ModelParams,
    series: &[RealMatrix],
    origin: usize,
    horizon: usize,
) -> Result<f64> {
    let errs = prediction_errors(params, series, origin, horizon)?;
    Ok(errs.iter().sum::<f64>() / horizon as f64)
}

/// Running means `CMPE_S = (1/S) Σ_{h=1}^S ‖Ŷ(h) - Y_{origin+h}‖_F`.
pub fn cmpe(
    params: &ModelParams,
    series: &[RealMatrix],
    origin: usize,
    horizon: usize,
) -> Result<Vec<f64>> {
    let errs = prediction_errors(params, series, origin, horizon)?;
    let mut acc = 0.0;
    Ok(errs
        .iter()
        .enumerate()
        .map(|(i, e)| {
            acc += e;
            acc / (i + 1) as f64
        })
        .collect())
}

/// CSV `S,cmpe,log_cmpe` for plotting.
pub fn cmpe_csv(curve: &[f64]) -> String {
    let mut out = String::from("S,cmpe,log_cmpe\n");
    for (i, v) in curve.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", i + 1, v, v.ln()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kron, vec};
    use crate::process::{simulate_poisson, stationary_mean};

    fn scenario_a() -> ModelParams {
        let at = RealMatrix::from_row_slice(2, 2, &[0.2, 0.4, 0.4, 0.2]);
        let a = &at / at.norm();
        let b = RealMatrix::from_row_slice(2, 2, &[0.5, 0.3, 0.3, 0.5]);
        ModelParams::new(vec![a], vec![b], RealMatrix::from_element(2, 2, 1.0)).unwrap()
    }

    fn order_two() -> ModelParams {
        ModelParams::new(
            vec![
                RealMatrix::from_row_slice(2, 2, &[0.6, 0.2, 0.1, 0.7]),
                RealMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.5, 0.2]),
            ],
            vec![
                RealMatrix::from_row_slice(2, 2, &[0.4, 0.1, 0.2, 0.3]),
                RealMatrix::from_row_slice(2, 2, &[0.2, 0.2, 0.0, 0.3]),
            ],
            RealMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.5, 1.5]),
        )
        .unwrap()
    }

    #[test]
    fn zero_coefficients_forecast_lambda() {
        let lam = RealMatrix::from_row_slice(1, 2, &[2.0, 3.0]);
        let params = ModelParams::zeros(2, lam.clone()).unwrap();
        let hist = vec![RealMatrix::from_element(1, 2, 9.0); 3];
        let path = forecast(&params, &hist, 4).unwrap();
        assert!(path.means.iter().all(|m| *m == lam));
        assert!(forecast(&params, &hist[..1], 1).is_err());
    }

    #[test]
    fn first_step_is_conditional_mean_and_converges_to_mu() {
        let params = scenario_a();
        let hist = simulate_poisson(&params, 20, 50, 2).unwrap().to_real();
        let path = forecast(&params, &hist, 50).unwrap();
        assert_eq!(path.means[0], conditional_mean(&params, &hist).unwrap());
        let mu = stationary_mean(&params).unwrap();
        // the gap contracts by ρ ≈ 0.759 per step: ρ^50 ≈ 1.0e-6 times the start gap
        let rho = 0.6 / 0.4f64.sqrt() * 0.8;
        let gap0 = (hist.last().unwrap() - &mu).norm();
        assert!((&path.means[49] - &mu).norm() <= 1.01 * rho.powi(50) * gap0 + 1e-12);
        // starting from the count matrix nearest μ (all 4s; μ ≈ 4.15) gets within 1e-6
        let near = vec![RealMatrix::from_element(2, 2, 4.0)];
        let path = forecast(&params, &near, 50).unwrap();
        assert!((&path.means[49] - &mu).norm() < 1e-6);
    }

    #[test]
    fn matches_vectorised_recursion() {
        let params = order_two();
        let hist = simulate_poisson(&params, 10, 50, 3).unwrap().to_real();
        let path = forecast(&params, &hist, 6).unwrap();
        let phis: Vec<RealMatrix> = params
            .a()
            .iter()
            .zip(params.b())
            .map(|(a, b)| kron(b, a))
            .collect();
        let mut vs: Vec<_> = hist.iter().map(vec).collect();
        for h in 0..6 {
            let k = vs.len();
            let next = vec(params.lambda()) + &phis[0] * &vs[k - 1] + &phis[1] * &vs[k - 2];
            assert!((vec(&path.means[h]) - &next).amax() < 1e-12);
            vs.push(next);
        }
    }

    #[test]
    fn rounding_modes() {
        let path = ForecastPath {
            origin: 0,
            horizon: 1,
            means: vec![RealMatrix::from_row_slice(1, 3, &[1.5, 2.7, -0.4])],
            rounded: None,
        };
        let r = path
            .clone()
            .with_rounding(Rounding::Nearest)
            .rounded
            .unwrap();
        assert_eq!(r[0], RealMatrix::from_row_slice(1, 3, &[2.0, 3.0, 0.0]));
        let r = path.with_rounding(Rounding::Floor).rounded.unwrap();
        assert_eq!(r[0], RealMatrix::from_row_slice(1, 3, &[1.0, 2.0, 0.0]));
    }

    #[test]
    fn scalar_mrss_by_hand() {
        // y_t = 0.5 y_{t-1} + 1 on 1, 2, 4, 2:
        // fitted 1.5, 2, 3 → |0.5| + |2| + |-1| = 3.5, divided by T = 4
        let params = ModelParams::new(
            vec![RealMatrix::from_element(1, 1, 1.0)],
            vec![RealMatrix::from_element(1, 1, 0.5)],
            RealMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let s: Vec<RealMatrix> = [1.0, 2.0, 4.0, 2.0]
            .iter()
            .map(|v| RealMatrix::from_element(1, 1, *v))
            .collect();
        assert!((mrss(&params, &s).unwrap() - 0.875).abs() < 1e-15);
    }

    #[test]
    fn perfect_fit_has_zero_error() {
        let params = scenario_a();
        let mut s = vec![RealMatrix::from_element(2, 2, 3.0)];
        for _ in 0..10 {
            let next = conditional_mean(&params, &s).unwrap();
            s.push(next);
        }
        assert!(mrss(&params, &s).unwrap() < 1e-12);
        assert!(mspe(&params, &s, 4, 5).unwrap() < 1e-12);
    }

    #[test]
    fn cmpe_identities() {
        let params = order_two();
        let s = simulate_poisson(&params, 60, 50, 4).unwrap().to_real();
        let errs = prediction_errors(&params, &s, 40, 12).unwrap();
        let curve = cmpe(&params, &s, 40, 12).unwrap();
        assert_eq!(curve[0], errs[0]);
        assert!((curve[11] - mspe(&params, &s, 40, 12).unwrap()).abs() < 1e-12);
        for k in 1..12 {
            let s_k = (k + 1) as f64;
            assert!((s_k * curve[k] - (s_k - 1.0) * curve[k - 1] - errs[k]).abs() < 1e-9);
        }
        assert_eq!(cmpe_csv(&curve).lines().count(), 13);
        assert!(mspe(&params, &s, 55, 6).is_err());
        assert!(mspe(&params, &s, 55, 0).is_err());
    }

    #[test]
    fn metrics_are_gauge_invariant() {
        let params = scenario_a();
        let scaled = ModelParams::new(
            vec![&params.a()[0] * 4.0],
            vec![&params.b()[0] / 4.0],
            params.lambda().clone(),
        )
        .unwrap();
        let s = simulate_poisson(&params, 50, 50, 5).unwrap().to_real();
        assert!((mrss(&params, &s).unwrap() - mrss(&scaled, &s).unwrap()).abs() < 1e-12);
        let (c1, c2) = (
            cmpe(&params, &s, 30, 10).unwrap(),
            cmpe(&scaled, &s, 30, 10).unwrap(),
        );
        assert!(c1.iter().zip(&c2).all(|(x, y)| (x - y).abs() < 1e-12));
    }
}
