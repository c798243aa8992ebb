//! One function per subcommand. Each validates its inputs and output
//! directory before doing any work, writes JSON/CSV files under `--out`,
//! and prints a short human-readable summary.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use matinar::diagnostics::{
    diagnose as run_diagnostics, portmanteau, PortmanteauRow, PORTMANTEAU_METHOD,
};
use matinar::estimate::{EstimatorOptions, EstimatorRegistry, IterationInfo, ParamSe};
use matinar::forecast::{cmpe, cmpe_csv, forecast as run_forecast, mrss, ForecastPath, Rounding};
use matinar::io::{read_params_file, read_series_file, write_params_file, write_series_file};
use matinar::linalg::RealMatrix;
use matinar::order::{select_order as run_select_order, OrderSelection};
use matinar::process::{
    check_stationary, simulate as run_simulate, to_rows, ModelParams, PoissonInnovations,
    SimulationOptions,
};
use matinar::replicate::{estimation_study, order_study, OrderStudyConfig, StudyConfig};
use matinar::scenario::ScenarioRegistry;
use matinar::thinning::RngStream;
use matinar::MatinarError;
use serde::Serialize;

use crate::meta::RunMeta;
use crate::{DiagnoseArgs, FitArgs, ForecastArgs, ReplicateArgs, SelectOrderArgs, SimulateArgs};

/// Stream reserved for drawing random scenario coefficients, matching the
/// study harness.
const TRUTH_STREAM: u64 = u64::MAX;
/// Streams for the fit itself and for order selection ahead of it.
const FIT_STREAM: u64 = 0;
const ORDER_STREAM: u64 = 1;

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| format!("cannot write {}", path.display()))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn load_series(path: &Path) -> Result<Vec<RealMatrix>> {
    let series =
        read_series_file(path).with_context(|| format!("reading series {}", path.display()))?;
    Ok(series.to_real())
}

fn load_params(path: &Path) -> Result<ModelParams> {
    read_params_file(path).with_context(|| format!("reading parameters {}", path.display()))
}

/// Length of the training prefix, checked against the series.
fn train_len(train: Option<usize>, len: usize) -> Result<usize> {
    match train {
        None => Ok(len),
        Some(n) if n >= 1 && n <= len => Ok(n),
        Some(n) => Err(MatinarError::InvalidParameter(format!(
            "--train {n} must lie between 1 and the series length {len}"
        ))
        .into()),
    }
}

fn format_matrix(m: &RealMatrix) -> String {
    to_rows(m)
        .iter()
        .map(|r| r.iter().map(|v| format!("{v:>10.4}")).collect::<String>())
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Serialize)]
struct SimulateReport {
    meta: RunMeta,
    source: String,
    t_len: usize,
    burn_in: usize,
    spectral_radius: f64,
    stationary: bool,
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    prepare_out(&args.out)?;
    let meta = RunMeta::new("simulate", Some(args.seed), args)?;
    let (params, source) = match (&args.scenario, &args.params) {
        (Some(name), _) => {
            let registry = ScenarioRegistry::builtin();
            let scenario = registry.get(name)?;
            (
                scenario.params(&mut RngStream::new(args.seed, TRUTH_STREAM))?,
                format!("scenario {name}"),
            )
        }
        (None, Some(path)) => (load_params(path)?, format!("params {}", path.display())),
        (None, None) => unreachable!("clap requires --scenario or --params"),
    };
    let st = check_stationary(&params)?;
    println!("spectral radius of the companion matrix: {:.6}", st.radius);
    if !st.stationary && !args.force_nonstationary {
        return Err(
            anyhow::Error::new(MatinarError::NonStationary { radius: st.radius })
                .context("refusing to simulate; pass --force-nonstationary to override"),
        );
    }
    let innovations = PoissonInnovations::new(params.lambda())?;
    let opts = SimulationOptions {
        burn_in: args.burn_in,
        force_nonstationary: args.force_nonstationary,
    };
    let series = run_simulate(
        &params,
        args.t_len,
        opts,
        &innovations,
        &mut RngStream::new(args.seed, 0),
    )?;
    write_series_file(&series, &args.out.join("series.csv"))?;
    write_params_file(&params, &args.out.join("params.json"))?;
    write_json(
        &args.out,
        "simulate.json",
        &SimulateReport {
            meta,
            source,
            t_len: args.t_len,
            burn_in: args.burn_in,
            spectral_radius: st.radius,
            stationary: st.stationary,
        },
    )?;
    let (m, n) = series.shape();
    println!(
        "wrote {} observations of {m}x{n} counts to {}",
        series.len(),
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ResidualDiagnostics {
    mrss: f64,
    portmanteau_method: &'static str,
    portmanteau: Option<Vec<PortmanteauRow>>,
    portmanteau_error: Option<String>,
}

#[derive(Serialize)]
struct FitReport {
    meta: RunMeta,
    method: String,
    p: usize,
    order_selection: Option<OrderSelection>,
    n_obs: usize,
    estimates: ModelParams,
    standard_errors: Option<ParamSe>,
    phi_standard_errors: Option<Vec<Vec<Vec<f64>>>>,
    rss: f64,
    condition_number: Option<f64>,
    convergence: Option<IterationInfo>,
    warnings: Vec<String>,
    diagnostics: ResidualDiagnostics,
}

pub fn fit(args: &FitArgs) -> Result<()> {
    prepare_out(&args.out)?;
    let meta = RunMeta::new("fit", Some(args.seed), args)?;
    let series = load_series(&args.data)?;
    let obs = &series[..train_len(args.train, series.len())?];
    let registry = EstimatorRegistry::builtin();
    let opts = EstimatorOptions {
        bootstrap_reps: args.bootstrap_reps,
        ..EstimatorOptions::default()
    };
    let estimator = registry.create(&args.method, &opts)?;
    let (p, selection) = match args.p {
        Some(p) => (p, None),
        None => {
            let light = registry.create(&args.method, &EstimatorOptions::point_only())?;
            let sel = run_select_order(
                obs,
                args.p_bar,
                light.as_ref(),
                &RngStream::new(args.seed, ORDER_STREAM),
            )?;
            (sel.p_hat, Some(sel))
        }
    };
    let fit = estimator.fit(obs, p, &RngStream::new(args.seed, FIT_STREAM))?;
    let max_delay = args.max_delay.min(fit.residuals.len().saturating_sub(1));
    let (table, table_err) = match portmanteau(&fit.residuals, max_delay) {
        Ok(rows) => (Some(rows), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let diagnostics = ResidualDiagnostics {
        mrss: mrss(&fit.params, obs)?,
        portmanteau_method: PORTMANTEAU_METHOD,
        portmanteau: table,
        portmanteau_error: table_err,
    };

    println!(
        "{} fit of order {p} on {} observations, RSS {:.4}",
        fit.method,
        obs.len(),
        fit.rss
    );
    for l in 0..p {
        println!("A{}:\n{}", l + 1, format_matrix(&fit.params.a()[l]));
        println!("B{}:\n{}", l + 1, format_matrix(&fit.params.b()[l]));
    }
    println!("Lambda:\n{}", format_matrix(fit.params.lambda()));
    if let Some(it) = &fit.iterations {
        println!("sweeps {}, converged {}", it.sweeps, it.converged);
    }
    for w in &fit.warnings {
        eprintln!("warning: {w}");
    }

    write_params_file(&fit.params, &args.out.join("params.json"))?;
    write_json(
        &args.out,
        "fit.json",
        &FitReport {
            meta,
            method: fit.method.clone(),
            p,
            order_selection: selection,
            n_obs: fit.n_obs,
            estimates: fit.params.clone(),
            standard_errors: fit.se.clone(),
            phi_standard_errors: fit.se_phi.as_ref().map(|v| v.iter().map(to_rows).collect()),
            rss: fit.rss,
            condition_number: fit.condition_number,
            convergence: fit.iterations.clone(),
            warnings: fit.warnings.clone(),
            diagnostics,
        },
    )
}

#[derive(Serialize)]
struct OrderReport {
    meta: RunMeta,
    selection: OrderSelection,
}

pub fn select_order(args: &SelectOrderArgs) -> Result<()> {
    prepare_out(&args.out)?;
    let meta = RunMeta::new("select-order", Some(args.seed), args)?;
    let series = load_series(&args.data)?;
    let obs = &series[..train_len(args.train, series.len())?];
    let estimator =
        EstimatorRegistry::builtin().create(&args.method, &EstimatorOptions::point_only())?;
    let selection = run_select_order(
        obs,
        args.p_bar,
        estimator.as_ref(),
        &RngStream::new(args.seed, ORDER_STREAM),
    )?;
    println!("{:>8}{:>14}", "p", "IC1");
    for (i, v) in selection.ic_values.iter().enumerate() {
        let mark = if i + 1 == selection.p_hat { "  <" } else { "" };
        println!("{:>8}{:>14.6}{mark}", i + 1, v);
    }
    println!("selected order: {}", selection.p_hat);
    write_text(&args.out, "ic_curve.csv", &selection.to_csv())?;
    write_json(&args.out, "order.json", &OrderReport { meta, selection })
}

#[derive(Serialize)]
struct ForecastReport {
    meta: RunMeta,
    forecast: ForecastPath,
    /// Present when the series extends `horizon` steps past the origin.
    mspe: Option<f64>,
    cmpe: Option<Vec<f64>>,
}

pub fn forecast(args: &ForecastArgs) -> Result<()> {
    prepare_out(&args.out)?;
    let meta = RunMeta::new("forecast", None, args)?;
    let params = load_params(&args.params)?;
    let series = load_series(&args.data)?;
    let origin = train_len(args.train, series.len())?;
    if args.horizon == 0 {
        return Err(MatinarError::InvalidParameter("--horizon must be at least 1".into()).into());
    }
    let mut path = run_forecast(&params, &series[..origin], args.horizon)?;
    if let Some(mode) = &args.rounding {
        path = path.with_rounding(if mode == "floor" {
            Rounding::Floor
        } else {
            Rounding::Nearest
        });
    }
    let curve = if origin + args.horizon <= series.len() {
        let c = cmpe(&params, &series, origin, args.horizon)?;
        write_text(&args.out, "cmpe.csv", &cmpe_csv(&c))?;
        Some(c)
    } else {
        None
    };
    for (h, m) in path.means.iter().enumerate() {
        println!("h = {}:\n{}", h + 1, format_matrix(m));
    }
    if let Some(c) = &curve {
        println!(
            "MSPE over {} held-out steps: {:.6}",
            args.horizon,
            c[args.horizon - 1]
        );
    }
    write_json(
        &args.out,
        "forecast.json",
        &ForecastReport {
            meta,
            forecast: path,
            mspe: curve.as_ref().map(|c| c[args.horizon - 1]),
            cmpe: curve,
        },
    )
}

#[derive(Serialize)]
struct DiagnoseReport {
    meta: RunMeta,
    train_len: usize,
    #[serde(flatten)]
    report: matinar::diagnostics::DiagnosticsReport,
}

pub fn diagnose(args: &DiagnoseArgs) -> Result<()> {
    prepare_out(&args.out)?;
    let meta = RunMeta::new("diagnose", None, args)?;
    let params = load_params(&args.params)?;
    let series = load_series(&args.data)?;
    let train = train_len(args.train, series.len())?;
    let report = run_diagnostics(&params, &series, train, args.horizon, args.max_delay)?;
    println!(
        "MRSS (training part, {train} observations): {:.6}",
        report.mrss
    );
    if let Some(v) = report.mspe {
        println!("MSPE over {} held-out steps: {v:.6}", args.horizon);
    }
    println!("{:>6}{:>14}{:>8}{:>10}", "delay", "Q", "df", "p-value");
    for r in &report.portmanteau {
        println!(
            "{:>6}{:>14.4}{:>8}{:>10.4}",
            r.delay, r.statistic, r.df, r.p_value
        );
    }
    if let Some(c) = &report.cmpe {
        write_text(&args.out, "cmpe.csv", &cmpe_csv(c))?;
    }
    write_json(
        &args.out,
        "diagnostics.json",
        &DiagnoseReport {
            meta,
            train_len: train,
            report,
        },
    )
}

#[derive(Serialize)]
struct ReplicateReport<T: Serialize> {
    meta: RunMeta,
    report: T,
}

pub fn replicate(args: &ReplicateArgs) -> Result<()> {
    prepare_out(&args.out)?;
    let meta = RunMeta::new("replicate", Some(args.seed), args)?;
    let scenarios = ScenarioRegistry::builtin();
    let scenario = scenarios.get(&args.scenario)?;
    let registry = EstimatorRegistry::builtin();
    let text = if args.order_study {
        let [method] = args.method.as_slice() else {
            return Err(MatinarError::InvalidParameter(
                "the order study takes exactly one --method".into(),
            )
            .into());
        };
        let cfg = OrderStudyConfig {
            seed: args.seed,
            reps: args.reps,
            t_values: args.t_values.clone(),
            p_bar: args.p_bar,
            burn_in: args.burn_in,
            method: method.clone(),
            redraw_truth: !args.fixed_truth,
        };
        let report = order_study(scenario, &cfg, &registry)?;
        let text = report.to_text();
        write_json(
            &args.out,
            "replicate.json",
            &ReplicateReport { meta, report },
        )?;
        text
    } else {
        let mut cfg = StudyConfig::new(
            args.seed,
            args.reps,
            args.t_values.clone(),
            args.method.clone(),
        );
        cfg.burn_in = args.burn_in;
        cfg.options.bootstrap_reps = args.bootstrap_reps;
        let report = estimation_study(scenario, &cfg, &registry)?;
        let text = report.to_text();
        write_json(
            &args.out,
            "replicate.json",
            &ReplicateReport { meta, report },
        )?;
        text
    };
    print!("{text}");
    write_text(&args.out, "replicate.txt", &text)
}
