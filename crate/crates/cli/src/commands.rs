use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use deplm::covariance::covariance_estimate;
use deplm::diagnostics::{design_diagnostics, rho_stability};
use deplm::inference::report_json;
use deplm::simulation::{
    format_table, replication_data, run_level_power, write_table, BandwidthChoice, ModelId,
    ModelSpec, MonteCarloConfig, MonteCarloResult,
};
use deplm::{
    auto_bandwidth, autocovariance, check_bandwidth_rate, fit_ols, joint_test, t_test, Bandwidth,
    CovarianceEstimate, DesignMatrix, Error, Execution, KernelId, RegressionFit, ResponseVector,
    TaperKernel,
};
use serde::Serialize;

use crate::error::CliError;
use crate::io::{emit, read_table};
use crate::{
    AutocovArgs, BandwidthArg, CovArgs, DataArgs, DiagnoseArgs, FitArgs, Format, SimulateArgs,
    TestArgs,
};

struct Prepared {
    names: Vec<String>,
    x: DesignMatrix,
    y: Option<ResponseVector>,
}

/// Splits the input table into response and design.
fn prepare(data: &DataArgs, require_response: bool) -> Result<Prepared, CliError> {
    let table = read_table(&data.input)?;
    let response = match &data.response {
        Some(key) => Some(table.column_index(key)?),
        None if require_response => return Err(CliError::input("--response is required")),
        None => None,
    };
    let mut names = Vec::new();
    let mut columns = Vec::new();
    if data.add_intercept {
        names.push("(intercept)".to_string());
        columns.push(vec![1.0; table.rows()]);
    }
    for (i, (name, col)) in table.headers.iter().zip(&table.columns).enumerate() {
        if Some(i) != response {
            names.push(name.clone());
            columns.push(col.clone());
        }
    }
    if columns.is_empty() {
        return Err(CliError::input(
            "the design has no columns; add regressors or --add-intercept",
        ));
    }
    Ok(Prepared {
        names,
        x: DesignMatrix::from_columns(&columns)?,
        y: response.map(|r| ResponseVector::new(table.columns[r].clone())),
    })
}

fn fit_prepared(data: &DataArgs) -> Result<(Prepared, RegressionFit), CliError> {
    let prepared = prepare(data, true)?;
    let y = prepared.y.as_ref().expect("response present");
    let fit = fit_ols(&prepared.x, y)?;
    Ok((prepared, fit))
}

fn kernel_of(id: KernelId) -> TaperKernel {
    let kernel = TaperKernel::from(id);
    if kernel.is_diagnostic_only() {
        eprintln!("note: the rectangular kernel is for diagnostics; C_n may be indefinite");
    }
    kernel
}

fn bandwidth_for(
    choice: BandwidthArg,
    series: &[f64],
    kernel: &TaperKernel,
) -> Result<Bandwidth, CliError> {
    let bw = match choice {
        BandwidthArg::Auto => auto_bandwidth(series, kernel)?,
        BandwidthArg::Fixed(h) => Bandwidth::new(h, kernel, series.len())?,
    };
    if check_bandwidth_rate(&bw, series.len(), 2.0).warning {
        eprintln!(
            "note: h = {} is large relative to n = {}; the estimate may not be consistent",
            bw.h(),
            series.len()
        );
    }
    Ok(bw)
}

/// `C_n` for a fit, refusing estimates that are not positive semi-definite.
fn estimate(
    fit: &RegressionFit,
    x: &DesignMatrix,
    cov: &CovArgs,
) -> Result<CovarianceEstimate, CliError> {
    let kernel = kernel_of(cov.kernel.into());
    let bw = bandwidth_for(cov.bandwidth, fit.residuals.as_slice(), &kernel)?;
    let est = covariance_estimate(fit, x, &kernel, &bw)?;
    if !est.psd {
        return Err(Error::NotPositiveDefinite {
            eigenvalue: est.min_eigenvalue,
        }
        .into());
    }
    Ok(est)
}

fn json_line<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("json serialization");
    out.push(b'\n');
    out
}

#[derive(Serialize)]
struct CoefficientReport<'a> {
    index: usize,
    column: &'a str,
    beta_hat: f64,
    d: f64,
    statistic: f64,
    p_value: f64,
    reject_at_5pct: bool,
}

#[derive(Serialize)]
struct FitReport<'a> {
    n: usize,
    p: usize,
    columns: &'a [String],
    beta_hat: Vec<f64>,
    d: &'a [f64],
    bandwidth: f64,
    kernel: KernelId,
    psd: bool,
    min_eigenvalue: f64,
    covariance: Vec<Vec<f64>>,
    coefficients: Vec<CoefficientReport<'a>>,
}

fn render_fit_table(report: &FitReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "n = {}, p = {}, kernel = {}, h = {}",
        report.n, report.p, report.kernel, report.bandwidth
    );
    let _ = writeln!(
        s,
        "{:>3} {:>16} {:>14} {:>14} {:>10} {:>10} {:>6}",
        "j", "column", "beta_hat", "d", "T", "p", "reject"
    );
    for c in &report.coefficients {
        let _ = writeln!(
            s,
            "{:>3} {:>16} {:>14.6e} {:>14.6e} {:>10.4} {:>10.4} {:>6}",
            c.index, c.column, c.beta_hat, c.d, c.statistic, c.p_value, c.reject_at_5pct
        );
    }
    let _ = writeln!(s, "C_n:");
    for row in &report.covariance {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>14.6e}")).collect();
        let _ = writeln!(s, "{}", cells.join(" "));
    }
    s
}

pub fn fit(args: &FitArgs) -> Result<(), CliError> {
    let (prepared, fit) = fit_prepared(&args.data)?;
    let est = estimate(&fit, &prepared.x, &args.cov)?;
    let d = fit.scaling.diag();
    let coefficients = (0..fit.p())
        .map(|j| {
            let t = t_test(&fit, &est, j)?;
            Ok(CoefficientReport {
                index: j,
                column: &prepared.names[j],
                beta_hat: fit.beta_hat[j],
                d: d[j],
                statistic: t.statistic,
                p_value: t.p_value,
                reject_at_5pct: t.reject_at_5pct,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let report = FitReport {
        n: fit.n(),
        p: fit.p(),
        columns: &prepared.names,
        beta_hat: fit.beta_hat.iter().copied().collect(),
        d,
        bandwidth: est.bandwidth.h(),
        kernel: est.kernel,
        psd: est.psd,
        min_eigenvalue: est.min_eigenvalue,
        covariance: est.rows(),
        coefficients,
    };
    let body = match args.format {
        Format::Json => json_line(&report),
        Format::Table => render_fit_table(&report).into_bytes(),
    };
    if let Some(path) = &args.covariance_output {
        let mut csv = Vec::new();
        est.write_csv(&mut csv)?;
        emit(Some(path), &csv)?;
        emit(
            Some(&sidecar_path(path)),
            format!("{}\n", est.sidecar_json()).as_bytes(),
        )?;
    }
    emit(args.output.as_deref(), &body)
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn test(args: &TestArgs) -> Result<(), CliError> {
    let (prepared, fit) = fit_prepared(&args.data)?;
    let est = estimate(&fit, &prepared.x, &args.cov)?;
    let value = match args.indices.as_slice() {
        [j] => report_json(&t_test(&fit, &est, *j)?, &est),
        indices => report_json(&joint_test(&fit, &est, indices)?, &est),
    };
    emit(args.output.as_deref(), &json_line(&value))
}

pub fn autocov(args: &AutocovArgs) -> Result<(), CliError> {
    let series: Vec<f64> = if args.raw {
        let prepared = prepare(
            &DataArgs {
                add_intercept: true,
                ..args.data.clone()
            },
            true,
        )?;
        prepared
            .y
            .expect("response present")
            .values()
            .iter()
            .copied()
            .collect()
    } else {
        let (_, fit) = fit_prepared(&args.data)?;
        fit.residuals.iter().copied().collect()
    };
    let acov = autocovariance(&series, args.max_lag.min(series.len() - 1))?;
    let kernel = TaperKernel::from(KernelId::from(args.kernel));
    let suggested = auto_bandwidth(&series, &kernel)?;
    let mut csv = Vec::new();
    acov.write_csv(&mut csv)?;
    emit(args.output.as_deref(), &csv)?;
    eprintln!("suggested_h={}", suggested.h());
    Ok(())
}

pub fn diagnose(args: &DiagnoseArgs) -> Result<(), CliError> {
    let prepared = prepare(&args.data, false)?;
    let x = &prepared.x;
    let diag = design_diagnostics(x, args.max_lag.min(x.n() - 1))?;
    let (j, l, k) = match args.rho.as_slice() {
        [] => (x.p() - 1, x.p() - 1, 1),
        [j, l, k] => (*j, *l, *k),
        _ => return Err(CliError::input("--rho takes exactly three values j,l,k")),
    };
    let stability = match &args.rho_output {
        Some(_) => Some(rho_stability(x, j, l, k, args.splits)?),
        None => None,
    };
    let mut json = diag.to_json().into_bytes();
    json.push(b'\n');
    if let (Some(path), Some(stability)) = (&args.rho_output, &stability) {
        let mut csv = Vec::new();
        stability.write_csv(&mut csv)?;
        emit(Some(path), &csv)?;
    }
    emit(args.output.as_deref(), &json)?;
    for w in &diag.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn model_spec(args: &SimulateArgs, n: usize) -> Result<ModelSpec, CliError> {
    let (model, slopes) = match args.model {
        1 => (ModelId::Model1, 1),
        _ => (ModelId::Model2, 2),
    };
    let mut beta = vec![args.beta0];
    match args.beta.len() {
        0 => beta.extend(std::iter::repeat_n(0.0, slopes)),
        m if m == slopes => beta.extend(&args.beta),
        m => {
            return Err(CliError::input(format!(
                "model {} takes {slopes} slope coefficient(s) in --beta, got {m}",
                args.model
            )))
        }
    }
    Ok(ModelSpec::new(model, beta, n)?)
}

fn emit_replication(cfg: &MonteCarloConfig, path: &Path) -> Result<(), CliError> {
    let data = replication_data(cfg, 0)?;
    let x = data.design.entries();
    let mut s = String::from("y");
    for j in 0..x.ncols() {
        let _ = write!(s, ",x{j}");
    }
    s.push('\n');
    for i in 0..x.nrows() {
        let _ = write!(s, "{}", data.response.values()[i]);
        for j in 0..x.ncols() {
            let _ = write!(s, ",{}", x[(i, j)]);
        }
        s.push('\n');
    }
    emit(Some(path), s.as_bytes())
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let execution = if args.serial {
        Execution::Serial
    } else {
        Execution::from_env()
    };
    let configs = args
        .n
        .iter()
        .map(|&n| {
            let mut cfg =
                MonteCarloConfig::new(model_spec(args, n)?, 1.0, args.replications, args.seed);
            cfg.bandwidth = match args.bandwidth {
                BandwidthArg::Auto => BandwidthChoice::Auto,
                BandwidthArg::Fixed(h) => BandwidthChoice::Fixed(h),
            };
            cfg.kernel = TaperKernel::from(KernelId::from(args.kernel));
            cfg.execution = execution;
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let results = configs
        .iter()
        .map(run_level_power)
        .collect::<Result<Vec<MonteCarloResult>, Error>>()?;
    if let (Some(path), Some(first)) = (&args.emit_data, configs.first()) {
        emit_replication(first, path)?;
    }
    let mut csv = Vec::new();
    write_table(&results, &mut csv)?;
    let table = format_table(&results);
    match &args.output {
        Some(path) => {
            emit(Some(path), &csv)?;
            print!("{table}");
        }
        None => {
            emit(None, &csv)?;
            eprint!("{table}");
        }
    }
    for r in results.iter().filter(|r| r.failures > 0) {
        eprintln!(
            "warning: n = {}: {} replication(s) had an unusable C_n; try --kernel bartlett",
            r.n, r.failures
        );
    }
    Ok(())
}
