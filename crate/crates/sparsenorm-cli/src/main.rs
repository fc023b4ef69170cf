//! Command-line front end: single-shot estimation on data files, replicated
//! risk experiments, rate-curve sweeps with SVG output, detection power
//! sweeps, and Monte Carlo verification of the variance identities.
//!
//! Exit codes are stable for scripting: 0 success, 2 input parse error,
//! 3 parameter/config validation error, 4 I/O failure, 5 internal error.
//! `verify-identities` additionally exits 1 when the suite ran but a check
//! failed.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sparsenorm::adaptive::{
    estimate_norm_star, estimate_norm_star_eta, sparse_threshold_eta, AdaptiveConfig,
};
use sparsenorm::config::{experiment_from_map, power_from_map, ConfigMap, PowerConfig};
use sparsenorm::detect::{radius_sweep, SweepRow};
use sparsenorm::known_sigma::{estimate_norm_known, estimate_norm_known_rho, sparse_threshold};
use sparsenorm::mc::{rate_curve, run_experiment, verify_identities, write_csv, write_json};
use sparsenorm::models::make_covariance;
use sparsenorm::noise::{sigma_sq_d_with, sigma_sq_eta, sigma_sq_s_with, NormalizedSample};
use sparsenorm::{Error, Result};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "sparsenorm",
    version,
    about = "Estimate the l2 norm of a sparse mean under correlated Gaussian noise"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Apply one estimator to a data vector read from a file
    Estimate(EstimateArgs),
    /// Run a replicated risk experiment described by a config file
    Simulate(RunArgs),
    /// Sweep sparsity and emit an SVG comparing empirical risk to the rate
    RateCurve(RunArgs),
    /// Monte Carlo verification of the covariance identities and bounds
    VerifyIdentities(VerifyArgs),
    /// Detection risk sweep over a radius or gamma grid
    TestPower(RunArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    NHat,
    NTilde,
    NStar,
    NStarEta,
    NStarStar,
    SigmaS,
    SigmaD,
    SigmaEta,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::NHat => "n-hat",
            Method::NTilde => "n-tilde",
            Method::NStar => "n-star",
            Method::NStarEta => "n-star-eta",
            Method::NStarStar => "n-star-star",
            Method::SigmaS => "sigma-s",
            Method::SigmaD => "sigma-d",
            Method::SigmaEta => "sigma-eta",
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    /// Estimator to apply
    #[arg(long, value_enum)]
    method: Method,
    /// Input file: one number per line, or CSV when --column is given
    #[arg(long)]
    data: PathBuf,
    /// 0-based CSV column to read; a non-numeric first row is skipped
    #[arg(long)]
    column: Option<usize>,
    /// Noise level (required by n-hat and n-tilde)
    #[arg(long)]
    sigma: Option<f64>,
    /// Sparsity bound
    #[arg(long)]
    s: Option<usize>,
    /// Frobenius norm of the covariance
    #[arg(long)]
    frob: Option<f64>,
    /// Frobenius norm of the correlation matrix (defaults: --frob, or sqrt(d))
    #[arg(long)]
    frob_corr: Option<f64>,
    /// Frobenius bound substituted for the norm (n-tilde)
    #[arg(long)]
    rho: Option<f64>,
    /// Confidence parameter in (0, 1)
    #[arg(long)]
    eta: Option<f64>,
    /// Per-coordinate variance file (one per line) or "unit"
    #[arg(long, default_value = "unit")]
    diag: String,
    /// Empirical-CDF level used by the dyadic threshold
    #[arg(long, default_value_t = 0.5)]
    dyadic_half: f64,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file (flat key = value)
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing)
    #[arg(long)]
    out: PathBuf,
    /// Cap the Rayon worker count
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 100_000)]
    replications: usize,
    /// Optional directory for the JSON report
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ConfigSyntax(_) => 2,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| dispatch(cli))) {
        Ok(Ok(code)) => ExitCode::from(code),
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(_) => {
            eprintln!("internal error: command panicked");
            ExitCode::from(5)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.cmd {
        Cmd::Estimate(args) => cmd_estimate(args),
        Cmd::Simulate(args) => cmd_simulate(args),
        Cmd::RateCurve(args) => cmd_rate_curve(args),
        Cmd::VerifyIdentities(args) => cmd_verify_identities(args),
        Cmd::TestPower(args) => cmd_test_power(args),
    }
}

// ---------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------

/// Reads a numeric vector: one value per line, or one CSV column. A first
/// row that fails to parse is treated as a header only in column mode.
fn read_vector(path: &Path, column: Option<usize>) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let token = match column {
            None => line,
            Some(col) => line.split(',').nth(col).map(str::trim).ok_or_else(|| {
                Error::ConfigSyntax(format!(
                    "{}: line {}: no column {col}",
                    path.display(),
                    lineno + 1
                ))
            })?,
        };
        match token.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if column.is_some() && lineno == 0 && out.is_empty() => continue,
            Err(_) => {
                return Err(Error::ConfigSyntax(format!(
                    "{}: line {}: cannot parse '{token}' as a number",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    if out.is_empty() {
        return Err(Error::ConfigSyntax(format!(
            "{}: no numeric data found",
            path.display()
        )));
    }
    Ok(out)
}

fn req<T>(opt: Option<T>, flag: &str, method: &str) -> Result<T> {
    opt.ok_or_else(|| Error::InvalidConfig(format!("--{flag} is required for --method {method}")))
}

/// Everything `estimate` prints; the same struct is emitted as the final
/// JSON line.
#[derive(Serialize, Default)]
struct EstimateReport {
    method: String,
    d: usize,
    estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    branch: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    selected: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau_eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_sq_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_sq_d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_sq_eta: Option<f64>,
}

fn cmd_estimate(args: EstimateArgs) -> Result<u8> {
    let y = read_vector(&args.data, args.column)?;
    let d = y.len();
    let method = args.method.name();
    let diag: Vec<f64> = if args.diag == "unit" {
        vec![1.0; d]
    } else {
        read_vector(Path::new(&args.diag), None)?
    };
    let diag_sd: Vec<f64> = diag.iter().map(|v| v.sqrt()).collect();
    let half = args.dyadic_half;

    let mut rep = EstimateReport {
        method: method.to_string(),
        d,
        ..Default::default()
    };

    match args.method {
        Method::NHat => {
            let sigma = req(args.sigma, "sigma", method)?;
            let s = req(args.s, "s", method)?;
            let frob = req(args.frob, "frob", method)?;
            rep.estimate = estimate_norm_known(&y, &diag, sigma, s, frob)?;
            let sparse = s as f64 <= frob;
            rep.branch = Some(if sparse { "sparse" } else { "dense" });
            if sparse {
                rep.tau = Some(sparse_threshold(s, frob)?);
            }
        }
        Method::NTilde => {
            let sigma = req(args.sigma, "sigma", method)?;
            let s = req(args.s, "s", method)?;
            let rho = req(args.rho, "rho", method)?;
            rep.estimate = estimate_norm_known_rho(&y, &diag, sigma, s, rho)?;
            let sparse = s as f64 <= rho;
            rep.branch = Some(if sparse { "sparse" } else { "dense" });
            if sparse {
                rep.tau = Some(sparse_threshold(s, rho)?);
            }
        }
        Method::NStar | Method::NStarEta | Method::NStarStar => {
            let s = req(args.s, "s", method)?;
            let frob = req(args.frob, "frob", method)?;
            let mut cfg = AdaptiveConfig::new(s, diag.clone(), frob)?.with_dyadic_half(half)?;
            if let Some(fc) = args.frob_corr {
                cfg = cfg.with_frob_corr(fc)?;
            }
            let sparse = s as f64 <= frob;
            let sample = NormalizedSample::new(&y, &diag_sd)?;
            let needs_eta = args.method != Method::NStar;
            if needs_eta {
                let eta = req(args.eta, "eta", method)?;
                cfg = cfg.with_eta(eta)?;
            }
            match args.method {
                Method::NStar => {
                    rep.estimate = estimate_norm_star(&y, &cfg)?;
                    rep.branch = Some(if sparse { "sparse" } else { "dense" });
                }
                Method::NStarEta => {
                    rep.estimate = estimate_norm_star_eta(&y, &cfg)?;
                    rep.branch = Some("sparse");
                }
                Method::NStarStar => {
                    // same selector as the estimator: eta-variant unless s > frob
                    if sparse {
                        rep.estimate = estimate_norm_star_eta(&y, &cfg)?;
                        rep.branch = Some("sparse");
                        rep.selected = Some("n-star-eta");
                    } else {
                        rep.estimate = estimate_norm_star(&y, &cfg)?;
                        rep.branch = Some("dense");
                        rep.selected = Some("n-star");
                    }
                }
                _ => unreachable!(),
            }
            // Intermediates, recomputed exactly as the estimators do.
            if rep.branch == Some("sparse") {
                let est = sigma_sq_s_with(&sample, half)?;
                rep.sigma_sq_s = Some(est.value);
                rep.t_hat = est.t_hat;
                rep.tau = Some(sparse_threshold(s, frob)?);
                if needs_eta {
                    let eta = args.eta.expect("checked above");
                    rep.sigma_sq_eta = Some(sigma_sq_eta(&sample, eta)?.value);
                    rep.tau_eta = Some(sparse_threshold_eta(s, frob, eta)?);
                }
            } else {
                let fc = args.frob_corr.unwrap_or(frob);
                let est = sigma_sq_d_with(&sample, s, fc, half)?;
                rep.sigma_sq_d = Some(est.value);
                rep.t_hat = est.t_hat;
            }
        }
        Method::SigmaS => {
            let sample = NormalizedSample::new(&y, &diag_sd)?;
            let est = sigma_sq_s_with(&sample, half)?;
            rep.estimate = est.value;
            rep.t_hat = est.t_hat;
            rep.sigma_sq_s = Some(est.value);
        }
        Method::SigmaD => {
            let s = req(args.s, "s", method)?;
            let fc = args.frob_corr.unwrap_or_else(|| (d as f64).sqrt());
            let sample = NormalizedSample::new(&y, &diag_sd)?;
            let est = sigma_sq_d_with(&sample, s, fc, half)?;
            rep.estimate = est.value;
            rep.t_hat = est.t_hat;
            rep.sigma_sq_d = Some(est.value);
        }
        Method::SigmaEta => {
            let eta = req(args.eta, "eta", method)?;
            let sample = NormalizedSample::new(&y, &diag_sd)?;
            let est = sigma_sq_eta(&sample, eta)?;
            rep.estimate = est.value;
            rep.sigma_sq_eta = Some(est.value);
        }
    }

    println!("method: {}", rep.method);
    println!("d: {}", rep.d);
    if let Some(b) = rep.branch {
        println!("branch: {b}");
    }
    if let Some(sel) = rep.selected {
        println!("selected: {sel}");
    }
    if let Some(v) = rep.tau {
        println!("tau: {v}");
    }
    if let Some(v) = rep.tau_eta {
        println!("tau-eta: {v}");
    }
    if let Some(v) = rep.t_hat {
        println!("t-hat: {v}");
    }
    if let Some(v) = rep.sigma_sq_s {
        println!("sigma-sq-s: {v}");
    }
    if let Some(v) = rep.sigma_sq_d {
        println!("sigma-sq-d: {v}");
    }
    if let Some(v) = rep.sigma_sq_eta {
        println!("sigma-sq-eta: {v}");
    }
    println!("estimate: {}", rep.estimate);
    println!("{}", serde_json::to_string(&rep)?);
    Ok(0)
}

// ---------------------------------------------------------------------
// config-driven subcommands
// ---------------------------------------------------------------------

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::InvalidConfig(
                "--threads must be at least 1".to_string(),
            ));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("--threads: {e}")))?;
    }
    Ok(())
}

fn load_map(path: &Path) -> Result<ConfigMap> {
    let text = fs::read_to_string(path)?;
    ConfigMap::parse(&text)
}

/// Writes all staged files under `out`, removing everything written so far
/// if any single write fails (no partial outputs).
fn write_outputs(out: &Path, files: &[(String, Vec<u8>)]) -> Result<()> {
    fs::create_dir_all(out)?;
    let mut written: Vec<PathBuf> = Vec::new();
    for (name, bytes) in files {
        let path = out.join(name);
        match fs::write(&path, bytes) {
            Ok(()) => written.push(path),
            Err(e) => {
                for p in &written {
                    let _ = fs::remove_file(p);
                }
                return Err(e.into());
            }
        }
    }
    for p in &written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn print_cells(summaries: &[sparsenorm::mc::RiskSummary]) {
    for r in summaries {
        println!(
            "cell d={} s={} sigma={} family={}{} norm2={} mse={:.6e} scaled={:.4} se={:.3e}",
            r.d,
            r.s,
            r.sigma,
            r.family,
            if r.family_params.is_empty() {
                String::new()
            } else {
                format!("({})", r.family_params)
            },
            r.norm2_target,
            r.mean_sq_err,
            r.scaled_risk,
            r.std_err,
        );
    }
}

fn cmd_simulate(args: RunArgs) -> Result<u8> {
    init_threads(args.threads)?;
    let mut map = load_map(&args.config)?;
    let cfg = experiment_from_map(&mut map)?;
    map.finish()?;

    let summaries = run_experiment(&cfg)?;
    let mut csv_buf = Vec::new();
    write_csv(&summaries, &mut csv_buf)?;
    let mut json_buf = Vec::new();
    write_json(&cfg, &summaries, &mut json_buf)?;

    print_cells(&summaries);
    write_outputs(
        &args.out,
        &[
            (format!("{}.csv", cfg.experiment_id), csv_buf),
            (format!("{}.json", cfg.experiment_id), json_buf),
        ],
    )?;
    Ok(0)
}

fn cmd_rate_curve(args: RunArgs) -> Result<u8> {
    init_threads(args.threads)?;
    let mut map = load_map(&args.config)?;
    let cfg = experiment_from_map(&mut map)?;
    map.finish()?;

    let curve = rate_curve(&cfg)?;
    let mut csv_buf = Vec::new();
    write_csv(&curve.summaries, &mut csv_buf)?;
    let mut json_buf = Vec::new();
    write_json(&cfg, &curve.summaries, &mut json_buf)?;

    print_cells(&curve.summaries);
    write_outputs(
        &args.out,
        &[
            (format!("{}.csv", cfg.experiment_id), csv_buf),
            (format!("{}.json", cfg.experiment_id), json_buf),
            (format!("{}.svg", cfg.experiment_id), curve.svg.into_bytes()),
        ],
    )?;
    Ok(0)
}

fn cmd_verify_identities(args: VerifyArgs) -> Result<u8> {
    let report = verify_identities(args.seed, args.replications)?;
    for c in &report.checks {
        println!(
            "{} {} observed={:.6e} {}={:.6e} se={:.3e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.observed,
            match c.kind {
                sparsenorm::mc::CheckKind::Equality => "target",
                sparsenorm::mc::CheckKind::UpperBound => "bound",
            },
            c.bound,
            c.std_err,
        );
    }
    if let Some(out) = &args.out {
        let buf = serde_json::to_vec_pretty(&report)?;
        write_outputs(out, &[("identities.json".to_string(), buf)])?;
    }
    if report.all_pass() {
        println!("all {} checks passed", report.checks.len());
        Ok(0)
    } else {
        println!("checks failed");
        Ok(1)
    }
}

/// Flat CSV row for the power sweep (risk fields inlined).
#[derive(Serialize)]
struct PowerRow {
    gamma: f64,
    radius: f64,
    type1: f64,
    type2: f64,
    total: f64,
    replications: usize,
    std_err_type1: f64,
    std_err_type2: f64,
    type2_vacuous: bool,
}

impl From<&SweepRow> for PowerRow {
    fn from(r: &SweepRow) -> Self {
        PowerRow {
            gamma: r.gamma,
            radius: r.radius,
            type1: r.risk.type1,
            type2: r.risk.type2,
            total: r.risk.total,
            replications: r.risk.replications,
            std_err_type1: r.risk.std_err_type1,
            std_err_type2: r.risk.std_err_type2,
            type2_vacuous: r.risk.type2_vacuous,
        }
    }
}

#[derive(Serialize)]
struct PowerDoc<'a> {
    config: &'a PowerConfig,
    rows: &'a [SweepRow],
}

fn cmd_test_power(args: RunArgs) -> Result<u8> {
    init_threads(args.threads)?;
    let mut map = load_map(&args.config)?;
    let cfg = power_from_map(&mut map)?;
    map.finish()?;

    let nulls = cfg
        .nulls
        .iter()
        .map(|f| make_covariance(f.clone(), cfg.d))
        .collect::<Result<Vec<_>>>()?;
    let mut alt_specs = Vec::new();
    for shape in &cfg.alt_shapes {
        for fam in &cfg.alt_families {
            alt_specs.push((*shape, make_covariance(fam.clone(), cfg.d)?));
        }
    }

    let rows = radius_sweep(
        &nulls,
        &alt_specs,
        cfg.sigma,
        cfg.s,
        cfg.rho,
        &cfg.grid,
        cfg.replications,
        cfg.seed,
    )?;

    let mut csv_buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut csv_buf);
        for row in &rows {
            w.serialize(PowerRow::from(row))?;
        }
        w.flush()?;
    }
    let mut json_buf = serde_json::to_vec_pretty(&PowerDoc {
        config: &cfg,
        rows: &rows,
    })?;
    json_buf.push(b'\n');

    for r in &rows {
        println!(
            "gamma={} radius={:.6} type1={:.4} type2={:.4} total={:.4}{}",
            r.gamma,
            r.radius,
            r.risk.type1,
            r.risk.type2,
            r.risk.total,
            if r.risk.type2_vacuous {
                " (no alternatives)"
            } else {
                ""
            },
        );
    }
    write_outputs(
        &args.out,
        &[
            (format!("{}.csv", cfg.id), csv_buf),
            (format!("{}.json", cfg.id), json_buf),
        ],
    )?;
    Ok(0)
}
