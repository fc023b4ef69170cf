//! Monte Carlo orchestration: replicated risk estimation over a parameter
//! grid for every estimator in the crate, rate-curve sweeps with SVG output,
//! and verification of the covariance identities and variance bounds the
//! estimators' analysis rests on.
//!
//! Determinism contract: each (cell, replicate) pair derives its RNG stream
//! from the experiment seed and its flat index alone, replicate results are
//! collected into an indexed buffer, and per-cell reduction is sequential
//! compensated summation in replicate order — so output bytes are identical
//! for any Rayon thread count.

use crate::adaptive::{
    estimate_norm_star, estimate_norm_star_eta, estimate_norm_star_star, rate_psi_star,
    AdaptiveConfig,
};
use crate::known_sigma::{
    estimate_norm_known, estimate_norm_known_rho, rate_phi, rate_psi, RateInputs,
};
use crate::models::{
    make_covariance, make_signal, observe, CovFamily, CovarianceModel, SeedPath, SignalShape,
    SignalSpec, Stream,
};
use crate::special::truncated_moments;
use crate::svg::{log_log_plot, Series};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Which norm estimator an experiment exercises.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// Known σ, Frobenius norm from the model.
    NHat,
    /// Known σ, Frobenius bound ρ substituted.
    NTilde { rho: f64 },
    /// Unknown σ plug-in.
    NStar,
    /// Unknown σ, confidence-parameterized.
    NStarEta { eta: f64 },
    /// Regime selector between the previous two.
    NStarStar { eta: f64 },
}

impl EstimatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::NHat => "n-hat",
            EstimatorKind::NTilde { .. } => "n-tilde",
            EstimatorKind::NStar => "n-star",
            EstimatorKind::NStarEta { .. } => "n-star-eta",
            EstimatorKind::NStarStar { .. } => "n-star-star",
        }
    }

    /// Label plus parameters, as written into the CSV `estimator` column.
    pub fn descriptor(&self) -> String {
        match self {
            EstimatorKind::NHat => "n-hat".to_string(),
            EstimatorKind::NTilde { rho } => format!("n-tilde(rho={rho})"),
            EstimatorKind::NStar => "n-star".to_string(),
            EstimatorKind::NStarEta { eta } => format!("n-star-eta(eta={eta})"),
            EstimatorKind::NStarStar { eta } => format!("n-star-star(eta={eta})"),
        }
    }
}

/// Cartesian grid of experiment cells. Cells are enumerated with `dims`
/// outermost, then `sparsities`, `sigmas`, `families`, `shapes`, and
/// `norm2_targets` innermost; that order fixes cell indices and hence the
/// RNG assignment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub dims: Vec<usize>,
    pub sparsities: Vec<usize>,
    pub sigmas: Vec<f64>,
    pub families: Vec<CovFamily>,
    pub shapes: Vec<SignalShape>,
    pub norm2_targets: Vec<f64>,
}

impl GridSpec {
    pub fn n_cells(&self) -> usize {
        self.dims.len()
            * self.sparsities.len()
            * self.sigmas.len()
            * self.families.len()
            * self.shapes.len()
            * self.norm2_targets.len()
    }

    fn validate(&self) -> Result<()> {
        if self.n_cells() == 0 {
            return Err(Error::InvalidConfig(
                "every grid list must be nonempty".to_string(),
            ));
        }
        if self.sigmas.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidConfig(
                "grid sigmas must be positive and finite".to_string(),
            ));
        }
        if self
            .norm2_targets
            .iter()
            .any(|t| !(*t >= 0.0) || !t.is_finite())
        {
            return Err(Error::InvalidConfig(
                "grid norm targets must be nonnegative and finite".to_string(),
            ));
        }
        Ok(())
    }
}

/// A full experiment description; `run_experiment` consumes it by
/// reference and the JSON writer echoes it verbatim.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment_id: String,
    pub estimator: EstimatorKind,
    pub grid: GridSpec,
    pub replications: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be ≥ 1".to_string()));
        }
        match self.estimator {
            EstimatorKind::NTilde { rho } => {
                if !(rho > 0.0 && rho.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "rho must be positive and finite, got {rho}"
                    )));
                }
            }
            EstimatorKind::NStarEta { eta } | EstimatorKind::NStarStar { eta } => {
                if !(eta > 0.0 && eta < 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "eta must lie in (0, 1), got {eta}"
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// One grid cell's estimated risk. Field order IS the CSV column order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiskSummary {
    pub experiment_id: String,
    pub estimator: String,
    pub d: usize,
    pub s: usize,
    pub sigma: f64,
    pub family: String,
    pub family_params: String,
    pub norm2_target: f64,
    pub replications: usize,
    pub mean_sq_err: f64,
    pub scaled_risk: f64,
    pub rate_name: String,
    pub rate_value: f64,
    pub std_err: f64,
    pub seed: u64,
}

/// Compensated (Kahan) accumulator; used everywhere a sum's value is part
/// of the output contract.
#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Mean and standard error of the mean, in fixed order with compensation:
/// mean first, then deviations against it.
fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let mut acc = Kahan::default();
    for x in xs {
        acc.add(*x);
    }
    let mean = acc.sum / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let mut dev = Kahan::default();
    for x in xs {
        let e = x - mean;
        dev.add(e * e);
    }
    let var = dev.sum / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

struct CellPlan {
    d: usize,
    s: usize,
    sigma: f64,
    family: String,
    family_params: String,
    norm2_target: f64,
    model: CovarianceModel,
    signal: SignalSpec,
    adaptive: Option<AdaptiveConfig>,
    rate_name: &'static str,
    rate_value: f64,
}

fn rate_for(
    kind: &EstimatorKind,
    model: &CovarianceModel,
    s: usize,
) -> Result<(&'static str, f64)> {
    match kind {
        EstimatorKind::NHat => Ok(("psi", rate_psi(&RateInputs::from_model(model, s))?)),
        EstimatorKind::NTilde { rho } => Ok(("phi_rho", rate_phi(s, rho * rho)?)),
        EstimatorKind::NStar | EstimatorKind::NStarEta { .. } | EstimatorKind::NStarStar { .. } => {
            Ok(("psi_star", rate_psi_star(s, model.frobenius())?))
        }
    }
}

fn apply_estimator(kind: &EstimatorKind, y: &[f64], plan: &CellPlan) -> Result<f64> {
    match kind {
        EstimatorKind::NHat => estimate_norm_known(
            y,
            plan.model.diag_var(),
            plan.sigma,
            plan.s,
            plan.model.frobenius(),
        ),
        EstimatorKind::NTilde { rho } => {
            estimate_norm_known_rho(y, plan.model.diag_var(), plan.sigma, plan.s, *rho)
        }
        EstimatorKind::NStar => estimate_norm_star(y, adaptive_of(plan)),
        EstimatorKind::NStarEta { .. } => estimate_norm_star_eta(y, adaptive_of(plan)),
        EstimatorKind::NStarStar { .. } => estimate_norm_star_star(y, adaptive_of(plan)),
    }
}

fn adaptive_of(plan: &CellPlan) -> &AdaptiveConfig {
    plan.adaptive
        .as_ref()
        .expect("adaptive config present for adaptive estimator kinds")
}

fn build_plans(config: &ExperimentConfig) -> Result<Vec<CellPlan>> {
    let g = &config.grid;
    let mut plans = Vec::with_capacity(g.n_cells());
    for &d in &g.dims {
        for &s in &g.sparsities {
            for &sigma in &g.sigmas {
                for family in &g.families {
                    for &shape in &g.shapes {
                        for &norm2_target in &g.norm2_targets {
                            let cell = plans.len();
                            let model = make_covariance(family.clone(), d)?;
                            let signal = make_signal(
                                d,
                                s,
                                shape,
                                norm2_target,
                                SeedPath::new(config.seed, cell as u64),
                            )?;
                            let adaptive = match &config.estimator {
                                EstimatorKind::NStar => {
                                    Some(AdaptiveConfig::from_model(&model, s)?)
                                }
                                EstimatorKind::NStarEta { eta }
                                | EstimatorKind::NStarStar { eta } => {
                                    Some(AdaptiveConfig::from_model(&model, s)?.with_eta(*eta)?)
                                }
                                _ => None,
                            };
                            let (rate_name, rate_value) = rate_for(&config.estimator, &model, s)?;
                            plans.push(CellPlan {
                                d,
                                s,
                                sigma,
                                family: family.label().to_string(),
                                family_params: family.params_string(),
                                norm2_target,
                                model,
                                signal,
                                adaptive,
                                rate_name,
                                rate_value,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(plans)
}

/// Runs the full grid: for every cell, `replications` observations are
/// drawn around a signal that is fixed per cell, the configured estimator
/// is applied, and squared errors against the signal's realized ‖θ‖₂ are
/// averaged. Deterministic for a given config and seed regardless of the
/// thread count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RiskSummary>> {
    config.validate()?;
    let plans = build_plans(config)?;
    let reps = config.replications;

    let sq_errs: Vec<f64> = (0..plans.len() * reps)
        .into_par_iter()
        .map(|idx| -> Result<f64> {
            let plan = &plans[idx / reps];
            let path = SeedPath::new(config.seed, idx as u64);
            let obs = observe(&plan.signal, &plan.model, plan.sigma, path)?;
            let est = apply_estimator(&config.estimator, &obs.y, plan)?;
            let e = est - plan.signal.norm2;
            Ok(e * e)
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut out = Vec::with_capacity(plans.len());
    for (cell, plan) in plans.iter().enumerate() {
        let slice = &sq_errs[cell * reps..(cell + 1) * reps];
        let (mean_sq_err, std_err) = mean_and_se(slice);
        let scaled_risk = mean_sq_err / (plan.sigma * plan.sigma * plan.rate_value);
        out.push(RiskSummary {
            experiment_id: config.experiment_id.clone(),
            estimator: config.estimator.descriptor(),
            d: plan.d,
            s: plan.s,
            sigma: plan.sigma,
            family: plan.family.clone(),
            family_params: plan.family_params.clone(),
            norm2_target: plan.norm2_target,
            replications: reps,
            mean_sq_err,
            scaled_risk,
            rate_name: plan.rate_name.to_string(),
            rate_value: plan.rate_value,
            std_err,
            seed: config.seed,
        });
    }
    Ok(out)
}

/// Writes summaries as CSV with the exact column order of
/// [`RiskSummary`]'s fields.
pub fn write_csv<W: Write>(summaries: &[RiskSummary], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in summaries {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JsonDoc<'a> {
    config: &'a ExperimentConfig,
    records: &'a [RiskSummary],
}

/// Writes the config echo plus all records as pretty JSON.
pub fn write_json<W: Write>(
    config: &ExperimentConfig,
    summaries: &[RiskSummary],
    mut writer: W,
) -> Result<()> {
    serde_json::to_writer_pretty(
        &mut writer,
        &JsonDoc {
            config,
            records: summaries,
        },
    )?;
    writer.write_all(b"\n")?;
    Ok(())
}

/// Result of a rate-curve sweep: the per-cell summaries and a log-log SVG
/// of empirical normalized risk against the theoretical rate, per s.
#[derive(Debug, Clone)]
pub struct RateCurve {
    pub summaries: Vec<RiskSummary>,
    pub svg: String,
}

/// Sweeps the sparsity grid and plots mean squared error / σ² next to the
/// theoretical rate for every other-coordinate combination. Requires at
/// least two sparsity values.
pub fn rate_curve(config: &ExperimentConfig) -> Result<RateCurve> {
    if config.grid.sparsities.len() < 2 {
        return Err(Error::InvalidConfig(
            "rate_curve needs at least two sparsity values".to_string(),
        ));
    }
    let summaries = run_experiment(config)?;

    let g = &config.grid;
    let (nd, ns, nsg, nf, nsh, nn) = (
        g.dims.len(),
        g.sparsities.len(),
        g.sigmas.len(),
        g.families.len(),
        g.shapes.len(),
        g.norm2_targets.len(),
    );
    let cell_at = |i_d: usize, i_s: usize, i_sg: usize, i_f: usize, i_sh: usize, i_n: usize| {
        ((((i_d * ns + i_s) * nsg + i_sg) * nf + i_f) * nsh + i_sh) * nn + i_n
    };

    let mut series = Vec::new();
    for i_d in 0..nd {
        for i_sg in 0..nsg {
            for i_f in 0..nf {
                for i_sh in 0..nsh {
                    for i_n in 0..nn {
                        let mut emp = Vec::with_capacity(ns);
                        let mut theory = Vec::with_capacity(ns);
                        for i_s in 0..ns {
                            let r = &summaries[cell_at(i_d, i_s, i_sg, i_f, i_sh, i_n)];
                            let x = r.s as f64;
                            emp.push((x, r.mean_sq_err / (r.sigma * r.sigma)));
                            theory.push((x, r.rate_value));
                        }
                        let base = format!(
                            "{}{} d={} sigma={} {:?} theta={}",
                            g.families[i_f].label(),
                            g.families[i_f].params_string(),
                            g.dims[i_d],
                            g.sigmas[i_sg],
                            g.shapes[i_sh],
                            g.norm2_targets[i_n],
                        );
                        series.push(Series {
                            label: base.clone(),
                            points: emp,
                            dashed: false,
                        });
                        series.push(Series {
                            label: format!("{base} (rate)"),
                            points: theory,
                            dashed: true,
                        });
                    }
                }
            }
        }
    }

    let svg = log_log_plot(
        &config.experiment_id,
        "s",
        "mean squared error / sigma^2",
        &series,
    );
    Ok(RateCurve { summaries, svg })
}

// ---------------------------------------------------------------------
// Identity verification
// ---------------------------------------------------------------------

/// Whether a check asserts an equality (within 4 standard errors) or an
/// upper bound (observed ≤ bound + 4 standard errors, slack constant 100
/// already folded into the bound).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Equality,
    UpperBound,
}

/// One Monte Carlo identity/bound verification row.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    /// Monte Carlo estimate of the left-hand side.
    pub observed: f64,
    /// Target value (equalities) or allowed maximum (bounds).
    pub bound: f64,
    pub std_err: f64,
    pub kind: CheckKind,
    pub pass: bool,
}

/// The full verification suite's outcome.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
    pub replications: usize,
    pub seed: u64,
}

impl IdentityReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Row constants spacing identity-check RNG streams far apart from each
/// other and from experiment cells.
const ROW_STRIDE: u64 = 1 << 32;

fn pair_rng(seed: u64, row: u64) -> rand_chacha::ChaCha12Rng {
    SeedPath::new(seed, row * ROW_STRIDE).rng(Stream::Aux)
}

/// Draws n correlated standard normal pairs (ζ, η) with correlation ν and
/// returns (u, v) = (f(ζ, η) per pair).
fn sample_pairs(
    nu: f64,
    n: usize,
    rng: &mut rand_chacha::ChaCha12Rng,
    mut f: impl FnMut(f64, f64) -> (f64, f64),
) -> (Vec<f64>, Vec<f64>) {
    let root = (1.0 - nu * nu).max(0.0).sqrt();
    let mut us = Vec::with_capacity(n);
    let mut vs = Vec::with_capacity(n);
    for _ in 0..n {
        let zeta: f64 = rng.sample(StandardNormal);
        let z: f64 = rng.sample(StandardNormal);
        let eta = nu * zeta + root * z;
        let (u, v) = f(zeta, eta);
        us.push(u);
        vs.push(v);
    }
    (us, vs)
}

/// Sample covariance of (u, v) plus a plug-in standard error from the
/// per-pair products of deviations.
fn cov_and_se(us: &[f64], vs: &[f64]) -> (f64, f64) {
    let n = us.len();
    let (mu, _) = mean_and_se(us);
    let (mv, _) = mean_and_se(vs);
    let w: Vec<f64> = us
        .iter()
        .zip(vs)
        .map(|(u, v)| (u - mu) * (v - mv))
        .collect();
    let (mw, se_w) = mean_and_se(&w);
    let cov = mw * n as f64 / (n - 1) as f64;
    (cov, se_w)
}

/// Sample variance of xs plus a plug-in standard error from the squared
/// deviations.
fn var_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let (m, _) = mean_and_se(xs);
    let w: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    let (mw, se_w) = mean_and_se(&w);
    (mw * n as f64 / (n - 1) as f64, se_w)
}

fn check_nu(op: &'static str, nu: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&nu) || !nu.is_finite() {
        return Err(Error::domain(
            op,
            format!("nu must lie in [-1, 1], got {nu}"),
        ));
    }
    Ok(())
}

fn check_reps(op: &'static str, reps: usize) -> Result<()> {
    if reps < 2 {
        return Err(Error::domain(
            op,
            "need at least 2 replications".to_string(),
        ));
    }
    Ok(())
}

/// Cov[ζ², η²] = 2ν² for a standard normal pair with correlation ν
/// (equality within 4 standard errors).
pub fn check_pair_square_cov(nu: f64, seed: u64, replications: usize) -> Result<IdentityCheck> {
    check_nu("check_pair_square_cov", nu)?;
    check_reps("check_pair_square_cov", replications)?;
    let mut rng = pair_rng(seed, 10);
    let (us, vs) = sample_pairs(nu, replications, &mut rng, |z, e| (z * z, e * e));
    let (cov, se) = cov_and_se(&us, &vs);
    let target = 2.0 * nu * nu;
    Ok(IdentityCheck {
        name: format!("pair_square_cov(nu={nu})"),
        observed: cov,
        bound: target,
        std_err: se,
        kind: CheckKind::Equality,
        pass: (cov - target).abs() <= 4.0 * se,
    })
}

/// |Cov[(ζ²−β)1{|ζ|>τ}, (η²−β)1{|η|>τ}]| ≤ 100·ν²τ⁴e^{−τ²/2}, τ ≥ 1.
pub fn check_pair_truncated_cov(
    nu: f64,
    tau: f64,
    seed: u64,
    replications: usize,
) -> Result<IdentityCheck> {
    check_nu("check_pair_truncated_cov", nu)?;
    check_reps("check_pair_truncated_cov", replications)?;
    if !(tau >= 1.0 && tau.is_finite()) {
        return Err(Error::domain(
            "check_pair_truncated_cov",
            format!("tau must be ≥ 1, got {tau}"),
        ));
    }
    let beta = truncated_moments(tau)?.beta;
    let trunc = |x: f64| {
        if x.abs() > tau {
            x * x - beta
        } else {
            0.0
        }
    };
    let mut rng = pair_rng(seed, 11);
    let (us, vs) = sample_pairs(nu, replications, &mut rng, |z, e| (trunc(z), trunc(e)));
    let (cov, se) = cov_and_se(&us, &vs);
    let bound = 100.0 * nu * nu * tau.powi(4) * (-tau * tau / 2.0).exp();
    Ok(IdentityCheck {
        name: format!("pair_truncated_cov(nu={nu},tau={tau})"),
        observed: cov,
        bound,
        std_err: se,
        kind: CheckKind::UpperBound,
        pass: cov.abs() <= bound + 4.0 * se,
    })
}

/// |Cov[1{ζ² ≤ τ}, 1{η² ≤ τ}]| ≤ 100·ν²(τ²+1)e^{−τ/3}, τ ≥ 0.
pub fn check_pair_indicator_cov(
    nu: f64,
    tau: f64,
    seed: u64,
    replications: usize,
) -> Result<IdentityCheck> {
    check_nu("check_pair_indicator_cov", nu)?;
    check_reps("check_pair_indicator_cov", replications)?;
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::domain(
            "check_pair_indicator_cov",
            format!("tau must be ≥ 0, got {tau}"),
        ));
    }
    let ind = |x: f64| if x * x <= tau { 1.0 } else { 0.0 };
    let mut rng = pair_rng(seed, 12);
    let (us, vs) = sample_pairs(nu, replications, &mut rng, |z, e| (ind(z), ind(e)));
    let (cov, se) = cov_and_se(&us, &vs);
    let bound = 100.0 * nu * nu * (tau * tau + 1.0) * (-tau / 3.0).exp();
    Ok(IdentityCheck {
        name: format!("pair_indicator_cov(nu={nu},tau={tau})"),
        observed: cov,
        bound,
        std_err: se,
        kind: CheckKind::UpperBound,
        pass: cov.abs() <= bound + 4.0 * se,
    })
}

/// |Cov[cos(t(μ₁+σ₁ζ)), cos(t(μ₂+σ₂η))]| ≤
/// 100·(ν²|cos(tμ₁)cos(tμ₂)| + |ν||sin(tμ₁)sin(tμ₂)|).
#[allow(clippy::too_many_arguments)]
pub fn check_pair_cosine_cov(
    nu: f64,
    t: f64,
    mu: (f64, f64),
    sigma: (f64, f64),
    seed: u64,
    replications: usize,
) -> Result<IdentityCheck> {
    check_nu("check_pair_cosine_cov", nu)?;
    check_reps("check_pair_cosine_cov", replications)?;
    let mut rng = pair_rng(seed, 13);
    let (us, vs) = sample_pairs(nu, replications, &mut rng, |z, e| {
        (
            (t * (mu.0 + sigma.0 * z)).cos(),
            (t * (mu.1 + sigma.1 * e)).cos(),
        )
    });
    let (cov, se) = cov_and_se(&us, &vs);
    let bound = 100.0
        * (nu * nu * ((t * mu.0).cos() * (t * mu.1).cos()).abs()
            + nu.abs() * ((t * mu.0).sin() * (t * mu.1).sin()).abs());
    Ok(IdentityCheck {
        name: format!("pair_cosine_cov(nu={nu},t={t})"),
        observed: cov,
        bound,
        std_err: se,
        kind: CheckKind::UpperBound,
        pass: cov.abs() <= bound + 4.0 * se,
    })
}

fn model_replicates(
    model: &CovarianceModel,
    seed: u64,
    row: u64,
    replications: usize,
    stat: impl Fn(&[f64]) -> f64,
) -> Vec<f64> {
    (0..replications)
        .map(|rep| {
            let path = SeedPath::new(seed, row * ROW_STRIDE + rep as u64);
            let eps = model.sample_noise(path);
            stat(&eps)
        })
        .collect()
}

/// Var(‖ε‖²) = 2‖Σ‖_F² (equality within 4 standard errors).
pub fn check_var_sq_norm(
    model: &CovarianceModel,
    seed: u64,
    replications: usize,
) -> Result<IdentityCheck> {
    check_reps("check_var_sq_norm", replications)?;
    let xs = model_replicates(model, seed, 14, replications, |eps| {
        let mut acc = Kahan::default();
        for e in eps {
            acc.add(e * e);
        }
        acc.sum
    });
    let (var, se) = var_and_se(&xs);
    let target = 2.0 * model.frobenius() * model.frobenius();
    Ok(IdentityCheck {
        name: format!("var_sq_norm({}, d={})", model.family().label(), model.dim()),
        observed: var,
        bound: target,
        std_err: se,
        kind: CheckKind::Equality,
        pass: (var - target).abs() <= 4.0 * se,
    })
}

/// Var[Σ_i (ε_i²−σ_i²β)1{|ε_i|>σ_iτ}] ≤ 100·‖Σ‖_F²τ⁴e^{−τ²/2}, τ ≥ 1.
pub fn check_var_truncated_sum(
    model: &CovarianceModel,
    tau: f64,
    seed: u64,
    replications: usize,
) -> Result<IdentityCheck> {
    check_reps("check_var_truncated_sum", replications)?;
    if !(tau >= 1.0 && tau.is_finite()) {
        return Err(Error::domain(
            "check_var_truncated_sum",
            format!("tau must be ≥ 1, got {tau}"),
        ));
    }
    let beta = truncated_moments(tau)?.beta;
    let diag = model.diag_var().to_vec();
    let sd = model.diag_sd().to_vec();
    let xs = model_replicates(model, seed, 15, replications, |eps| {
        let mut acc = Kahan::default();
        for ((e, var), s) in eps.iter().zip(&diag).zip(&sd) {
            if e.abs() > s * tau {
                acc.add(e * e - var * beta);
            }
        }
        acc.sum
    });
    let (var, se) = var_and_se(&xs);
    let f2 = model.frobenius() * model.frobenius();
    let bound = 100.0 * f2 * tau.powi(4) * (-tau * tau / 2.0).exp();
    Ok(IdentityCheck {
        name: format!("var_truncated_sum(tau={tau})"),
        observed: var,
        bound,
        std_err: se,
        kind: CheckKind::UpperBound,
        pass: var <= bound + 4.0 * se,
    })
}

/// Var[Σ_i 1{ε_i² ≤ σ_i²τ}] ≤ 100·‖Σ̃‖_F²(τ²+1)e^{−τ/3}, τ ≥ 0.
pub fn check_var_indicator_sum(
    model: &CovarianceModel,
    tau: f64,
    seed: u64,
    replications: usize,
) -> Result<IdentityCheck> {
    check_reps("check_var_indicator_sum", replications)?;
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::domain(
            "check_var_indicator_sum",
            format!("tau must be ≥ 0, got {tau}"),
        ));
    }
    let diag = model.diag_var().to_vec();
    let xs = model_replicates(model, seed, 16, replications, |eps| {
        let mut count = 0usize;
        for (e, var) in eps.iter().zip(&diag) {
            if e * e <= var * tau {
                count += 1;
            }
        }
        count as f64
    });
    let (var, se) = var_and_se(&xs);
    let fc2 = model.frobenius_corr() * model.frobenius_corr();
    let bound = 100.0 * fc2 * (tau * tau + 1.0) * (-tau / 3.0).exp();
    Ok(IdentityCheck {
        name: format!("var_indicator_sum(tau={tau})"),
        observed: var,
        bound,
        std_err: se,
        kind: CheckKind::UpperBound,
        pass: var <= bound + 4.0 * se,
    })
}

/// Var[Σ_i cos(t(μ_i+ε_i))] ≤ 100·(‖Σ̃‖_F² + s‖Σ̃‖_F) where s counts the
/// nonzero μ_i.
pub fn check_var_cosine_sum(
    model: &CovarianceModel,
    t: f64,
    mus: &[f64],
    seed: u64,
    replications: usize,
) -> Result<IdentityCheck> {
    check_reps("check_var_cosine_sum", replications)?;
    if mus.len() != model.dim() {
        return Err(Error::dim(format!(
            "mu length {} vs model dimension {}",
            mus.len(),
            model.dim()
        )));
    }
    let s = mus.iter().filter(|m| **m != 0.0).count();
    let mus = mus.to_vec();
    let xs = model_replicates(model, seed, 17, replications, |eps| {
        let mut acc = Kahan::default();
        for (e, m) in eps.iter().zip(&mus) {
            acc.add((t * (m + e)).cos());
        }
        acc.sum
    });
    let (var, se) = var_and_se(&xs);
    let fc = model.frobenius_corr();
    let bound = 100.0 * (fc * fc + s as f64 * fc);
    Ok(IdentityCheck {
        name: format!("var_cosine_sum(t={t},spikes={s})"),
        observed: var,
        bound,
        std_err: se,
        kind: CheckKind::UpperBound,
        pass: var <= bound + 4.0 * se,
    })
}

/// Runs the full eight-row verification suite: four pairwise covariance
/// checks (ν = 0.7, τ = 2, cosine at t = 1.3) and four vector-statistic
/// variance checks on Equicorrelation(0.5) at d = 50. Requires at least
/// 10⁵ replications for the stated tolerances to be meaningful.
pub fn verify_identities(seed: u64, replications: usize) -> Result<IdentityReport> {
    if replications < 100_000 {
        return Err(Error::domain(
            "verify_identities",
            format!("need ≥ 100000 replications, got {replications}"),
        ));
    }
    let model = make_covariance(CovFamily::Equicorrelation { gamma: 0.5 }, 50)?;
    let mut mus = vec![0.0; 50];
    for m in mus.iter_mut().take(5) {
        *m = 2.0;
    }
    let checks = vec![
        check_pair_square_cov(0.7, seed, replications)?,
        check_pair_truncated_cov(0.7, 2.0, seed, replications)?,
        check_pair_indicator_cov(0.7, 2.0, seed, replications)?,
        check_pair_cosine_cov(0.7, 1.3, (0.7, -0.4), (1.0, 1.0), seed, replications)?,
        check_var_sq_norm(&model, seed, replications)?,
        check_var_truncated_sum(&model, 2.0, seed, replications)?,
        check_var_indicator_sum(&model, 2.0, seed, replications)?,
        check_var_cosine_sum(&model, 1.3, &mus, seed, replications)?,
    ];
    Ok(IdentityReport {
        checks,
        replications,
        seed,
    })
}
