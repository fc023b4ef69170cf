//! Signal detection: the thresholded norm test Ψ = 1{N̂ > γσ√φ(s,ρ²)}, its
//! separation radius r̄_γ = 2γσ√φ(s,ρ²), and Monte Carlo estimation of the
//! testing risk (worst type-I over a null family plus worst type-II over an
//! alternative family).
//!
//! The suprema in the population risk run over infinite matrix classes; the
//! estimators here report maxima over the explicit finite families supplied
//! by the caller, which under-approximates the true risk. Alternative
//! instances are validated against the separation radius and the Frobenius
//! bound; null models are run as given so that miscalibrated or stressed
//! nulls can be studied.

use crate::known_sigma::{estimate_norm_known_rho, rate_phi};
use crate::models::{observe, CovarianceModel, SeedPath, SignalSpec};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Outcome of one application of the test.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TestOutcome {
    /// True iff `statistic > threshold` (strict).
    pub reject: bool,
    /// N̂ computed with the Frobenius bound ρ.
    pub statistic: f64,
    /// γσ√φ(s, ρ²).
    pub threshold: f64,
}

/// Monte Carlo estimate of the testing risk over finite families.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RiskEstimate {
    /// Worst empirical rejection rate over the null family.
    pub type1: f64,
    /// Worst empirical acceptance rate over the alternative family
    /// (0 by convention when the family is empty; see `type2_vacuous`).
    pub type2: f64,
    /// type1 + type2.
    pub total: f64,
    /// Replicates per family member.
    pub replications: usize,
    /// Binomial standard error of the worst-case type-I rate.
    pub std_err_type1: f64,
    /// Binomial standard error of the worst-case type-II rate.
    pub std_err_type2: f64,
    /// True when no alternatives were supplied, making type2 vacuous.
    pub type2_vacuous: bool,
}

/// Applies Ψ to one observation: statistic N̂ (with bound ρ), threshold
/// γσ√φ(s,ρ²), strict comparison.
pub fn run_test(
    y: &[f64],
    diag_var: &[f64],
    sigma: f64,
    s: usize,
    rho: f64,
    gamma: f64,
) -> Result<TestOutcome> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::domain(
            "run_test",
            format!("gamma must be positive and finite, got {gamma}"),
        ));
    }
    let statistic = estimate_norm_known_rho(y, diag_var, sigma, s, rho)?;
    let threshold = gamma * sigma * rate_phi(s, rho * rho)?.sqrt();
    Ok(TestOutcome {
        reject: statistic > threshold,
        statistic,
        threshold,
    })
}

/// r̄_γ = 2γσ√φ(s, ρ²): alternatives at least this far from zero are the
/// ones the theory separates at level γ.
pub fn separation_radius(gamma: f64, sigma: f64, s: usize, rho: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::domain(
            "separation_radius",
            format!("gamma must be positive and finite, got {gamma}"),
        ));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::NonPositiveSigma(sigma));
    }
    Ok(2.0 * gamma * sigma * rate_phi(s, rho * rho)?.sqrt())
}

fn binomial_std_err(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Estimates the testing risk by Monte Carlo: for each null model the
/// rejection rate under Y = σε, for each alternative instance the
/// acceptance rate under Y = θ + σε; the reported components are the
/// maxima over the respective families.
///
/// Every alternative must satisfy ‖θ‖₂ ≥ `min_radius` and ‖Σ‖_F ≤ ρ.
/// Replicate r of family cell c draws its noise from
/// `SeedPath { seed, replicate: c·replications + r }`, so results are
/// byte-identical across thread counts.
#[allow(clippy::too_many_arguments)]
pub fn estimate_risk(
    null_models: &[CovarianceModel],
    alt_instances: &[(SignalSpec, CovarianceModel)],
    sigma: f64,
    s: usize,
    rho: f64,
    gamma: f64,
    min_radius: f64,
    replications: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::NonPositiveSigma(sigma));
    }
    if replications == 0 {
        return Err(Error::domain(
            "estimate_risk",
            "replications must be ≥ 1".to_string(),
        ));
    }
    if !(min_radius >= 0.0 && min_radius.is_finite()) {
        return Err(Error::domain(
            "estimate_risk",
            format!("min_radius must be nonnegative and finite, got {min_radius}"),
        ));
    }
    for (i, (signal, model)) in alt_instances.iter().enumerate() {
        if signal.dim != model.dim() {
            return Err(Error::dim(format!(
                "alternative {i}: signal dimension {} vs model dimension {}",
                signal.dim,
                model.dim()
            )));
        }
        if signal.norm2 < min_radius {
            return Err(Error::domain(
                "estimate_risk",
                format!(
                    "alternative {i} violates the separation constraint: ‖θ‖₂ = {} < {}",
                    signal.norm2, min_radius
                ),
            ));
        }
        if model.frobenius() > rho {
            return Err(Error::domain(
                "estimate_risk",
                format!(
                    "alternative {i} violates the Frobenius constraint: ‖Σ‖_F = {} > ρ = {}",
                    model.frobenius(),
                    rho
                ),
            ));
        }
    }

    let n_nulls = null_models.len();
    let n_cells = n_nulls + alt_instances.len();
    let rejects: Vec<bool> = (0..n_cells * replications)
        .into_par_iter()
        .map(|idx| -> Result<bool> {
            let cell = idx / replications;
            let path = SeedPath {
                seed,
                replicate: idx as u64,
            };
            let outcome = if cell < n_nulls {
                let model = &null_models[cell];
                let eps = model.sample_noise(path);
                let y: Vec<f64> = eps.iter().map(|e| sigma * e).collect();
                run_test(&y, model.diag_var(), sigma, s, rho, gamma)?
            } else {
                let (signal, model) = &alt_instances[cell - n_nulls];
                let obs = observe(signal, model, sigma, path)?;
                run_test(&obs.y, model.diag_var(), sigma, s, rho, gamma)?
            };
            Ok(outcome.reject)
        })
        .collect::<Result<Vec<bool>>>()?;

    let cell_reject_rate = |cell: usize| -> f64 {
        let start = cell * replications;
        let count = rejects[start..start + replications]
            .iter()
            .filter(|r| **r)
            .count();
        count as f64 / replications as f64
    };

    let type1 = (0..n_nulls).map(cell_reject_rate).fold(0.0_f64, f64::max);
    let type2_vacuous = alt_instances.is_empty();
    let type2 = (n_nulls..n_cells)
        .map(|c| 1.0 - cell_reject_rate(c))
        .fold(0.0_f64, f64::max);

    Ok(RiskEstimate {
        type1,
        type2,
        total: type1 + type2,
        replications,
        std_err_type1: binomial_std_err(type1, replications),
        std_err_type2: if type2_vacuous {
            0.0
        } else {
            binomial_std_err(type2, replications)
        },
        type2_vacuous,
    })
}

/// What varies along a sweep: the separation radius at fixed γ, or γ with
/// the radius tied to it through r̄_γ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SweepGrid {
    Radius { gamma: f64, radii: Vec<f64> },
    Gamma { gammas: Vec<f64> },
}

/// One sweep point: the grid coordinates plus the estimated risk.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub radius: f64,
    pub risk: RiskEstimate,
}

/// Sweeps the testing risk along a radius or γ grid. Alternatives are
/// rebuilt at each grid point with ‖θ‖₂ equal to the point's radius, using
/// a fixed per-family seed path so that only the radius varies along the
/// sweep.
#[allow(clippy::too_many_arguments)]
pub fn radius_sweep(
    null_models: &[CovarianceModel],
    alt_specs: &[(crate::models::SignalShape, CovarianceModel)],
    sigma: f64,
    s: usize,
    rho: f64,
    grid: &SweepGrid,
    replications: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let points: Vec<(f64, f64)> = match grid {
        SweepGrid::Radius { gamma, radii } => {
            if radii.is_empty() {
                return Err(Error::domain(
                    "radius_sweep",
                    "radius grid must be nonempty".to_string(),
                ));
            }
            radii.iter().map(|r| (*gamma, *r)).collect()
        }
        SweepGrid::Gamma { gammas } => {
            if gammas.is_empty() {
                return Err(Error::domain(
                    "radius_sweep",
                    "gamma grid must be nonempty".to_string(),
                ));
            }
            gammas
                .iter()
                .map(|g| Ok((*g, separation_radius(*g, sigma, s, rho)?)))
                .collect::<Result<Vec<_>>>()?
        }
    };

    let mut rows = Vec::with_capacity(points.len());
    for (gamma, radius) in points {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::domain(
                "radius_sweep",
                format!("radius must be nonnegative and finite, got {radius}"),
            ));
        }
        let mut alts = Vec::with_capacity(alt_specs.len());
        for (i, (shape, model)) in alt_specs.iter().enumerate() {
            let path = SeedPath {
                seed,
                replicate: i as u64,
            };
            let signal = crate::models::make_signal(model.dim(), s, *shape, radius, path)?;
            alts.push((signal, model.clone()));
        }
        // construction rounds ‖θ‖₂ by an ulp or two, so relax the radius
        // check accordingly
        let min_radius = radius * (1.0 - 1e-9);
        let risk = estimate_risk(
            null_models,
            &alts,
            sigma,
            s,
            rho,
            gamma,
            min_radius,
            replications,
            seed,
        )?;
        rows.push(SweepRow {
            gamma,
            radius,
            risk,
        });
    }
    Ok(rows)
}
