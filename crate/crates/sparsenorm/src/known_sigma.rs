//! Rate functions and the known-noise-level norm estimators.
//!
//! The quadratic functional estimator thresholds squared observations at a
//! level tied to the sparsity and the covariance Frobenius norm, recenters
//! the survivors by the truncated second moment, and falls back to plain
//! bias-corrected summation in the dense regime s > ‖Σ‖_F. The norm
//! estimate is √|Q̂|; a companion variant accepts an upper bound ρ on
//! ‖Σ‖_F instead of the exact value.
//!
//! Accumulation is a plain left-to-right sum over coordinates in input
//! order — deliberately, so a termwise transcription of the defining
//! formulas reproduces these outputs bit-for-bit and scale homogeneity
//! holds to a ulp per term.

use crate::special::truncated_moments;
use crate::{Error, Result};

/// The scalar inputs every rate formula draws on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateInputs {
    /// Sparsity bound s ≥ 1.
    pub s: usize,
    /// Ambient dimension.
    pub d: usize,
    /// ‖Σ‖_F, or the upper bound ρ standing in for it.
    pub frob: f64,
    /// ‖Σ̃‖_F of the correlation matrix.
    pub frob_corr: f64,
    /// λ_max(Σ).
    pub lambda_max: f64,
}

impl RateInputs {
    /// Collects the rate inputs from a covariance model at sparsity `s`.
    pub fn from_model(model: &crate::models::CovarianceModel, s: usize) -> Self {
        Self {
            s,
            d: model.dim(),
            frob: model.frobenius(),
            frob_corr: model.frobenius_corr(),
            lambda_max: model.lambda_max(),
        }
    }
}

fn check_rate_args(op: &'static str, s: usize, t: f64) -> Result<()> {
    if s == 0 {
        return Err(Error::domain(op, "sparsity s must be ≥ 1".to_string()));
    }
    if !(t > 0.0) {
        return Err(Error::domain(op, format!("t must be positive, got {t}")));
    }
    Ok(())
}

/// φ(s, t) = s·log(1 + t/s²) when s ≤ √t, else √t. The boundary s = √t
/// belongs to the first branch (both branches agree there up to the log).
pub fn rate_phi(s: usize, t: f64) -> Result<f64> {
    check_rate_args("rate_phi", s, t)?;
    let sf = s as f64;
    if sf <= t.sqrt() {
        Ok(sf * (1.0 + t / (sf * sf)).ln())
    } else {
        Ok(t.sqrt())
    }
}

/// φ*(s, t) = s·log(1 + t/s²) when s ≤ √t, else s/(1 ∨ log(s/√t)).
pub fn rate_phi_star(s: usize, t: f64) -> Result<f64> {
    check_rate_args("rate_phi_star", s, t)?;
    let sf = s as f64;
    let root = t.sqrt();
    if sf <= root {
        Ok(sf * (1.0 + t / (sf * sf)).ln())
    } else {
        Ok(sf / (sf / root).ln().max(1.0))
    }
}

/// ψ(s, Σ) = φ(s, ‖Σ‖_F²).
pub fn rate_psi(inputs: &RateInputs) -> Result<f64> {
    rate_phi(inputs.s, inputs.frob * inputs.frob)
}

/// ψ̄(s, Σ) = λ_max(Σ) ∧ s.
pub fn rate_psi_bar(inputs: &RateInputs) -> Result<f64> {
    if inputs.s == 0 {
        return Err(Error::domain(
            "rate_psi_bar",
            "sparsity s must be ≥ 1".to_string(),
        ));
    }
    Ok(inputs.lambda_max.min(inputs.s as f64))
}

/// The threshold τ = 3√(log(1 + frob²/s²)) used by the sparse branch.
pub fn sparse_threshold(s: usize, frob: f64) -> Result<f64> {
    check_rate_args("sparse_threshold", s, frob * frob)?;
    let sf = s as f64;
    Ok(3.0 * (1.0 + (frob * frob) / (sf * sf)).ln().sqrt())
}

fn check_estimator_args(
    y: &[f64],
    diag_var: &[f64],
    sigma: f64,
    s: usize,
    frob: f64,
) -> Result<()> {
    if y.len() != diag_var.len() {
        return Err(Error::dim(format!(
            "observation length {} vs diagonal length {}",
            y.len(),
            diag_var.len()
        )));
    }
    if !(sigma > 0.0) {
        return Err(Error::NonPositiveSigma(sigma));
    }
    if s == 0 {
        return Err(Error::domain(
            "estimate_q_known",
            "sparsity s must be ≥ 1".to_string(),
        ));
    }
    if !(frob > 0.0) {
        return Err(Error::domain(
            "estimate_q_known",
            format!("frobenius norm must be positive, got {frob}"),
        ));
    }
    Ok(())
}

/// The quadratic functional estimator Q̂ for known noise level σ.
///
/// Sparse regime s ≤ frob:
/// `Q̂ = Σ_i (Y_i² − σ²σ_i²β_s)·1{|Y_i| > σσ_iτ}` with
/// `τ = 3√(log(1 + frob²/s²))` and `β_s = E[Z² | |Z| ≥ τ]`.
/// Dense regime s > frob: `Q̂ = Σ_i (Y_i² − σ²σ_i²)`.
///
/// The indicator is strict, exactly as defined; in particular a noiseless
/// coordinate (σ_i = 0) has threshold 0 and passes whenever y_i ≠ 0.
/// `diag_var` holds the per-coordinate variances σ_i².
pub fn estimate_q_known(
    y: &[f64],
    diag_var: &[f64],
    sigma: f64,
    s: usize,
    frob: f64,
) -> Result<f64> {
    check_estimator_args(y, diag_var, sigma, s, frob)?;
    let mut acc = 0.0;
    if (s as f64) <= frob {
        let tau = sparse_threshold(s, frob)?;
        let beta = truncated_moments(tau)?.beta;
        for (yi, var) in y.iter().zip(diag_var) {
            if yi.abs() > sigma * var.sqrt() * tau {
                acc += yi * yi - sigma * sigma * var * beta;
            }
        }
    } else {
        for (yi, var) in y.iter().zip(diag_var) {
            acc += yi * yi - sigma * sigma * var;
        }
    }
    Ok(acc)
}

/// N̂ = √|Q̂|, the known-σ norm estimate.
pub fn estimate_norm_known(
    y: &[f64],
    diag_var: &[f64],
    sigma: f64,
    s: usize,
    frob: f64,
) -> Result<f64> {
    Ok(estimate_q_known(y, diag_var, sigma, s, frob)?.abs().sqrt())
}

/// Ñ: the same estimator with an upper bound ρ ≥ ‖Σ‖_F substituted for the
/// exact Frobenius norm (the bound is recommended, not enforced).
pub fn estimate_norm_known_rho(
    y: &[f64],
    diag_var: &[f64],
    sigma: f64,
    s: usize,
    rho: f64,
) -> Result<f64> {
    estimate_norm_known(y, diag_var, sigma, s, rho)
}
