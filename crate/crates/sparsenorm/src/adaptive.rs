//! Norm estimation with unknown noise level: the plug-in statistics Q̂*, N̂*,
//! the confidence-parameterized Q̂*_η, N̂*_η, the regime selector N̂**, and the
//! variants that substitute an upper bound ρ for ‖Σ‖_F. All noise estimates
//! are computed from the same observations the norm statistic uses — no
//! sample splitting.

use crate::known_sigma::{rate_phi_star, sparse_threshold};
use crate::noise::{sigma_sq_d_with, sigma_sq_eta, sigma_sq_s_with, NormalizedSample};
use crate::special::{chi1_quantile, truncated_moments};
use crate::{Error, Result};

/// Everything the adaptive estimators need to know about the model:
/// sparsity, the noise-correlation diagonal, and the Frobenius norms.
#[derive(Debug, Clone)]
pub struct AdaptiveConfig {
    /// Sparsity bound s ≥ 1.
    pub s: usize,
    /// Per-coordinate variances σ_i² of the correlation-scale noise
    /// (the diagonal of Σ). All must be strictly positive: the noise
    /// estimators divide by σ_i.
    pub diag: Vec<f64>,
    /// ‖Σ‖_F, or an upper bound ρ for the bound-only variants.
    pub frob: f64,
    /// ‖Σ̃‖_F of the correlation matrix; defaults to `frob`, which is the
    /// standard reading when the diagonal is bounded above and below.
    pub frob_corr: f64,
    /// Confidence parameter for the η-variants; must be set to call them.
    pub eta: Option<f64>,
    /// CDF level of the dyadic noise threshold (advanced; default 1/2).
    pub dyadic_half: f64,
}

impl AdaptiveConfig {
    /// Builds a config with `frob_corr = frob`, no η, and the default
    /// dyadic level.
    pub fn new(s: usize, diag: Vec<f64>, frob: f64) -> Result<Self> {
        if s == 0 {
            return Err(Error::domain(
                "adaptive_config",
                "sparsity s must be ≥ 1".to_string(),
            ));
        }
        if diag.is_empty() {
            return Err(Error::domain(
                "adaptive_config",
                "diagonal must be nonempty".to_string(),
            ));
        }
        if diag.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::domain(
                "adaptive_config",
                "all diagonal variances must be strictly positive and finite".to_string(),
            ));
        }
        if !(frob > 0.0 && frob.is_finite()) {
            return Err(Error::domain(
                "adaptive_config",
                format!("Frobenius norm must be positive and finite, got {frob}"),
            ));
        }
        Ok(Self {
            s,
            diag,
            frob,
            frob_corr: frob,
            eta: None,
            dyadic_half: 0.5,
        })
    }

    /// Builds a config from a covariance model (diagonal and both
    /// Frobenius norms taken from the model).
    pub fn from_model(model: &crate::models::CovarianceModel, s: usize) -> Result<Self> {
        let mut cfg = Self::new(s, model.diag_var().to_vec(), model.frobenius())?;
        cfg.frob_corr = model.frobenius_corr();
        Ok(cfg)
    }

    /// Overrides ‖Σ̃‖_F.
    pub fn with_frob_corr(mut self, frob_corr: f64) -> Result<Self> {
        if !(frob_corr > 0.0 && frob_corr.is_finite()) {
            return Err(Error::domain(
                "adaptive_config",
                format!("correlation Frobenius norm must be positive and finite, got {frob_corr}"),
            ));
        }
        self.frob_corr = frob_corr;
        Ok(self)
    }

    /// Sets the confidence parameter η ∈ (0, 1).
    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::domain(
                "adaptive_config",
                format!("eta must lie in (0, 1), got {eta}"),
            ));
        }
        self.eta = Some(eta);
        Ok(self)
    }

    /// Sets the dyadic CDF level (advanced).
    pub fn with_dyadic_half(mut self, half: f64) -> Result<Self> {
        if !(half > 0.0 && half < 1.0) {
            return Err(Error::domain(
                "adaptive_config",
                format!("dyadic level must lie in (0, 1), got {half}"),
            ));
        }
        self.dyadic_half = half;
        Ok(self)
    }

    fn check_len(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.diag.len() {
            return Err(Error::dim(format!(
                "observation length {} vs diagonal length {}",
                y.len(),
                self.diag.len()
            )));
        }
        Ok(())
    }

    fn normalized(&self, y: &[f64]) -> Result<NormalizedSample> {
        let sd: Vec<f64> = self.diag.iter().map(|v| v.sqrt()).collect();
        NormalizedSample::new(y, &sd)
    }

    fn sparse_regime(&self) -> bool {
        self.s as f64 <= self.frob
    }
}

/// τ_η = 3·√((q_{1−η/20}/q_{η/20})·log(1 + frob²/s²)) with q the χ²₁
/// quantile: the threshold widened by the confidence-dependent quantile
/// ratio.
pub fn sparse_threshold_eta(s: usize, frob: f64, eta: f64) -> Result<f64> {
    if s == 0 {
        return Err(Error::domain(
            "sparse_threshold_eta",
            "s must be ≥ 1".to_string(),
        ));
    }
    if !(frob > 0.0 && frob.is_finite()) {
        return Err(Error::domain(
            "sparse_threshold_eta",
            format!("frob must be positive and finite, got {frob}"),
        ));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::domain(
            "sparse_threshold_eta",
            format!("eta must lie in (0, 1), got {eta}"),
        ));
    }
    let ratio = chi1_quantile(1.0 - eta / 20.0)? / chi1_quantile(eta / 20.0)?;
    let sf = s as f64;
    Ok(3.0 * (ratio * (1.0 + frob * frob / (sf * sf)).ln()).sqrt())
}

/// Sparse-branch sum Σ y_i²·1{|y_i| > scale·σ_i·τ} − center_sq·α·Σ σ_i²,
/// accumulated left to right in the printed term order.
fn sparse_q(y: &[f64], diag: &[f64], noise_sd: f64, tau: f64, center_sq: f64, alpha: f64) -> f64 {
    let mut acc = 0.0;
    for (yi, var) in y.iter().zip(diag) {
        if yi.abs() > noise_sd * var.sqrt() * tau {
            acc += yi * yi;
        }
    }
    let mut diag_sum = 0.0;
    for var in diag {
        diag_sum += var;
    }
    acc - center_sq * alpha * diag_sum
}

/// Dense-branch sum Σ (y_i² − sigma_sq·σ_i²), accumulated left to right.
fn dense_q(y: &[f64], diag: &[f64], sigma_sq: f64) -> f64 {
    let mut acc = 0.0;
    for (yi, var) in y.iter().zip(diag) {
        acc += yi * yi - sigma_sq * var;
    }
    acc
}

/// Q̂*: the plug-in quadratic statistic. In the sparse regime (s ≤ frob) it
/// thresholds at σ̂_S·σ_i·τ and centers by σ̂²_S·α_s·Σσ_i²; in the dense
/// regime it subtracts σ̂²_D·σ_i² coordinatewise.
pub fn estimate_q_star(y: &[f64], config: &AdaptiveConfig) -> Result<f64> {
    config.check_len(y)?;
    let sample = config.normalized(y)?;
    if config.sparse_regime() {
        let s_est = sigma_sq_s_with(&sample, config.dyadic_half)?;
        if s_est.sentinel || !s_est.value.is_finite() {
            return Err(Error::SentinelNoise);
        }
        let tau = sparse_threshold(config.s, config.frob)?;
        let alpha = truncated_moments(tau)?.alpha;
        Ok(sparse_q(
            y,
            &config.diag,
            s_est.value.sqrt(),
            tau,
            s_est.value,
            alpha,
        ))
    } else {
        let d_est = sigma_sq_d_with(&sample, config.s, config.frob_corr, config.dyadic_half)?;
        if !d_est.value.is_finite() {
            return Err(Error::SentinelNoise);
        }
        Ok(dense_q(y, &config.diag, d_est.value))
    }
}

/// N̂* = √|Q̂*|.
pub fn estimate_norm_star(y: &[f64], config: &AdaptiveConfig) -> Result<f64> {
    Ok(estimate_q_star(y, config)?.abs().sqrt())
}

/// Q̂*_η: as Q̂* in the sparse regime but thresholding at
/// max{σ̂_S, σ̂_η}·σ_i·τ_η and centering by σ̂²_S·α_{s,η}·Σσ_i². Defined only
/// for s ≤ frob; the dense regime is rejected.
pub fn estimate_q_star_eta(y: &[f64], config: &AdaptiveConfig) -> Result<f64> {
    let eta = config.eta.ok_or_else(|| {
        Error::domain("estimate_q_star_eta", "config.eta must be set".to_string())
    })?;
    if !config.sparse_regime() {
        return Err(Error::DenseRegimeEta {
            s: config.s,
            frob: config.frob,
        });
    }
    config.check_len(y)?;
    let sample = config.normalized(y)?;
    let s_est = sigma_sq_s_with(&sample, config.dyadic_half)?;
    if s_est.sentinel || !s_est.value.is_finite() {
        return Err(Error::SentinelNoise);
    }
    let eta_est = sigma_sq_eta(&sample, eta)?;
    let scale = s_est.value.sqrt().max(eta_est.value.sqrt());
    let tau_eta = sparse_threshold_eta(config.s, config.frob, eta)?;
    let alpha = truncated_moments(tau_eta)?.alpha;
    Ok(sparse_q(
        y,
        &config.diag,
        scale,
        tau_eta,
        s_est.value,
        alpha,
    ))
}

/// N̂*_η = √|Q̂*_η|.
pub fn estimate_norm_star_eta(y: &[f64], config: &AdaptiveConfig) -> Result<f64> {
    Ok(estimate_q_star_eta(y, config)?.abs().sqrt())
}

/// N̂**: N̂* when s > frob (dense regime), N̂*_η otherwise — equality falls
/// to the η-variant. Requires `config.eta` in the sparse regime.
pub fn estimate_norm_star_star(y: &[f64], config: &AdaptiveConfig) -> Result<f64> {
    if (config.s as f64) > config.frob {
        estimate_norm_star(y, config)
    } else {
        estimate_norm_star_eta(y, config)
    }
}

/// ψ*(s, Σ) = φ*(s, ‖Σ‖_F²).
pub fn rate_psi_star(s: usize, frob: f64) -> Result<f64> {
    if !(frob > 0.0 && frob.is_finite()) {
        return Err(Error::domain(
            "rate_psi_star",
            format!("frob must be positive and finite, got {frob}"),
        ));
    }
    rate_phi_star(s, frob * frob)
}

fn with_rho(config: &AdaptiveConfig, rho: f64) -> Result<AdaptiveConfig> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::domain(
            "with_rho",
            format!("rho must be positive and finite, got {rho}"),
        ));
    }
    let mut cfg = config.clone();
    cfg.frob = rho;
    Ok(cfg)
}

/// Ñ*: N̂* with the upper bound ρ in place of ‖Σ‖_F (in τ and in the regime
/// predicate; ‖Σ̃‖_F is not substituted).
pub fn estimate_norm_star_rho(y: &[f64], config: &AdaptiveConfig, rho: f64) -> Result<f64> {
    estimate_norm_star(y, &with_rho(config, rho)?)
}

/// Ñ*_η: N̂*_η with ρ in place of ‖Σ‖_F.
pub fn estimate_norm_star_eta_rho(y: &[f64], config: &AdaptiveConfig, rho: f64) -> Result<f64> {
    estimate_norm_star_eta(y, &with_rho(config, rho)?)
}
