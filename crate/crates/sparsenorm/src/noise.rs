//! Noise-level estimation from normalized observations Ỹ_i = Y_i/σ_i: the
//! empirical CDF of squares, the dyadic median threshold t̂, the robust
//! median-based estimator σ̂²_S, the cosine-moment estimator σ̂²_D, and the
//! quantile-calibrated σ̂²_η.
//!
//! The dyadic threshold is computed in closed form from one order statistic
//! rather than by scanning an unbounded grid; the two are proven equal in
//! tests. All quantities are exact functions of the sorted squares, so
//! scaling the data by a power of two scales t̂ and σ̂²_S by exactly the
//! corresponding power (the dyadic grid absorbs the scale).

use crate::special::chi1_quantile;
use crate::{Error, Result};

/// Observations normalized by their per-coordinate noise scales, with the
/// sorted squares cached for order-statistic queries.
#[derive(Debug, Clone)]
pub struct NormalizedSample {
    y_tilde: Vec<f64>,
    y_tilde_sq_sorted: Vec<f64>,
}

impl NormalizedSample {
    /// Normalizes `y` by the standard deviations `diag_sd` (σ_i, not σ_i²).
    /// Every σ_i must be strictly positive.
    pub fn new(y: &[f64], diag_sd: &[f64]) -> Result<Self> {
        if y.len() != diag_sd.len() {
            return Err(Error::dim(format!(
                "observation length {} vs diagonal length {}",
                y.len(),
                diag_sd.len()
            )));
        }
        if y.is_empty() {
            return Err(Error::dim("sample must be nonempty"));
        }
        if diag_sd.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::domain(
                "normalized_sample",
                "all per-coordinate noise scales must be strictly positive".to_string(),
            ));
        }
        let y_tilde: Vec<f64> = y.iter().zip(diag_sd).map(|(yi, si)| yi / si).collect();
        Ok(Self::from_normalized(y_tilde))
    }

    /// Wraps already-normalized observations.
    pub fn from_normalized(y_tilde: Vec<f64>) -> Self {
        let mut sq: Vec<f64> = y_tilde.iter().map(|v| v * v).collect();
        sq.sort_unstable_by(f64::total_cmp);
        Self {
            y_tilde,
            y_tilde_sq_sorted: sq,
        }
    }

    pub fn len(&self) -> usize {
        self.y_tilde.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_tilde.is_empty()
    }

    pub fn y_tilde(&self) -> &[f64] {
        &self.y_tilde
    }

    pub fn squares_sorted(&self) -> &[f64] {
        &self.y_tilde_sq_sorted
    }

    /// The k-th smallest square, 1-indexed.
    fn order_statistic(&self, k: usize) -> f64 {
        self.y_tilde_sq_sorted[k - 1]
    }
}

/// Which noise estimator produced a [`NoiseEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMethod {
    /// Median/dyadic estimator σ̂²_S.
    S,
    /// Cosine-moment estimator σ̂²_D (already clamped by 2σ̂²_S).
    D,
    /// Quantile-calibrated σ̂²_η.
    Eta,
}

/// A σ² estimate together with the intermediates that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseEstimate {
    /// The estimate; +∞ when `sentinel` is set.
    pub value: f64,
    pub method: NoiseMethod,
    /// Dyadic threshold t̂ when one was involved.
    pub t_hat: Option<f64>,
    /// Empirical CDF of squares at t̂ (method S only).
    pub f_hat_at_t: Option<f64>,
    /// True when the estimate is the +∞ out-of-range sentinel.
    pub sentinel: bool,
}

/// Empirical CDF of the squared normalized observations:
/// `F̂(t) = #{i : Ỹ_i² ≤ t}/d` (right-continuous; binary search).
pub fn empirical_cdf_sq(sample: &NormalizedSample, t: f64) -> f64 {
    let sq = sample.squares_sorted();
    let count = sq.partition_point(|&x| x <= t);
    count as f64 / sq.len() as f64
}

/// Smallest power of two ≥ m (m itself when m is exactly a power of two).
/// Exact: derived from the rounded log and corrected by exact doubling
/// and halving, which never round for powers of two.
fn pow2_ceil(m: f64) -> f64 {
    debug_assert!(m > 0.0 && m.is_finite());
    let guess = m.log2().ceil();
    let mut t = if guess >= -1074.0 && guess <= 1023.0 {
        2.0_f64.powi(guess as i32)
    } else if guess < 0.0 {
        f64::MIN_POSITIVE
    } else {
        2.0_f64.powi(1023)
    };
    while t < m {
        t *= 2.0;
    }
    loop {
        let half = t / 2.0;
        if half >= m && half > 0.0 {
            t = half;
        } else {
            break;
        }
    }
    t
}

/// The dyadic threshold t̂ = min{t = 2^ℓ : F̂(t) ≥ 1/2}, computed in closed
/// form as the smallest power of two at or above the ⌈d/2⌉-th smallest
/// square. Errors when that order statistic is zero (no dyadic t can then
/// be minimal) or when the squares overflowed to infinity.
pub fn dyadic_threshold(sample: &NormalizedSample) -> Result<f64> {
    dyadic_threshold_with(sample, 0.5)
}

/// As [`dyadic_threshold`] with the CDF level (0.5, the median, in the
/// canonical estimator) exposed as an advanced knob.
pub fn dyadic_threshold_with(sample: &NormalizedSample, half: f64) -> Result<f64> {
    if !(half > 0.0 && half < 1.0) {
        return Err(Error::domain(
            "dyadic_threshold",
            format!("CDF level must lie in (0, 1), got {half}"),
        ));
    }
    let d = sample.len();
    let k = ((half * d as f64).ceil() as usize).clamp(1, d);
    let m = sample.order_statistic(k);
    if m == 0.0 {
        return Err(Error::DegenerateSample);
    }
    if !m.is_finite() {
        return Err(Error::domain(
            "dyadic_threshold",
            "squared observations overflowed".to_string(),
        ));
    }
    Ok(pow2_ceil(m))
}

/// σ̂²_S(t) = t / F⁻¹(F̂(t)) with F the χ²₁ CDF. F̂(t) = 0 yields the +∞
/// sentinel (no information below t); F̂(t) = 1 yields 0 via the limit
/// F⁻¹(1) = ∞.
pub fn sigma_sq_s_at(sample: &NormalizedSample, t: f64) -> Result<NoiseEstimate> {
    if !(t > 0.0) {
        return Err(Error::domain(
            "sigma_sq_s_at",
            format!("t must be positive, got {t}"),
        ));
    }
    let p = empirical_cdf_sq(sample, t);
    let (value, sentinel) = if p == 0.0 {
        (f64::INFINITY, true)
    } else if p == 1.0 {
        (0.0, false)
    } else {
        (t / chi1_quantile(p)?, false)
    };
    Ok(NoiseEstimate {
        value,
        method: NoiseMethod::S,
        t_hat: Some(t),
        f_hat_at_t: Some(p),
        sentinel,
    })
}

/// The composed estimator σ̂²_S = σ̂²_S(t̂). Since F̂(t̂) ≥ 1/2 by
/// construction, the sentinel branch is unreachable here.
pub fn sigma_sq_s(sample: &NormalizedSample) -> Result<NoiseEstimate> {
    sigma_sq_s_with(sample, 0.5)
}

/// As [`sigma_sq_s`] with the dyadic CDF level exposed.
pub fn sigma_sq_s_with(sample: &NormalizedSample, half: f64) -> Result<NoiseEstimate> {
    let t_hat = dyadic_threshold_with(sample, half)?;
    sigma_sq_s_at(sample, t_hat)
}

/// φ̂_d(u) = (1/d)Σ cos(u·Ỹ_i), the empirical cosine moment.
pub fn cosine_moment(sample: &NormalizedSample, u: f64) -> Result<f64> {
    if !(u > 0.0 && u.is_finite()) {
        return Err(Error::domain(
            "cosine_moment",
            format!("u must be positive and finite, got {u}"),
        ));
    }
    let sum: f64 = sample.y_tilde().iter().map(|v| (u * v).cos()).sum();
    Ok(sum / sample.len() as f64)
}

/// −(2t̂/λ)·log|c|: inverts the Gaussian cosine-moment identity; |c| = 0
/// maps to +∞ so the caller's min-clamp absorbs it instead of a NaN.
fn dense_inversion(t_hat: f64, lambda: f64, cos_moment: f64) -> f64 {
    let a = cos_moment.abs();
    if a == 0.0 {
        f64::INFINITY
    } else {
        -(2.0 * t_hat / lambda) * a.ln()
    }
}

/// The cosine-moment estimator σ̂²_D = min{σ̃²_D, 2σ̂²_S} where
/// σ̃²_D = −(2t̂/λ)·log|φ̂_d(√(λ/t̂))| and λ = (1 ∨ log(s/‖Σ̃‖_F))/6.
pub fn sigma_sq_d(sample: &NormalizedSample, s: usize, frob_corr: f64) -> Result<NoiseEstimate> {
    sigma_sq_d_with(sample, s, frob_corr, 0.5)
}

/// As [`sigma_sq_d`] with the dyadic CDF level exposed.
pub fn sigma_sq_d_with(
    sample: &NormalizedSample,
    s: usize,
    frob_corr: f64,
    half: f64,
) -> Result<NoiseEstimate> {
    if s == 0 {
        return Err(Error::domain(
            "sigma_sq_d",
            "sparsity s must be ≥ 1".to_string(),
        ));
    }
    if !(frob_corr > 0.0) {
        return Err(Error::domain(
            "sigma_sq_d",
            format!("correlation Frobenius norm must be positive, got {frob_corr}"),
        ));
    }
    let lambda = (s as f64 / frob_corr).ln().max(1.0) / 6.0;
    let t_hat = dyadic_threshold_with(sample, half)?;
    let c = cosine_moment(sample, (lambda / t_hat).sqrt())?;
    let tilde = dense_inversion(t_hat, lambda, c);
    let s_est = sigma_sq_s_at(sample, t_hat)?;
    Ok(NoiseEstimate {
        value: tilde.min(2.0 * s_est.value),
        method: NoiseMethod::D,
        t_hat: Some(t_hat),
        f_hat_at_t: None,
        sentinel: false,
    })
}

/// The quantile-calibrated estimator σ̂²_η = M̂ / q_{1−η/20}, with M̂ the
/// ⌈d/2⌉-th smallest square (the exact empirical median in the min sense,
/// not dyadic) and q the χ²₁ quantile.
pub fn sigma_sq_eta(sample: &NormalizedSample, eta: f64) -> Result<NoiseEstimate> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::domain(
            "sigma_sq_eta",
            format!("eta must lie in (0, 1), got {eta}"),
        ));
    }
    let d = sample.len();
    let m_hat = sample.order_statistic(d.div_ceil(2));
    let value = m_hat / chi1_quantile(1.0 - eta / 20.0)?;
    Ok(NoiseEstimate {
        value,
        method: NoiseMethod::Eta,
        t_hat: None,
        f_hat_at_t: None,
        sentinel: false,
    })
}

/// ψ̃(s, Σ) = ‖Σ̃‖_F/d when s ≤ ‖Σ̃‖_F, else s/(d·(1 ∨ log(s/‖Σ̃‖_F))).
pub fn rate_psi_tilde(s: usize, d: usize, frob_corr: f64) -> Result<f64> {
    if s == 0 || d == 0 {
        return Err(Error::domain(
            "rate_psi_tilde",
            "s and d must be ≥ 1".to_string(),
        ));
    }
    if !(frob_corr > 0.0) {
        return Err(Error::domain(
            "rate_psi_tilde",
            format!("correlation Frobenius norm must be positive, got {frob_corr}"),
        ));
    }
    let sf = s as f64;
    let df = d as f64;
    if sf <= frob_corr {
        Ok(frob_corr / df)
    } else {
        Ok(sf / (df * (sf / frob_corr).ln().max(1.0)))
    }
}
