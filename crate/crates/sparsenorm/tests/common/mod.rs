//! Shared across integration tests: literal transcriptions of the estimator
//! formulas, used as independent oracles for bit-equality checks.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use sparsenorm::special::{chi1_quantile, truncated_moments};
use sparsenorm::Error;

pub struct Instance {
    pub y: Vec<f64>,
    pub diag: Vec<f64>,
    pub sigma: f64,
    pub s: usize,
    pub frob: f64,
}

pub fn random_instance(rng: &mut ChaCha12Rng) -> Instance {
    let d = rng.random_range(1..=12);
    let mut y: Vec<f64> = (0..d).map(|_| rng.random_range(-4.0..4.0)).collect();
    if d >= 4 && rng.random::<f64>() < 0.25 {
        y[0] = 0.0; // exercise the zero-observation edge
    }
    let diag: Vec<f64> = (0..d).map(|_| rng.random_range(0.25..4.0)).collect();
    let sigma = rng.random_range(0.3..3.0);
    let s = rng.random_range(1..=12);
    // spans s ≤ frob and s > frob about evenly
    let frob = rng.random_range(0.5..14.0);
    Instance {
        y,
        diag,
        sigma,
        s,
        frob,
    }
}

/// Literal transcription of the known-noise quadratic-functional formula.
pub fn oracle_q_known(inst: &Instance) -> f64 {
    let Instance {
        y,
        diag,
        sigma,
        s,
        frob,
    } = inst;
    let mut q = 0.0;
    if (*s as f64) <= *frob {
        let sf = *s as f64;
        let tau = 3.0 * (1.0 + (frob * frob) / (sf * sf)).ln().sqrt();
        let beta = truncated_moments(tau).unwrap().beta;
        for i in 0..y.len() {
            if y[i].abs() > sigma * diag[i].sqrt() * tau {
                q += y[i] * y[i] - sigma * sigma * diag[i] * beta;
            }
        }
    } else {
        for i in 0..y.len() {
            q += y[i] * y[i] - sigma * sigma * diag[i];
        }
    }
    q
}

/// Independent recomputation of the median/dyadic variance estimate: sorted
/// normalized squares, the ⌈d/2⌉-th smallest, the smallest power of two
/// above it, and the chi-square inversion at the empirical CDF.
pub fn oracle_sigma_sq_s(y: &[f64], diag: &[f64]) -> Result<(f64, f64, Vec<f64>), Error> {
    let y_tilde: Vec<f64> = y
        .iter()
        .zip(diag)
        .map(|(yi, var)| yi / var.sqrt())
        .collect();
    let mut sq: Vec<f64> = y_tilde.iter().map(|v| v * v).collect();
    sq.sort_unstable_by(f64::total_cmp);
    let d = sq.len();
    let m = sq[d.div_ceil(2) - 1];
    if m == 0.0 {
        return Err(Error::DegenerateSample);
    }
    let mut t_hat = 1.0_f64;
    while t_hat < m {
        t_hat *= 2.0;
    }
    while t_hat / 2.0 >= m && t_hat / 2.0 > 0.0 {
        t_hat /= 2.0;
    }
    let p = sq.iter().filter(|&&x| x <= t_hat).count() as f64 / d as f64;
    let value = if p == 1.0 {
        0.0
    } else {
        t_hat / chi1_quantile(p)?
    };
    Ok((value, t_hat, y_tilde))
}

/// Literal transcription of the plug-in quadratic estimator, sparse and
/// dense branches, including its internal variance estimates.
pub fn oracle_q_star(inst: &Instance) -> Result<f64, Error> {
    let Instance {
        y, diag, s, frob, ..
    } = inst;
    let (sigma_sq_s, t_hat, y_tilde) = oracle_sigma_sq_s(y, diag)?;
    if (*s as f64) <= *frob {
        let sf = *s as f64;
        let tau = 3.0 * (1.0 + (frob * frob) / (sf * sf)).ln().sqrt();
        let alpha = truncated_moments(tau)?.alpha;
        let noise_sd = sigma_sq_s.sqrt();
        let mut acc = 0.0;
        for i in 0..y.len() {
            if y[i].abs() > noise_sd * diag[i].sqrt() * tau {
                acc += y[i] * y[i];
            }
        }
        let mut dsum = 0.0;
        for var in diag {
            dsum += var;
        }
        Ok(acc - sigma_sq_s * alpha * dsum)
    } else {
        // cosine-moment deconvolution estimate, clamped by twice the
        // median estimate (frob_corr defaults to frob in the config)
        let d = y.len();
        let lambda = (*s as f64 / *frob).ln().max(1.0) / 6.0;
        let u = (lambda / t_hat).sqrt();
        let mut csum = 0.0;
        for v in &y_tilde {
            csum += (u * v).cos();
        }
        let c = csum / d as f64;
        let tilde = if c.abs() == 0.0 {
            f64::INFINITY
        } else {
            -(2.0 * t_hat / lambda) * c.abs().ln()
        };
        let sigma_sq_d = tilde.min(2.0 * sigma_sq_s);
        if !sigma_sq_d.is_finite() {
            return Err(Error::SentinelNoise);
        }
        let mut q = 0.0;
        for i in 0..d {
            q += y[i] * y[i] - sigma_sq_d * diag[i];
        }
        Ok(q)
    }
}

/// Literal transcription of the confidence-parameterized variant.
pub fn oracle_q_star_eta(inst: &Instance, eta: f64) -> Result<f64, Error> {
    let Instance {
        y, diag, s, frob, ..
    } = inst;
    let (sigma_sq_s, _, y_tilde) = oracle_sigma_sq_s(y, diag)?;
    let mut sq: Vec<f64> = y_tilde.iter().map(|v| v * v).collect();
    sq.sort_unstable_by(f64::total_cmp);
    let d = sq.len();
    let m_hat = sq[d.div_ceil(2) - 1];
    let sigma_sq_eta = m_hat / chi1_quantile(1.0 - eta / 20.0)?;
    let scale = sigma_sq_s.sqrt().max(sigma_sq_eta.sqrt());
    let ratio = chi1_quantile(1.0 - eta / 20.0)? / chi1_quantile(eta / 20.0)?;
    let sf = *s as f64;
    let tau_eta = 3.0 * (ratio * (1.0 + frob * frob / (sf * sf)).ln()).sqrt();
    let alpha = truncated_moments(tau_eta)?.alpha;
    let mut acc = 0.0;
    for i in 0..y.len() {
        if y[i].abs() > scale * diag[i].sqrt() * tau_eta {
            acc += y[i] * y[i];
        }
    }
    let mut dsum = 0.0;
    for var in diag {
        dsum += var;
    }
    Ok(acc - sigma_sq_s * alpha * dsum)
}
