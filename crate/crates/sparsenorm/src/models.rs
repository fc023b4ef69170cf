//! Structured covariance families, sparse signal generators, and
//! reproducible sampling of observations Y = θ + σε with ε ~ N(0, Σ).
//!
//! Each family carries closed forms for the scalars every estimator needs —
//! dimension, per-coordinate variances, ‖Σ‖_F, ‖Σ̃‖_F of the correlation
//! matrix, and λ_max — so models stay O(d) to build even at d = 10⁶, and a
//! sampler that realizes the exact law N(0, Σ) without ever factoring a
//! d×d matrix (the dense fallback excepted). Several of the interesting
//! families are rank-deficient on purpose, which is why the samplers use
//! one-factor / recursive forms instead of a Cholesky.
//!
//! Randomness is counter-based: every replicate owns a disjoint set of
//! ChaCha streams keyed by (experiment seed, replicate index, stream kind),
//! so results are bit-identical no matter how replicates are scheduled
//! across threads.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of RNG streams reserved per replicate; see [`Stream`].
pub const STREAMS_PER_REPLICATE: u64 = 4;

/// The independent randomness lanes within one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    /// Noise vector ε.
    Noise = 0,
    /// Signal support draw.
    Support = 1,
    /// Signal values / signs.
    Values = 2,
    /// Anything auxiliary (contamination, pair couplings, ...).
    Aux = 3,
}

/// Address of one replicate's randomness: an experiment seed plus the
/// replicate index. Identical paths reproduce identical draws bit-for-bit,
/// independent of thread scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedPath {
    pub seed: u64,
    pub replicate: u64,
}

impl SeedPath {
    pub fn new(seed: u64, replicate: u64) -> Self {
        Self { seed, replicate }
    }

    /// The generator for one stream of this replicate. Streams are disjoint
    /// ChaCha counters: stream id = replicate · STREAMS_PER_REPLICATE + kind.
    pub fn rng(&self, stream: Stream) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(
            self.replicate
                .wrapping_mul(STREAMS_PER_REPLICATE)
                .wrapping_add(stream as u64),
        );
        rng
    }
}

/// Covariance family descriptors. `DenseExplicit` holds the full matrix
/// row-major; everything else is parametric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CovFamily {
    /// Σ = I.
    Identity,
    /// Σ = (1 − γ)I + γ11ᵀ, γ ∈ [0, 1].
    Equicorrelation { gamma: f64 },
    /// p leading all-ones blocks of size r, identity tail; requires rp ≤ d.
    BlockOnes { r: usize, p: usize },
    /// Σ_ij = ρ^|i−j|, ρ ∈ (−1, 1).
    Ar1 { rho_corr: f64 },
    /// Σ = diag(w), per-coordinate variances w_i ∈ (0, 1].
    DiagonalScaled { weights: Vec<f64> },
    /// Arbitrary symmetric PSD matrix (rows of length d).
    DenseExplicit { matrix: Vec<Vec<f64>> },
}

impl CovFamily {
    /// Short machine-readable family name (CSV column, config keyword).
    pub fn label(&self) -> &'static str {
        match self {
            CovFamily::Identity => "identity",
            CovFamily::Equicorrelation { .. } => "equicorrelation",
            CovFamily::BlockOnes { .. } => "blockones",
            CovFamily::Ar1 { .. } => "ar1",
            CovFamily::DiagonalScaled { .. } => "diagonalscaled",
            CovFamily::DenseExplicit { .. } => "dense",
        }
    }

    /// Compact parameter rendering for reports ("gamma=0.5", "r=3,p=2", ...).
    pub fn params_string(&self) -> String {
        match self {
            CovFamily::Identity => String::new(),
            CovFamily::Equicorrelation { gamma } => format!("gamma={gamma}"),
            CovFamily::BlockOnes { r, p } => format!("r={r},p={p}"),
            CovFamily::Ar1 { rho_corr } => format!("rho={rho_corr}"),
            CovFamily::DiagonalScaled { weights } => format!("weights[{}]", weights.len()),
            CovFamily::DenseExplicit { matrix } => format!("dense[{}]", matrix.len()),
        }
    }
}

/// A validated covariance model with all derived scalars cached.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    family: CovFamily,
    d: usize,
    /// Per-coordinate variances σ_i².
    diag_var: Vec<f64>,
    /// Per-coordinate standard deviations σ_i.
    diag_sd: Vec<f64>,
    frobenius: f64,
    frobenius_corr: f64,
    lambda_max: f64,
    /// Sampling factor for DenseExplicit: U·diag(√λ⁺), so ε = F·z.
    factor: Option<DMatrix<f64>>,
}

impl CovarianceModel {
    pub fn family(&self) -> &CovFamily {
        &self.family
    }
    pub fn dim(&self) -> usize {
        self.d
    }
    /// Per-coordinate variances σ_i².
    pub fn diag_var(&self) -> &[f64] {
        &self.diag_var
    }
    /// Per-coordinate standard deviations σ_i.
    pub fn diag_sd(&self) -> &[f64] {
        &self.diag_sd
    }
    /// ‖Σ‖_F.
    pub fn frobenius(&self) -> f64 {
        self.frobenius
    }
    /// ‖Σ̃‖_F of the correlation matrix Σ̃_ij = Σ_ij/(σ_iσ_j)
    /// (coordinates with σ_i = 0 contribute zero rows by convention).
    pub fn frobenius_corr(&self) -> f64 {
        self.frobenius_corr
    }
    /// Largest eigenvalue λ_max(Σ).
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }
    /// max_i σ_i²; ≤ 1 under the normalized-variance assumption.
    pub fn max_diag_var(&self) -> f64 {
        self.diag_var.iter().cloned().fold(0.0, f64::max)
    }
    /// min_i σ_i²; experiments may assert their own positive floor on it.
    pub fn min_diag_var(&self) -> f64 {
        self.diag_var.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// The full matrix, for tests and the dense sampler comparison; refuses
    /// dimensions past 5000 to keep misuse out of O(d²) memory.
    pub fn materialize(&self) -> Result<DMatrix<f64>> {
        if self.d > 5000 {
            return Err(Error::InvalidCovariance(format!(
                "refusing to materialize a {0}x{0} matrix (limit 5000)",
                self.d
            )));
        }
        let d = self.d;
        let mut m = DMatrix::<f64>::zeros(d, d);
        match &self.family {
            CovFamily::Identity => {
                for i in 0..d {
                    m[(i, i)] = 1.0;
                }
            }
            CovFamily::Equicorrelation { gamma } => {
                for i in 0..d {
                    for j in 0..d {
                        m[(i, j)] = if i == j { 1.0 } else { *gamma };
                    }
                }
            }
            CovFamily::BlockOnes { r, p } => {
                for b in 0..*p {
                    for i in b * r..(b + 1) * r {
                        for j in b * r..(b + 1) * r {
                            m[(i, j)] = 1.0;
                        }
                    }
                }
                for i in r * p..d {
                    m[(i, i)] = 1.0;
                }
            }
            CovFamily::Ar1 { rho_corr } => {
                for i in 0..d {
                    for j in 0..d {
                        m[(i, j)] = rho_corr.powi((i as i32 - j as i32).abs());
                    }
                }
            }
            CovFamily::DiagonalScaled { weights } => {
                for i in 0..d {
                    m[(i, i)] = weights[i];
                }
            }
            CovFamily::DenseExplicit { matrix } => {
                for i in 0..d {
                    for j in 0..d {
                        m[(i, j)] = matrix[i][j];
                    }
                }
            }
        }
        Ok(m)
    }

    /// Draws ε ~ N(0, Σ) for this replicate's noise stream.
    ///
    /// Draw order per family (fixed; part of the reproducibility contract):
    /// - Identity / DiagonalScaled: one standard normal per coordinate.
    /// - Equicorrelation: shared factor W first, then Z_1..Z_d;
    ///   ε_i = √(1−γ)Z_i + √γ·W.
    /// - BlockOnes: one normal per block (blocks left to right), then one
    ///   per tail coordinate; every coordinate of block b equals W_b.
    /// - AR1: Z_1..Z_d; ε_1 = Z_1, ε_i = ρε_{i−1} + √(1−ρ²)Z_i.
    /// - DenseExplicit: Z_1..Z_d, then ε = F·Z with F = U·diag(√λ⁺).
    pub fn sample_noise(&self, path: SeedPath) -> Vec<f64> {
        let mut rng = path.rng(Stream::Noise);
        self.sample_noise_rng(&mut rng)
    }

    /// As [`sample_noise`](Self::sample_noise) but drawing from a caller
    /// generator (used for auxiliary couplings in the identity checks).
    pub fn sample_noise_rng(&self, rng: &mut ChaCha12Rng) -> Vec<f64> {
        let d = self.d;
        match &self.family {
            CovFamily::Identity => (0..d).map(|_| rng.sample(StandardNormal)).collect(),
            CovFamily::DiagonalScaled { .. } => {
                let mut eps = Vec::with_capacity(d);
                for i in 0..d {
                    let z: f64 = rng.sample(StandardNormal);
                    eps.push(self.diag_sd[i] * z);
                }
                eps
            }
            CovFamily::Equicorrelation { gamma } => {
                let w: f64 = rng.sample(StandardNormal);
                let (a, b) = ((1.0 - gamma).sqrt(), gamma.sqrt());
                (0..d)
                    .map(|_| {
                        let z: f64 = rng.sample(StandardNormal);
                        a * z + b * w
                    })
                    .collect()
            }
            CovFamily::BlockOnes { r, p } => {
                let mut eps = vec![0.0; d];
                for b in 0..*p {
                    let w: f64 = rng.sample(StandardNormal);
                    for e in eps.iter_mut().skip(b * r).take(*r) {
                        *e = w;
                    }
                }
                for e in eps.iter_mut().skip(r * p) {
                    *e = rng.sample(StandardNormal);
                }
                eps
            }
            CovFamily::Ar1 { rho_corr } => {
                let innov = (1.0 - rho_corr * rho_corr).sqrt();
                let mut eps = Vec::with_capacity(d);
                let mut prev: f64 = rng.sample(StandardNormal);
                eps.push(prev);
                for _ in 1..d {
                    let z: f64 = rng.sample(StandardNormal);
                    prev = rho_corr * prev + innov * z;
                    eps.push(prev);
                }
                eps
            }
            CovFamily::DenseExplicit { .. } => {
                let z = DMatrix::from_fn(d, 1, |_, _| rng.sample(StandardNormal));
                let f = self.factor.as_ref().expect("dense model carries factor");
                (f * z).column(0).iter().cloned().collect()
            }
        }
    }
}

/// Builds a validated [`CovarianceModel`] of dimension `d`.
///
/// All cached scalars come from closed forms except λ_max of AR1 (an O(d)
/// power iteration) and everything for DenseExplicit (a symmetric
/// eigendecomposition, allowed since dense input is capped at d = 5000).
pub fn make_covariance(family: CovFamily, d: usize) -> Result<CovarianceModel> {
    if d == 0 {
        return Err(Error::InvalidCovariance("dimension must be ≥ 1".into()));
    }
    let df = d as f64;
    match family {
        CovFamily::Identity => Ok(CovarianceModel {
            family: CovFamily::Identity,
            d,
            diag_var: vec![1.0; d],
            diag_sd: vec![1.0; d],
            frobenius: df.sqrt(),
            frobenius_corr: df.sqrt(),
            lambda_max: 1.0,
            factor: None,
        }),
        CovFamily::Equicorrelation { gamma } => {
            if !(0.0..=1.0).contains(&gamma) {
                return Err(Error::InvalidCovariance(format!(
                    "equicorrelation gamma must lie in [0, 1], got {gamma}"
                )));
            }
            let frob = (df + gamma * gamma * df * (df - 1.0)).sqrt();
            Ok(CovarianceModel {
                family: CovFamily::Equicorrelation { gamma },
                d,
                diag_var: vec![1.0; d],
                diag_sd: vec![1.0; d],
                frobenius: frob,
                frobenius_corr: frob,
                lambda_max: 1.0 - gamma + gamma * df,
                factor: None,
            })
        }
        CovFamily::BlockOnes { r, p } => {
            if r == 0 || p == 0 {
                return Err(Error::InvalidCovariance(
                    "block size r and block count p must be ≥ 1".into(),
                ));
            }
            if r.checked_mul(p).map_or(true, |rp| rp > d) {
                return Err(Error::InvalidCovariance(format!(
                    "blocks exceed dimension: r·p = {}·{} > d = {d}",
                    r, p
                )));
            }
            let frob = ((p * r * r + (d - r * p)) as f64).sqrt();
            Ok(CovarianceModel {
                family: CovFamily::BlockOnes { r, p },
                d,
                diag_var: vec![1.0; d],
                diag_sd: vec![1.0; d],
                frobenius: frob,
                frobenius_corr: frob,
                lambda_max: r as f64,
                factor: None,
            })
        }
        CovFamily::Ar1 { rho_corr } => {
            if !(rho_corr > -1.0 && rho_corr < 1.0) {
                return Err(Error::InvalidCovariance(format!(
                    "AR1 correlation must lie in (−1, 1), got {rho_corr}"
                )));
            }
            // ‖Σ‖_F² = d + 2Σ_{k=1}^{d−1} (d−k)ρ^{2k}, O(d) with early stop
            // once ρ^{2k} underflows.
            let r2 = rho_corr * rho_corr;
            let mut frob_sq = df;
            let mut pow = 1.0;
            for k in 1..d {
                pow *= r2;
                if pow == 0.0 {
                    break;
                }
                frob_sq += 2.0 * (d - k) as f64 * pow;
            }
            Ok(CovarianceModel {
                family: CovFamily::Ar1 { rho_corr },
                d,
                diag_var: vec![1.0; d],
                diag_sd: vec![1.0; d],
                frobenius: frob_sq.sqrt(),
                frobenius_corr: frob_sq.sqrt(),
                lambda_max: ar1_lambda_max(d, rho_corr),
                factor: None,
            })
        }
        CovFamily::DiagonalScaled { weights } => {
            if weights.len() != d {
                return Err(Error::dim(format!(
                    "weights length {} does not match d = {d}",
                    weights.len()
                )));
            }
            if weights.iter().any(|w| !(*w > 0.0 && *w <= 1.0)) {
                return Err(Error::InvalidCovariance(
                    "diagonal weights must lie in (0, 1]".into(),
                ));
            }
            let frob = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
            let lambda = weights.iter().cloned().fold(0.0, f64::max);
            let diag_sd: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
            Ok(CovarianceModel {
                family: CovFamily::DiagonalScaled {
                    weights: weights.clone(),
                },
                d,
                diag_var: weights,
                diag_sd,
                // correlation matrix of a positive diagonal Σ is I
                frobenius_corr: df.sqrt(),
                frobenius: frob,
                lambda_max: lambda,
                factor: None,
            })
        }
        CovFamily::DenseExplicit { matrix } => make_dense(matrix, d),
    }
}

fn make_dense(matrix: Vec<Vec<f64>>, d: usize) -> Result<CovarianceModel> {
    if d > 5000 {
        return Err(Error::InvalidCovariance(
            "dense covariance input is capped at d = 5000".into(),
        ));
    }
    if matrix.len() != d || matrix.iter().any(|row| row.len() != d) {
        return Err(Error::dim(format!("dense matrix is not {d}x{d}")));
    }
    let m = DMatrix::from_fn(d, d, |i, j| matrix[i][j]);
    let scale = m.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    for i in 0..d {
        for j in (i + 1)..d {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale.max(1.0) {
                return Err(Error::InvalidCovariance(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
        if m[(i, i)] < 0.0 {
            return Err(Error::InvalidCovariance(format!(
                "negative diagonal entry at {i}"
            )));
        }
    }
    let frobenius = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let diag_var: Vec<f64> = (0..d).map(|i| m[(i, i)]).collect();
    let diag_sd: Vec<f64> = diag_var.iter().map(|v| v.sqrt()).collect();
    // Correlation Frobenius with the zero-variance convention Σ̃_ij = 0
    // whenever σ_iσ_j = 0 (PSD forces those rows to zero anyway).
    let mut corr_sq = 0.0;
    for i in 0..d {
        for j in 0..d {
            let denom = diag_sd[i] * diag_sd[j];
            if denom > 0.0 {
                let c = m[(i, j)] / denom;
                corr_sq += c * c;
            }
        }
    }

    let eigen = SymmetricEigen::new(m);
    let lambda_max = eigen
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if lambda_max < 0.0 {
        return Err(Error::NotPsd {
            eigenvalue: lambda_max,
            tol: 0.0,
        });
    }
    let tol = 1e-8 * lambda_max;
    let mut clipped = eigen.eigenvalues.clone();
    for v in clipped.iter_mut() {
        if *v < -tol {
            return Err(Error::NotPsd {
                eigenvalue: *v,
                tol: -tol,
            });
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let mut factor = eigen.eigenvectors;
    for (j, lam) in clipped.iter().enumerate() {
        let s = lam.sqrt();
        for i in 0..d {
            factor[(i, j)] *= s;
        }
    }
    Ok(CovarianceModel {
        family: CovFamily::DenseExplicit {
            matrix: matrix.clone(),
        },
        d,
        diag_var,
        diag_sd,
        frobenius,
        frobenius_corr: corr_sq.sqrt(),
        lambda_max,
        factor: Some(factor),
    })
}

/// Largest eigenvalue of the AR1 correlation matrix by power iteration;
/// each matvec is O(d) via forward/backward geometric prefixes.
fn ar1_lambda_max(d: usize, rho: f64) -> f64 {
    if d == 1 || rho == 0.0 {
        return 1.0;
    }
    // The top eigenvector has constant sign pattern for ρ > 0 and an
    // alternating one for ρ < 0; start inside the right orthant.
    let mut v: Vec<f64> = (0..d)
        .map(|i| if rho > 0.0 || i % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    let norm0 = (d as f64).sqrt();
    v.iter_mut().for_each(|x| *x /= norm0);

    let mut w = vec![0.0; d];
    let mut lambda = 0.0;
    for _ in 0..2000 {
        ar1_matvec(rho, &v, &mut w);
        let rq: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
        if (rq - lambda).abs() <= 5e-14 * rq.abs().max(1.0) {
            return rq;
        }
        lambda = rq;
    }
    lambda
}

/// w = Σv for Σ_ij = ρ^|i−j|, computed as L + R − v with the running sums
/// L_i = ρL_{i−1} + v_i and R_i = ρR_{i+1} + v_i.
fn ar1_matvec(rho: f64, v: &[f64], w: &mut [f64]) {
    let d = v.len();
    let mut acc = 0.0;
    for i in 0..d {
        acc = rho * acc + v[i];
        w[i] = acc;
    }
    acc = 0.0;
    for i in (0..d).rev() {
        acc = rho * acc + v[i];
        w[i] += acc - v[i];
    }
}

/// How the nonzero magnitudes of a sparse signal are shaped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalShape {
    /// All nonzeros share magnitude ‖θ‖₂/√s, random signs.
    Flat,
    /// A single nonzero of magnitude ‖θ‖₂ at one uniform position.
    SingleSpike,
    /// Magnitudes ∝ 2^{−k} across the support, random signs.
    Geometric,
}

impl std::str::FromStr for SignalShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(SignalShape::Flat),
            "single-spike" | "spike" => Ok(SignalShape::SingleSpike),
            "geometric" => Ok(SignalShape::Geometric),
            other => Err(Error::InvalidConfig(format!(
                "unknown signal shape {other:?} (expected flat, single-spike, or geometric)"
            ))),
        }
    }
}

/// A sparse mean vector stored as (sorted support, values on support).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub dim: usize,
    /// Sorted, distinct coordinate indices carrying the nonzeros.
    pub support: Vec<usize>,
    /// Values aligned with `support`.
    pub values: Vec<f64>,
    /// |support|.
    pub sparsity: usize,
    /// Achieved ‖θ‖₂ (recomputed from the values).
    pub norm2: f64,
}

impl SignalSpec {
    /// The dense vector θ.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut theta = vec![0.0; self.dim];
        for (i, v) in self.support.iter().zip(&self.values) {
            theta[*i] = *v;
        }
        theta
    }

    /// Exact ‖θ‖₂² as summed over the support.
    pub fn norm2_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// Draws an s-sparse signal with ‖θ‖₂ equal to `norm2_target` (to 1e-12
/// relative), support uniform without replacement (Support stream), signs
/// and magnitudes from the Values stream in ascending support order.
///
/// `s = 0` with a zero target yields the zero vector; a nonzero target on
/// an empty support is impossible and errors.
pub fn make_signal(
    d: usize,
    s: usize,
    shape: SignalShape,
    norm2_target: f64,
    path: SeedPath,
) -> Result<SignalSpec> {
    if s > d {
        return Err(Error::InvalidConfig(format!(
            "sparsity s = {s} exceeds dimension d = {d}"
        )));
    }
    if !(norm2_target >= 0.0 && norm2_target.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "norm target must be finite and ≥ 0, got {norm2_target}"
        )));
    }
    if s == 0 || norm2_target == 0.0 {
        if norm2_target > 0.0 {
            return Err(Error::InvalidConfig(
                "cannot place a positive norm on an empty support".into(),
            ));
        }
        return Ok(SignalSpec {
            dim: d,
            support: Vec::new(),
            values: Vec::new(),
            sparsity: 0,
            norm2: 0.0,
        });
    }

    let n_nonzero = match shape {
        SignalShape::SingleSpike => 1,
        _ => s,
    };
    let mut support: Vec<usize> = {
        let mut rng = path.rng(Stream::Support);
        rand::seq::index::sample(&mut rng, d, n_nonzero)
            .into_iter()
            .collect()
    };
    support.sort_unstable();

    let mut rng = path.rng(Stream::Values);
    let values: Vec<f64> = match shape {
        SignalShape::Flat => {
            let mag = norm2_target / (n_nonzero as f64).sqrt();
            (0..n_nonzero)
                .map(|_| if rng.random::<bool>() { mag } else { -mag })
                .collect()
        }
        SignalShape::SingleSpike => {
            vec![if rng.random::<bool>() {
                norm2_target
            } else {
                -norm2_target
            }]
        }
        SignalShape::Geometric => {
            let weights: Vec<f64> = (1..=n_nonzero).map(|k| 0.5_f64.powi(k as i32)).collect();
            let scale = norm2_target / weights.iter().map(|w| w * w).sum::<f64>().sqrt();
            weights
                .into_iter()
                .map(|w| {
                    let mag = scale * w;
                    if rng.random::<bool>() {
                        mag
                    } else {
                        -mag
                    }
                })
                .collect()
        }
    };

    let norm2 = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(SignalSpec {
        dim: d,
        support,
        values,
        sparsity: n_nonzero,
        norm2,
    })
}

/// One observed vector y = θ + σε together with how it was produced.
#[derive(Debug, Clone)]
pub struct Observation {
    pub y: Vec<f64>,
    pub signal: SignalSpec,
    pub sigma: f64,
    pub seed_path: SeedPath,
}

/// Samples y = θ + σε for one replicate.
pub fn observe(
    signal: &SignalSpec,
    model: &CovarianceModel,
    sigma: f64,
    path: SeedPath,
) -> Result<Observation> {
    if signal.dim != model.dim() {
        return Err(Error::dim(format!(
            "signal dimension {} vs covariance dimension {}",
            signal.dim,
            model.dim()
        )));
    }
    if !(sigma > 0.0) {
        return Err(Error::NonPositiveSigma(sigma));
    }
    let mut y = model.sample_noise(path);
    for v in y.iter_mut() {
        *v *= sigma;
    }
    for (i, v) in signal.support.iter().zip(&signal.values) {
        y[*i] += *v;
    }
    Ok(Observation {
        y,
        signal: signal.clone(),
        sigma,
        seed_path: path,
    })
}
