//! Per-sample gradient distributions via Monte Carlo moment matching.
//!
//! A sampled parameter posterior turns each gradient into a random variable.
//! Its true law is intractable, so we match first and second moments over
//! posterior draws and keep a Gaussian. The fusion-loss gradient distribution
//! is the arithmetic mean of the per-modality ones, exactly, with no extra
//! sampling.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::{SeededRng, SpdMatrix, JITTER_START};
use crate::posterior::GaussianPosterior;

/// Gaussian gradient distribution with cached per-dimension precisions.
#[derive(Debug, Clone)]
pub struct GradDist {
    pub mean: DVector<f64>,
    /// Moment-matched covariance, jittered to positive definite.
    pub covariance: SpdMatrix,
    /// Diagonal of the full inverse covariance (not elementwise reciprocals).
    pub precision_diag: DVector<f64>,
    /// Number of Monte Carlo draws behind the estimate.
    pub n_samples: usize,
    /// Jitter that made the covariance factorizable.
    pub jitter: f64,
}

/// The fusion-loss gradient distribution has the same shape.
pub type FusionGradDist = GradDist;

impl GradDist {
    /// Assemble from a mean and covariance, escalating jitter until the
    /// covariance factorizes, then deriving the precision diagonal.
    pub fn from_moments(
        mean: DVector<f64>,
        covariance: DMatrix<f64>,
        n_samples: usize,
    ) -> Result<Self> {
        let sym = SpdMatrix::symmetrized(covariance);
        let (inv, jitter) = sym.invert_escalating(JITTER_START).map_err(|e| match e {
            Error::NotPositiveDefinite { dim, jitter } => Error::DegenerateCovariance(format!(
                "covariance of dim {dim} not PD at jitter {jitter:.3e}"
            )),
            other => other,
        })?;
        // Store the jittered covariance: it is the distribution actually used.
        let mut jittered = sym.matrix().clone();
        for d in 0..jittered.nrows() {
            jittered[(d, d)] += jitter;
        }
        let precision_diag = inv.diagonal();
        if precision_diag.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::DegenerateCovariance(
                "non-positive or non-finite precision diagonal".into(),
            ));
        }
        Ok(GradDist {
            mean,
            covariance: SpdMatrix::symmetrized(jittered),
            precision_diag,
            n_samples,
            jitter,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Moment-match the distribution of `grad_fn(Θ)` over `n` posterior draws.
///
/// `μ = (1/n) Σ g_j`, `Σ = (1/n) Σ g_j g_j^T - μ μ^T`, jittered to PD.
/// Deterministic given the RNG state.
pub fn mc_moments<F>(
    posterior: &GaussianPosterior,
    grad_fn: F,
    n: usize,
    rng: &mut SeededRng,
) -> Result<GradDist>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    if n < 2 {
        return Err(Error::invalid_param("n", "need at least 2 MC samples"));
    }
    let mut sum: Option<DVector<f64>> = None;
    let mut sum_outer: Option<DMatrix<f64>> = None;
    for _ in 0..n {
        let theta = posterior.sample(rng);
        let g = grad_fn(&theta);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateCovariance(
                "grad_fn returned non-finite values".into(),
            ));
        }
        match (&mut sum, &mut sum_outer) {
            (Some(s), Some(o)) => {
                if g.len() != s.len() {
                    return Err(Error::DimensionMismatch {
                        expected: s.len(),
                        got: g.len(),
                    });
                }
                *s += &g;
                *o += &g * g.transpose();
            }
            _ => {
                sum_outer = Some(&g * g.transpose());
                sum = Some(g);
            }
        }
    }
    let mean = sum.expect("n >= 2") / n as f64;
    let second = sum_outer.expect("n >= 2") / n as f64;
    let cov = second - &mean * mean.transpose();
    GradDist::from_moments(mean, cov, n)
}

/// Fusion gradient distribution: arithmetic mean of the per-modality means
/// and covariances, exact, no sampling.
pub fn fusion_dist(modality_dists: &[GradDist]) -> Result<FusionGradDist> {
    let first = modality_dists
        .first()
        .ok_or_else(|| Error::invalid_param("modality_dists", "need at least one modality"))?;
    let k = first.dim();
    for d in modality_dists {
        if d.dim() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: d.dim(),
            });
        }
    }
    let m = modality_dists.len() as f64;
    let mut mean = DVector::zeros(k);
    let mut cov = DMatrix::zeros(k, k);
    for d in modality_dists {
        mean += &d.mean;
        cov += d.covariance.matrix();
    }
    mean /= m;
    cov /= m;
    let (inv, jitter) = SpdMatrix::symmetrized(cov.clone()).invert_escalating(0.0)?;
    let precision_diag = inv.diagonal();
    if precision_diag.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
        return Err(Error::DegenerateCovariance(
            "fusion precision diagonal not positive".into(),
        ));
    }
    Ok(GradDist {
        mean,
        covariance: SpdMatrix::symmetrized(cov),
        precision_diag,
        n_samples: modality_dists.iter().map(|d| d.n_samples).min().unwrap_or(0),
        jitter,
    })
}

/// Diagonal of the full inverse of a PD covariance.
pub fn precision_diagonal(covariance: &SpdMatrix) -> Result<DVector<f64>> {
    Ok(covariance.invert(0.0)?.diagonal())
}
