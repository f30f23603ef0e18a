//! Laplace posterior over each encoder's last-layer parameters.
//!
//! The curvature is the generalized Gauss-Newton matrix built from the
//! unimodal head path, `H = Σ_j J_j^T B_j J_j + V_p^{-1}`, with `B_j` the
//! Hessian of the per-sample negative log-likelihood at the head outputs.
//! The posterior keeps the first-order mean shift: training is mid-flight,
//! so the current parameter estimate is not a mode.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{softmax, Batch, LossMode, ToyMultiModalNet};
use crate::numerics::{CholeskyFactor, SeededRng, SpdMatrix};

/// Isotropic Gaussian prior `N(0, prior_variance * I)` over each `Θ^i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSpec {
    pub prior_variance: f64,
}

impl PriorSpec {
    pub fn new(prior_variance: f64) -> Result<Self> {
        if !(prior_variance.is_finite() && prior_variance > 0.0) {
            return Err(Error::invalid_param(
                "prior_variance",
                "must be finite and > 0",
            ));
        }
        Ok(PriorSpec { prior_variance })
    }
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec {
            prior_variance: 1.0,
        }
    }
}

/// Gaussian posterior with a cached Cholesky factor for sampling.
#[derive(Debug, Clone)]
pub struct GaussianPosterior {
    pub mean: DVector<f64>,
    pub covariance: SpdMatrix,
    chol: CholeskyFactor,
}

impl GaussianPosterior {
    pub fn new(mean: DVector<f64>, covariance: SpdMatrix) -> Result<Self> {
        if mean.len() != covariance.dim() {
            return Err(Error::DimensionMismatch {
                expected: covariance.dim(),
                got: mean.len(),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_param("mean", "non-finite entry"));
        }
        let (chol, _) = covariance.cholesky_escalating(0.0)?;
        Ok(GaussianPosterior {
            mean,
            covariance,
            chol,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn chol_factor(&self) -> &CholeskyFactor {
        &self.chol
    }

    /// One draw `mean + L*z`.
    pub fn sample(&self, rng: &mut SeededRng) -> DVector<f64> {
        crate::numerics::sample_gaussian(&self.mean, &self.chol, rng)
            .expect("posterior mean and factor share a dimension")
    }
}

/// Hessian of the negative log-likelihood at the softmax outputs:
/// `diag(p) - p p^T`. Positive semidefinite with zero row sums.
pub fn nll_output_hessian(probs: &DVector<f64>) -> Result<SpdMatrix> {
    let sum: f64 = probs.sum();
    if probs.iter().any(|&p| !p.is_finite() || p < 0.0) {
        return Err(Error::InvalidProbability(
            "negative or non-finite entry".into(),
        ));
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidProbability(format!(
            "entries sum to {sum}, expected 1"
        )));
    }
    let k = probs.len();
    let mut m = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = if i == j {
                probs[i] - probs[i] * probs[i]
            } else {
                -probs[i] * probs[j]
            };
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    SpdMatrix::new(m)
}

/// Output-space NLL Hessian for one sample under the net's loss mode.
fn output_hessian_for(net: &ToyMultiModalNet, logits: &DVector<f64>) -> Result<SpdMatrix> {
    match net.loss_mode {
        LossMode::Classification => nll_output_hessian(&softmax(logits)),
        // Squared error: constant Hessian 2I at the outputs.
        LossMode::Regression => Ok(SpdMatrix::from_diagonal(&DVector::from_element(
            logits.len(),
            2.0,
        ))),
    }
}

/// Generalized Gauss-Newton curvature of one modality's `Θ^i` block:
/// `Σ_j J_j^T B_j J_j + (1/prior_variance) I`, exactly symmetric.
pub fn ggn_matrix(
    net: &ToyMultiModalNet,
    batch: &Batch,
    modality_index: usize,
    prior: &PriorSpec,
) -> Result<SpdMatrix> {
    if modality_index >= net.num_modalities() {
        return Err(Error::invalid_param(
            "modality_index",
            format!("{modality_index} >= {}", net.num_modalities()),
        ));
    }
    let fwd = net.forward(batch)?;
    let head = &net.unimodal_heads[modality_index];
    let fd = net.dims.feature_dim;
    let hw = net.dims.hidden_width;
    let k = fd * hw;
    let c = net.dims.num_classes;

    let mut acc = DMatrix::<f64>::zeros(k, k);
    for t in 0..batch.batch_size() {
        let psi = fwd.hidden[modality_index].row(t).transpose();
        let logits = fwd.unimodal_logits[modality_index].row(t).transpose();
        let b = output_hessian_for(net, &logits)?;
        // J[cls, r*hw + h] = U[cls, r] * psi[h]
        let mut j = DMatrix::zeros(c, k);
        for cls in 0..c {
            for r in 0..fd {
                for h in 0..hw {
                    j[(cls, r * hw + h)] = head.w[(cls, r)] * psi[h];
                }
            }
        }
        acc += j.transpose() * b.matrix() * j;
    }
    let lam = 1.0 / prior.prior_variance;
    for d in 0..k {
        acc[(d, d)] += lam;
    }
    Ok(SpdMatrix::symmetrized(acc))
}

/// First-order term `q = -∇_Θ log p(D, Θ)` at the current estimate:
/// the summed per-sample NLL gradients plus the prior pull `Θ / V_p`.
pub fn first_order_term(
    net: &ToyMultiModalNet,
    batch: &Batch,
    modality_index: usize,
    prior: &PriorSpec,
) -> Result<DVector<f64>> {
    let fwd = net.forward(batch)?;
    let theta = net.theta_flat(modality_index);
    let mut q = &theta / prior.prior_variance;
    for t in 0..batch.batch_size() {
        let psi = fwd.hidden[modality_index].row(t).transpose();
        q += net.unimodal_theta_grad_at(modality_index, &psi, batch.labels[t], &theta)?;
    }
    Ok(q)
}

/// Laplace posterior: `mean = theta_hat - H^{-1} q`, `covariance = H^{-1}`.
pub fn laplace_posterior(
    theta_hat: &DVector<f64>,
    ggn: &SpdMatrix,
    q: &DVector<f64>,
) -> Result<GaussianPosterior> {
    if theta_hat.len() != ggn.dim() || q.len() != ggn.dim() {
        return Err(Error::DimensionMismatch {
            expected: ggn.dim(),
            got: theta_hat.len().max(q.len()),
        });
    }
    let (covariance, _) = ggn.invert_escalating(0.0)?;
    let mean = theta_hat - covariance.matrix() * q;
    GaussianPosterior::new(mean, covariance)
}

/// GGN + first-order term + Laplace posterior for one modality on one batch.
pub fn modality_posterior(
    net: &ToyMultiModalNet,
    batch: &Batch,
    modality_index: usize,
    prior: &PriorSpec,
) -> Result<GaussianPosterior> {
    let ggn = ggn_matrix(net, batch, modality_index, prior)?;
    let q = first_order_term(net, batch, modality_index, prior)?;
    laplace_posterior(&net.theta_flat(modality_index), &ggn, &q)
}
