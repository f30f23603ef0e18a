//! Toy multi-modal network with exact manual gradients.
//!
//! M encoders (affine + tanh + affine), one unimodal classifier head per
//! modality, and a fusion head over concatenated features. The final affine
//! weight matrix of each encoder is the calibrated parameter block `Θ^i`;
//! its flattening (row-major, `K = feature_dim * hidden_width`) is the space
//! every gradient distribution in this crate lives in.
//!
//! The joint objective is `L_total = L_fusion + phi * Σ_i L_uni^i` with
//! softmax cross-entropy losses in classification mode and squared error
//! against one-hot targets in regression mode.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::SeededRng;

/// Loss family used by every head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossMode {
    /// Softmax cross-entropy.
    Classification,
    /// Squared error against one-hot targets.
    Regression,
}

/// Static shape of a [`ToyMultiModalNet`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetDims {
    pub input_dims: Vec<usize>,
    pub hidden_width: usize,
    pub feature_dim: usize,
    pub num_classes: usize,
}

impl NetDims {
    pub fn num_modalities(&self) -> usize {
        self.input_dims.len()
    }

    /// Flattened dimension of each `Θ^i` block.
    pub fn theta_dim(&self) -> usize {
        self.feature_dim * self.hidden_width
    }

    fn validate(&self) -> Result<()> {
        if self.input_dims.is_empty() {
            return Err(Error::invalid_param("input_dims", "need at least one modality"));
        }
        if self.input_dims.iter().any(|&d| d == 0)
            || self.hidden_width == 0
            || self.feature_dim == 0
        {
            return Err(Error::invalid_param("dims", "all layer widths must be >= 1"));
        }
        if self.num_classes < 2 {
            return Err(Error::invalid_param("num_classes", "need >= 2 classes"));
        }
        Ok(())
    }
}

/// Affine map `x -> w*x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl Affine {
    fn zeros(out: usize, input: usize) -> Self {
        Affine {
            w: DMatrix::zeros(out, input),
            b: DVector::zeros(out),
        }
    }

    fn random(out: usize, input: usize, rng: &mut SeededRng) -> Self {
        let scale = 1.0 / (input as f64).sqrt();
        let mut vals = Vec::with_capacity(out * input);
        for _ in 0..out * input {
            vals.push(scale * rng.standard_normal());
        }
        Affine {
            w: DMatrix::from_row_slice(out, input, &vals),
            b: DVector::zeros(out),
        }
    }
}

/// One modality encoder: `psi = tanh(w1*x + b1)`, `features = w2*psi + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    /// Final affine layer; the Bayesian parameter block `Θ^i`.
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
}

/// M encoders, M unimodal heads, one fusion head over concatenated features.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyMultiModalNet {
    pub dims: NetDims,
    pub loss_mode: LossMode,
    pub encoders: Vec<Encoder>,
    pub unimodal_heads: Vec<Affine>,
    pub fusion_head: Affine,
}

/// Mini-batch of per-modality inputs plus shared integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// Per modality, a `(batch_size x input_dim_i)` matrix; rows are samples.
    pub inputs: Vec<DMatrix<f64>>,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(inputs: Vec<DMatrix<f64>>, labels: Vec<usize>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::invalid_param("inputs", "need at least one modality"));
        }
        let n = inputs[0].nrows();
        if n == 0 {
            return Err(Error::invalid_param("batch_size", "must be >= 1"));
        }
        for m in &inputs {
            if m.nrows() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: m.nrows(),
                });
            }
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: labels.len(),
            });
        }
        Ok(Batch { inputs, labels })
    }

    pub fn batch_size(&self) -> usize {
        self.labels.len()
    }
}

/// Activations cached by a forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// Per modality, tanh hidden activations psi: `(n x hidden_width)`.
    pub hidden: Vec<DMatrix<f64>>,
    /// Per modality, encoder features: `(n x feature_dim)`.
    pub features: Vec<DMatrix<f64>>,
    /// Per modality, unimodal head logits: `(n x num_classes)`.
    pub unimodal_logits: Vec<DMatrix<f64>>,
    /// Fusion head logits on concatenated features: `(n x num_classes)`.
    pub fusion_logits: DMatrix<f64>,
}

/// Loss values for one batch. `total` is assembled bitwise from the parts.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub fusion: f64,
    pub unimodal: Vec<f64>,
    pub total: f64,
}

/// Gradients of `L_total` for every parameter tensor.
#[derive(Debug, Clone)]
pub struct NetGrads {
    pub encoders: Vec<Encoder>,
    pub unimodal_heads: Vec<Affine>,
    pub fusion_head: Affine,
}

/// Per-modality gradient report: unimodal and fusion gradients over each
/// `Θ^i`, reported separately, never pre-summed.
#[derive(Debug, Clone)]
pub struct GradReport {
    /// `∇_{Θ^i} L_uni^i`, flattened row-major, length K.
    pub theta_unimodal: Vec<DVector<f64>>,
    /// `∇_{Θ^i} L_fusion`, flattened row-major, length K.
    pub theta_fusion: Vec<DVector<f64>>,
    pub losses: LossBreakdown,
    /// Full `∇ L_total`, used for every non-calibrated parameter update.
    pub full: NetGrads,
}

impl ToyMultiModalNet {
    /// Net with all weights and biases zero.
    pub fn zeros(dims: NetDims, loss_mode: LossMode) -> Result<Self> {
        dims.validate()?;
        let encoders = dims
            .input_dims
            .iter()
            .map(|&d| Encoder {
                w1: DMatrix::zeros(dims.hidden_width, d),
                b1: DVector::zeros(dims.hidden_width),
                w2: DMatrix::zeros(dims.feature_dim, dims.hidden_width),
                b2: DVector::zeros(dims.feature_dim),
            })
            .collect();
        let unimodal_heads = (0..dims.num_modalities())
            .map(|_| Affine::zeros(dims.num_classes, dims.feature_dim))
            .collect();
        let fusion_head = Affine::zeros(
            dims.num_classes,
            dims.num_modalities() * dims.feature_dim,
        );
        Ok(ToyMultiModalNet {
            dims,
            loss_mode,
            encoders,
            unimodal_heads,
            fusion_head,
        })
    }

    /// Net with `N(0, 1/fan_in)` weights and zero biases.
    pub fn random(dims: NetDims, loss_mode: LossMode, rng: &mut SeededRng) -> Result<Self> {
        dims.validate()?;
        let mut encoders = Vec::with_capacity(dims.num_modalities());
        for &d in &dims.input_dims {
            let w1 = Affine::random(dims.hidden_width, d, rng);
            let w2 = Affine::random(dims.feature_dim, dims.hidden_width, rng);
            encoders.push(Encoder {
                w1: w1.w,
                b1: w1.b,
                w2: w2.w,
                b2: w2.b,
            });
        }
        let unimodal_heads = (0..dims.num_modalities())
            .map(|_| Affine::random(dims.num_classes, dims.feature_dim, rng))
            .collect();
        let fusion_head = Affine::random(
            dims.num_classes,
            dims.num_modalities() * dims.feature_dim,
            rng,
        );
        Ok(ToyMultiModalNet {
            dims,
            loss_mode,
            encoders,
            unimodal_heads,
            fusion_head,
        })
    }

    pub fn num_modalities(&self) -> usize {
        self.dims.num_modalities()
    }

    /// `Θ^i` flattened row-major.
    pub fn theta_flat(&self, modality: usize) -> DVector<f64> {
        flatten_row_major(&self.encoders[modality].w2)
    }

    /// Replace `Θ^i` from a row-major flattening.
    pub fn set_theta_flat(&mut self, modality: usize, theta: &DVector<f64>) -> Result<()> {
        let enc = &mut self.encoders[modality];
        if theta.len() != enc.w2.nrows() * enc.w2.ncols() {
            return Err(Error::DimensionMismatch {
                expected: enc.w2.nrows() * enc.w2.ncols(),
                got: theta.len(),
            });
        }
        let cols = enc.w2.ncols();
        for r in 0..enc.w2.nrows() {
            for c in 0..cols {
                enc.w2[(r, c)] = theta[r * cols + c];
            }
        }
        Ok(())
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.inputs.len() != self.num_modalities() {
            return Err(Error::DimensionMismatch {
                expected: self.num_modalities(),
                got: batch.inputs.len(),
            });
        }
        for (i, m) in batch.inputs.iter().enumerate() {
            if m.ncols() != self.dims.input_dims[i] {
                return Err(Error::DimensionMismatch {
                    expected: self.dims.input_dims[i],
                    got: m.ncols(),
                });
            }
        }
        if let Some(&bad) = batch.labels.iter().find(|&&y| y >= self.dims.num_classes) {
            return Err(Error::invalid_param(
                "labels",
                format!("label {bad} >= num_classes {}", self.dims.num_classes),
            ));
        }
        Ok(())
    }

    /// Forward pass caching hidden activations, features, and all logits.
    pub fn forward(&self, batch: &Batch) -> Result<Forward> {
        self.check_batch(batch)?;
        let n = batch.batch_size();
        let mut hidden = Vec::with_capacity(self.num_modalities());
        let mut features = Vec::with_capacity(self.num_modalities());
        let mut unimodal_logits = Vec::with_capacity(self.num_modalities());
        let mut concat = DMatrix::zeros(n, self.num_modalities() * self.dims.feature_dim);
        for (i, enc) in self.encoders.iter().enumerate() {
            let pre = &batch.inputs[i] * enc.w1.transpose();
            let psi = DMatrix::from_fn(n, self.dims.hidden_width, |r, c| {
                (pre[(r, c)] + enc.b1[c]).tanh()
            });
            let lin = &psi * enc.w2.transpose();
            let feat = DMatrix::from_fn(n, self.dims.feature_dim, |r, c| lin[(r, c)] + enc.b2[c]);
            let head = &self.unimodal_heads[i];
            let zl = &feat * head.w.transpose();
            let logits =
                DMatrix::from_fn(n, self.dims.num_classes, |r, c| zl[(r, c)] + head.b[c]);
            for r in 0..n {
                for c in 0..self.dims.feature_dim {
                    concat[(r, i * self.dims.feature_dim + c)] = feat[(r, c)];
                }
            }
            hidden.push(psi);
            features.push(feat);
            unimodal_logits.push(logits);
        }
        let zf = &concat * self.fusion_head.w.transpose();
        let fusion_logits = DMatrix::from_fn(n, self.dims.num_classes, |r, c| {
            zf[(r, c)] + self.fusion_head.b[c]
        });
        Ok(Forward {
            hidden,
            features,
            unimodal_logits,
            fusion_logits,
        })
    }

    /// Loss breakdown on one batch; every term is a batch mean.
    pub fn losses(&self, batch: &Batch, phi: f64) -> Result<LossBreakdown> {
        if !(phi.is_finite() && phi >= 0.0) {
            return Err(Error::invalid_param("phi", "must be finite and >= 0"));
        }
        let fwd = self.forward(batch)?;
        Ok(self.losses_from_forward(&fwd, &batch.labels, phi))
    }

    fn losses_from_forward(&self, fwd: &Forward, labels: &[usize], phi: f64) -> LossBreakdown {
        let fusion = mean_loss(&fwd.fusion_logits, labels, self.loss_mode);
        let unimodal: Vec<f64> = fwd
            .unimodal_logits
            .iter()
            .map(|z| mean_loss(z, labels, self.loss_mode))
            .collect();
        let uni_sum: f64 = unimodal.iter().sum();
        LossBreakdown {
            fusion,
            unimodal,
            total: fusion + phi * uni_sum,
        }
    }

    /// `L_fusion + phi * Σ_i L_uni^i`.
    pub fn total_loss(&self, batch: &Batch, phi: f64) -> Result<f64> {
        Ok(self.losses(batch, phi)?.total)
    }

    /// Exact gradients of the joint objective and of each per-loss `Θ^i`
    /// block, derived by hand through the two affine layers and tanh.
    pub fn backward(&self, batch: &Batch, phi: f64) -> Result<GradReport> {
        if !(phi.is_finite() && phi >= 0.0) {
            return Err(Error::invalid_param("phi", "must be finite and >= 0"));
        }
        let fwd = self.forward(batch)?;
        let n = batch.batch_size();
        let scale = 1.0 / n as f64;
        let m = self.num_modalities();
        let fd = self.dims.feature_dim;
        let labels = &batch.labels;

        // Residuals at the logits, scaled for batch-mean losses.
        let r_fusion = logit_residual(&fwd.fusion_logits, labels, self.loss_mode) * scale;
        let r_uni: Vec<DMatrix<f64>> = fwd
            .unimodal_logits
            .iter()
            .map(|z| logit_residual(z, labels, self.loss_mode) * scale)
            .collect();

        // Fusion head gradient over the concatenated features.
        let mut concat = DMatrix::zeros(n, m * fd);
        for i in 0..m {
            for r in 0..n {
                for c in 0..fd {
                    concat[(r, i * fd + c)] = fwd.features[i][(r, c)];
                }
            }
        }
        let fusion_head_grad = Affine {
            w: r_fusion.transpose() * &concat,
            b: column_sums(&r_fusion),
        };

        let mut theta_unimodal = Vec::with_capacity(m);
        let mut theta_fusion = Vec::with_capacity(m);
        let mut grad_encoders = Vec::with_capacity(m);
        let mut grad_heads = Vec::with_capacity(m);

        for i in 0..m {
            let head = &self.unimodal_heads[i];
            let enc = &self.encoders[i];
            let psi = &fwd.hidden[i];

            grad_heads.push(Affine {
                w: (r_uni[i].transpose() * &fwd.features[i]) * phi,
                b: column_sums(&r_uni[i]) * phi,
            });

            // Feature-space deltas per loss: rows are samples.
            let block = self.fusion_head.w.columns(i * fd, fd).into_owned();
            let dfeat_fusion = &r_fusion * block;
            let dfeat_uni = &r_uni[i] * head.w.clone();

            let g_fusion = dfeat_fusion.transpose() * psi;
            let g_uni = dfeat_uni.transpose() * psi;
            theta_fusion.push(flatten_row_major(&g_fusion));
            theta_unimodal.push(flatten_row_major(&g_uni));

            let dfeat_total = &dfeat_fusion + &dfeat_uni * phi;
            let w2_total = &g_fusion + &g_uni * phi;
            let b2_total = column_sums(&dfeat_total);

            // Through tanh: dL/dh = (w2^T dfeat) ⊙ (1 - psi^2).
            let back = &dfeat_total * enc.w2.clone();
            let dhidden = DMatrix::from_fn(n, self.dims.hidden_width, |r, c| {
                back[(r, c)] * (1.0 - psi[(r, c)] * psi[(r, c)])
            });
            grad_encoders.push(Encoder {
                w1: dhidden.transpose() * &batch.inputs[i],
                b1: column_sums(&dhidden),
                w2: w2_total,
                b2: b2_total,
            });
        }

        Ok(GradReport {
            theta_unimodal,
            theta_fusion,
            losses: self.losses_from_forward(&fwd, labels, phi),
            full: NetGrads {
                encoders: grad_encoders,
                unimodal_heads: grad_heads,
                fusion_head: fusion_head_grad,
            },
        })
    }

    /// Per-sample gradient of the unimodal loss with respect to `Θ^i`,
    /// evaluated at an arbitrary parameter sample. The hidden activation is
    /// fixed (it does not depend on `Θ^i`), which is what makes Monte Carlo
    /// over posterior draws cheap.
    pub fn unimodal_theta_grad_at(
        &self,
        modality: usize,
        psi: &DVector<f64>,
        label: usize,
        theta: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let enc = &self.encoders[modality];
        let head = &self.unimodal_heads[modality];
        let (fd, hw) = (enc.w2.nrows(), enc.w2.ncols());
        if psi.len() != hw {
            return Err(Error::DimensionMismatch {
                expected: hw,
                got: psi.len(),
            });
        }
        if theta.len() != fd * hw {
            return Err(Error::DimensionMismatch {
                expected: fd * hw,
                got: theta.len(),
            });
        }
        // features = Theta * psi + b2 with Theta unflattened row-major
        let mut feat = enc.b2.clone();
        for r in 0..fd {
            let mut acc = 0.0;
            for c in 0..hw {
                acc += theta[r * hw + c] * psi[c];
            }
            feat[r] += acc;
        }
        let logits = &head.w * &feat + &head.b;
        let dz = match self.loss_mode {
            LossMode::Classification => {
                let mut p = softmax(&logits);
                p[label] -= 1.0;
                p
            }
            LossMode::Regression => {
                let mut d = logits * 2.0;
                d[label] -= 2.0;
                d
            }
        };
        let dfeat = head.w.transpose() * dz;
        let mut g = DVector::zeros(fd * hw);
        for r in 0..fd {
            for c in 0..hw {
                g[r * hw + c] = dfeat[r] * psi[c];
            }
        }
        Ok(g)
    }

    /// Argmax class predictions of the fusion head.
    pub fn predict_fusion(&self, batch: &Batch) -> Result<Vec<usize>> {
        let fwd = self.forward(batch)?;
        Ok(argmax_rows(&fwd.fusion_logits))
    }

    /// Argmax class predictions of one unimodal head.
    pub fn predict_unimodal(&self, batch: &Batch, modality: usize) -> Result<Vec<usize>> {
        let fwd = self.forward(batch)?;
        Ok(argmax_rows(&fwd.unimodal_logits[modality]))
    }
}

/// Gradient of the squared loss `(y - Theta*psi)^2` with respect to the
/// hidden-layer input `psi`, in closed form: `2 * Theta^T (Theta psi - y)`.
/// Quadratic in `Theta`, which is what makes the sampled gradient a random
/// variable once `Theta` carries a posterior.
pub fn square_loss_gradient(
    theta: &DMatrix<f64>,
    psi: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<DVector<f64>> {
    if theta.ncols() != psi.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.ncols(),
            got: psi.len(),
        });
    }
    if theta.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.nrows(),
            got: y.len(),
        });
    }
    let residual = theta * psi - y;
    Ok(theta.transpose() * residual * 2.0)
}

/// Row-major flattening of a matrix.
pub fn flatten_row_major(m: &DMatrix<f64>) -> DVector<f64> {
    let (r, c) = m.shape();
    DVector::from_fn(r * c, |k, _| m[(k / c, k % c)])
}

/// Numerically stable softmax of a logit vector.
pub fn softmax(z: &DVector<f64>) -> DVector<f64> {
    let m = z.max();
    let e = z.map(|v| (v - m).exp());
    let s = e.sum();
    e / s
}

fn column_sums(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(m.ncols(), |c, _| m.column(c).sum())
}

fn argmax_rows(m: &DMatrix<f64>) -> Vec<usize> {
    (0..m.nrows())
        .map(|r| {
            let mut best = 0;
            for c in 1..m.ncols() {
                if m[(r, c)] > m[(r, best)] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Mean per-sample loss over the rows of a logit matrix.
fn mean_loss(logits: &DMatrix<f64>, labels: &[usize], mode: LossMode) -> f64 {
    let n = logits.nrows();
    let mut acc = 0.0;
    for t in 0..n {
        let z = logits.row(t).transpose();
        acc += match mode {
            LossMode::Classification => {
                let m = z.max();
                let lse = z.map(|v| (v - m).exp()).sum().ln();
                lse - (z[labels[t]] - m)
            }
            LossMode::Regression => {
                let mut s = 0.0;
                for c in 0..z.len() {
                    let target = if c == labels[t] { 1.0 } else { 0.0 };
                    let d = z[c] - target;
                    s += d * d;
                }
                s
            }
        };
    }
    acc / n as f64
}

/// Per-sample `dL/dlogits` rows (unscaled by batch size).
fn logit_residual(logits: &DMatrix<f64>, labels: &[usize], mode: LossMode) -> DMatrix<f64> {
    let (n, c) = logits.shape();
    let mut out = DMatrix::zeros(n, c);
    for t in 0..n {
        let z = logits.row(t).transpose();
        match mode {
            LossMode::Classification => {
                let p = softmax(&z);
                for j in 0..c {
                    out[(t, j)] = p[j] - if j == labels[t] { 1.0 } else { 0.0 };
                }
            }
            LossMode::Regression => {
                for j in 0..c {
                    let target = if j == labels[t] { 1.0 } else { 0.0 };
                    out[(t, j)] = 2.0 * (z[j] - target);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_dims() -> NetDims {
        NetDims {
            input_dims: vec![3, 2],
            hidden_width: 4,
            feature_dim: 3,
            num_classes: 3,
        }
    }

    fn random_batch(dims: &NetDims, n: usize, rng: &mut SeededRng) -> Batch {
        let inputs = dims
            .input_dims
            .iter()
            .map(|&d| {
                let vals: Vec<f64> = (0..n * d).map(|_| rng.standard_normal()).collect();
                DMatrix::from_row_slice(n, d, &vals)
            })
            .collect();
        let labels = (0..n).map(|t| t % dims.num_classes).collect();
        Batch::new(inputs, labels).unwrap()
    }

    #[test]
    fn zero_weights_give_zero_logits() {
        let net = ToyMultiModalNet::zeros(small_dims(), LossMode::Classification).unwrap();
        let mut rng = SeededRng::new(0, 0);
        let batch = random_batch(&net.dims, 4, &mut rng);
        let fwd = net.forward(&batch).unwrap();
        assert!(fwd.fusion_logits.iter().all(|&v| v == 0.0));
        assert!(fwd.unimodal_logits[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn logit_shapes_match_batch() {
        let mut rng = SeededRng::new(1, 0);
        let net = ToyMultiModalNet::random(small_dims(), LossMode::Classification, &mut rng)
            .unwrap();
        let batch = random_batch(&net.dims, 4, &mut rng);
        let fwd = net.forward(&batch).unwrap();
        assert_eq!(fwd.fusion_logits.shape(), (4, 3));
        assert_eq!(fwd.unimodal_logits.len(), 2);
        assert_eq!(fwd.unimodal_logits[1].shape(), (4, 3));
    }

    #[test]
    fn single_modality_fusion_matches_unimodal_path() {
        let dims = NetDims {
            input_dims: vec![3],
            hidden_width: 4,
            feature_dim: 3,
            num_classes: 3,
        };
        let mut rng = SeededRng::new(2, 0);
        let mut net = ToyMultiModalNet::random(dims, LossMode::Classification, &mut rng).unwrap();
        net.fusion_head = net.unimodal_heads[0].clone();
        let batch = random_batch(&net.dims, 5, &mut rng);
        let fwd = net.forward(&batch).unwrap();
        assert_eq!(fwd.fusion_logits, fwd.unimodal_logits[0]);
    }

    #[test]
    fn uniform_logits_cost_ln_c() {
        let net = ToyMultiModalNet::zeros(small_dims(), LossMode::Classification).unwrap();
        let mut rng = SeededRng::new(3, 0);
        let batch = random_batch(&net.dims, 4, &mut rng);
        let losses = net.losses(&batch, 1.0).unwrap();
        assert_relative_eq!(losses.fusion, 3.0f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn phi_zero_keeps_only_fusion_loss() {
        let mut rng = SeededRng::new(4, 0);
        let net = ToyMultiModalNet::random(small_dims(), LossMode::Classification, &mut rng)
            .unwrap();
        let batch = random_batch(&net.dims, 4, &mut rng);
        let losses = net.losses(&batch, 0.0).unwrap();
        assert_eq!(losses.total, losses.fusion);
    }

    #[test]
    fn hand_computed_cross_entropy_sum() {
        // One sample, M=2; compare against a by-hand evaluation of
        // L_fusion + L_uni^1 + L_uni^2 from the produced logits.
        let mut rng = SeededRng::new(5, 0);
        let net = ToyMultiModalNet::random(small_dims(), LossMode::Classification, &mut rng)
            .unwrap();
        let batch = random_batch(&net.dims, 1, &mut rng);
        let fwd = net.forward(&batch).unwrap();
        let y = batch.labels[0];
        let ce = |z: &DMatrix<f64>| {
            let row = z.row(0).transpose();
            let p = softmax(&row);
            -p[y].ln()
        };
        let expect = ce(&fwd.fusion_logits) + ce(&fwd.unimodal_logits[0]) + ce(&fwd.unimodal_logits[1]);
        let losses = net.losses(&batch, 1.0).unwrap();
        assert_relative_eq!(losses.total, expect, max_relative = 1e-12);
    }

    #[test]
    fn loss_decomposition_is_bitwise() {
        let mut rng = SeededRng::new(6, 0);
        let net = ToyMultiModalNet::random(small_dims(), LossMode::Classification, &mut rng)
            .unwrap();
        let batch = random_batch(&net.dims, 3, &mut rng);
        let phi = 0.7;
        let l = net.losses(&batch, phi).unwrap();
        let uni_sum: f64 = l.unimodal.iter().sum();
        assert_eq!(l.total, l.fusion + phi * uni_sum);
    }

    #[test]
    fn batch_permutation_leaves_loss_unchanged() {
        let mut rng = SeededRng::new(7, 0);
        let net = ToyMultiModalNet::random(small_dims(), LossMode::Classification, &mut rng)
            .unwrap();
        let batch = random_batch(&net.dims, 6, &mut rng);
        let perm = [3usize, 0, 5, 1, 4, 2];
        let inputs = batch
            .inputs
            .iter()
            .map(|m| {
                DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(perm[r], c)])
            })
            .collect();
        let labels = perm.iter().map(|&r| batch.labels[r]).collect();
        let permuted = Batch::new(inputs, labels).unwrap();
        let a = net.total_loss(&batch, 1.0).unwrap();
        let b = net.total_loss(&permuted, 1.0).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    /// Central finite differences of a scalar closure.
    fn finite_diff(f: &mut dyn FnMut(f64) -> f64, eps: f64) -> f64 {
        (f(eps) - f(-eps)) / (2.0 * eps)
    }

    fn gradcheck(net: &ToyMultiModalNet, batch: &Batch, phi: f64) -> f64 {
        let report = net.backward(batch, phi).unwrap();
        let eps = 1e-5;
        let mut max_rel: f64 = 0.0;
        let mut check = |analytic: f64, mut poke: Box<dyn FnMut(f64) -> f64>| {
            let fd = finite_diff(&mut *poke, eps);
            let denom = analytic.abs().max(fd.abs()).max(1e-6);
            max_rel = max_rel.max((analytic - fd).abs() / denom);
        };
        for i in 0..net.num_modalities() {
            // Θ blocks per loss.
            let (fdim, hw) = (net.dims.feature_dim, net.dims.hidden_width);
            for r in 0..fdim {
                for c in 0..hw {
                    let k = r * hw + c;
                    let analytic = report.theta_unimodal[i][k];
                    let net0 = net.clone();
                    let batch0 = batch.clone();
                    check(
                        analytic,
                        Box::new(move |d| {
                            let mut n2 = net0.clone();
                            n2.encoders[i].w2[(r, c)] += d;
                            n2.losses(&batch0, phi).unwrap().unimodal[i]
                        }),
                    );
                    let analytic = report.theta_fusion[i][k];
                    let net0 = net.clone();
                    let batch0 = batch.clone();
                    check(
                        analytic,
                        Box::new(move |d| {
                            let mut n2 = net0.clone();
                            n2.encoders[i].w2[(r, c)] += d;
                            n2.losses(&batch0, phi).unwrap().fusion
                        }),
                    );
                }
            }
            // Full L_total grads for w1 and b1.
            for r in 0..net.dims.hidden_width {
                for c in 0..net.dims.input_dims[i] {
                    let analytic = report.full.encoders[i].w1[(r, c)];
                    let net0 = net.clone();
                    let batch0 = batch.clone();
                    check(
                        analytic,
                        Box::new(move |d| {
                            let mut n2 = net0.clone();
                            n2.encoders[i].w1[(r, c)] += d;
                            n2.total_loss(&batch0, phi).unwrap()
                        }),
                    );
                }
                let analytic = report.full.encoders[i].b1[r];
                let net0 = net.clone();
                let batch0 = batch.clone();
                check(
                    analytic,
                    Box::new(move |d| {
                        let mut n2 = net0.clone();
                        n2.encoders[i].b1[r] += d;
                        n2.total_loss(&batch0, phi).unwrap()
                    }),
                );
            }
        }
        // Fusion head.
        for r in 0..net.dims.num_classes {
            let analytic = report.full.fusion_head.b[r];
            let net0 = net.clone();
            let batch0 = batch.clone();
            check(
                analytic,
                Box::new(move |d| {
                    let mut n2 = net0.clone();
                    n2.fusion_head.b[r] += d;
                    n2.total_loss(&batch0, phi).unwrap()
                }),
            );
        }
        max_rel
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        for seed in 0..3 {
            let mut rng = SeededRng::new(seed, 0);
            let net =
                ToyMultiModalNet::random(small_dims(), LossMode::Classification, &mut rng)
                    .unwrap();
            let batch = random_batch(&net.dims, 3, &mut rng);
            let err = gradcheck(&net, &batch, 0.8);
            assert!(err < 1e-4, "seed {seed}: max relative error {err}");
        }
    }

    #[test]
    fn regression_gradients_match_finite_differences() {
        let mut rng = SeededRng::new(11, 0);
        let net =
            ToyMultiModalNet::random(small_dims(), LossMode::Regression, &mut rng).unwrap();
        let batch = random_batch(&net.dims, 2, &mut rng);
        let err = gradcheck(&net, &batch, 1.0);
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn duplicated_samples_have_identical_per_sample_gradients() {
        let mut rng = SeededRng::new(8, 0);
        let net = ToyMultiModalNet::random(small_dims(), LossMode::Classification, &mut rng)
            .unwrap();
        let single = random_batch(&net.dims, 1, &mut rng);
        let doubled = Batch::new(
            single
                .inputs
                .iter()
                .map(|m| {
                    DMatrix::from_fn(2, m.ncols(), |_, c| m[(0, c)])
                })
                .collect(),
            vec![single.labels[0]; 2],
        )
        .unwrap();
        let fwd = net.forward(&doubled).unwrap();
        let theta = net.theta_flat(0);
        let g0 = net
            .unimodal_theta_grad_at(0, &fwd.hidden[0].row(0).transpose(), doubled.labels[0], &theta)
            .unwrap();
        let g1 = net
            .unimodal_theta_grad_at(0, &fwd.hidden[0].row(1).transpose(), doubled.labels[1], &theta)
            .unwrap();
        assert_eq!(g0, g1);
    }

    #[test]
    fn square_loss_gradient_is_zero_at_optimum() {
        let theta = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let psi = DVector::from_vec(vec![0.3, -0.7]);
        let y = &theta * &psi;
        let g = square_loss_gradient(&theta, &psi, &y).unwrap();
        assert!(g.iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn square_loss_gradient_scalar_matches_finite_differences() {
        let theta = DMatrix::from_row_slice(1, 1, &[2.0]);
        let psi = DVector::from_vec(vec![1.0]);
        let y = DVector::from_vec(vec![1.0]);
        let g = square_loss_gradient(&theta, &psi, &y).unwrap();
        let eps = 1e-6;
        let loss = |p: f64| {
            let d = 2.0 * p - 1.0;
            d * d
        };
        let fd = (loss(1.0 + eps) - loss(1.0 - eps)) / (2.0 * eps);
        assert_relative_eq!(g[0], fd, max_relative = 1e-7);
        assert_relative_eq!(g[0], 4.0, max_relative = 1e-12);
    }

    #[test]
    fn square_loss_gradient_vanishes_at_zero_theta() {
        let theta = DMatrix::zeros(2, 3);
        let psi = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, -1.0]);
        let g = square_loss_gradient(&theta, &psi, &y).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn theta_flatten_round_trips() {
        let mut rng = SeededRng::new(9, 0);
        let mut net = ToyMultiModalNet::random(small_dims(), LossMode::Classification, &mut rng)
            .unwrap();
        let theta = net.theta_flat(1);
        let mut tweaked = theta.clone();
        tweaked[2] += 0.5;
        net.set_theta_flat(1, &tweaked).unwrap();
        assert_eq!(net.theta_flat(1), tweaked);
    }
}
