//! The training loop: backward pass, per-modality posteriors, gradient
//! distributions, evidence fusion, and SGD-momentum updates.
//!
//! Every parameter tensor is updated with the raw joint-loss gradient except
//! each encoder's last-layer block `Θ^i`, whose update direction comes from
//! the selected aggregator: a reference rule for the baseline arms, or the
//! belief-calibrated `γ * g_DS` for the full pipeline.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::baselines::{apply_aggregator, detect_conflict, AggregatorKind};
use crate::error::{Error, Result};
use crate::evidence::{aggregate_gradient, calibrated_step, dempster_combine, mass_from_precisions};
use crate::graddist::{fusion_dist, mc_moments, GradDist};
use crate::harness::synthetic::{Dataset, MatrixJson};
use crate::model::{Batch, LossMode, NetDims, ToyMultiModalNet};
use crate::numerics::{stream_id, SeededRng};
use crate::posterior::{modality_posterior, PriorSpec};

/// Training hyperparameters. JSON config files mirror these field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "defaults::aggregator")]
    pub aggregator: AggregatorKind,
    /// Exponent of the precision-to-evidence power map.
    #[serde(default = "defaults::s")]
    pub s: f64,
    /// Scale applied to the calibrated aggregate before the SGD step.
    #[serde(default = "defaults::gamma")]
    pub gamma: f64,
    /// Weight of the unimodal losses in the joint objective.
    #[serde(default = "defaults::phi")]
    pub phi: f64,
    #[serde(default = "defaults::lr")]
    pub lr: f64,
    #[serde(default = "defaults::momentum")]
    pub momentum: f64,
    /// Monte Carlo draws per batch item and modality.
    #[serde(default = "defaults::mc_samples")]
    pub mc_samples: usize,
    #[serde(default = "defaults::epochs")]
    pub epochs: usize,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    #[serde(default = "defaults::prior_variance")]
    pub prior_variance: f64,
    #[serde(default)]
    pub seed: u64,
}

mod defaults {
    use crate::baselines::AggregatorKind;

    pub fn aggregator() -> AggregatorKind {
        AggregatorKind::Bogc
    }
    pub fn s() -> f64 {
        0.5
    }
    pub fn gamma() -> f64 {
        1.5
    }
    pub fn phi() -> f64 {
        1.0
    }
    pub fn lr() -> f64 {
        0.1
    }
    pub fn momentum() -> f64 {
        0.9
    }
    pub fn mc_samples() -> usize {
        64
    }
    pub fn epochs() -> usize {
        10
    }
    pub fn batch_size() -> usize {
        16
    }
    pub fn prior_variance() -> f64 {
        1.0
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            aggregator: defaults::aggregator(),
            s: defaults::s(),
            gamma: defaults::gamma(),
            phi: defaults::phi(),
            lr: defaults::lr(),
            momentum: defaults::momentum(),
            mc_samples: defaults::mc_samples(),
            epochs: defaults::epochs(),
            batch_size: defaults::batch_size(),
            prior_variance: defaults::prior_variance(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.aggregator.validate()?;
        if !(self.s.is_finite() && (0.01..=0.9).contains(&self.s)) {
            return Err(Error::invalid_param("s", "must be in [0.01, 0.9]"));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::invalid_param("gamma", "must be > 0"));
        }
        if !(self.phi.is_finite() && self.phi >= 0.0) {
            return Err(Error::invalid_param("phi", "must be >= 0"));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::invalid_param("lr", "must be >= 0"));
        }
        if !(self.momentum.is_finite() && (0.0..1.0).contains(&self.momentum)) {
            return Err(Error::invalid_param("momentum", "must be in [0, 1)"));
        }
        if self.mc_samples < 2 {
            return Err(Error::invalid_param("mc_samples", "must be >= 2"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid_param("epochs", "must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid_param("batch_size", "must be >= 1"));
        }
        if !(self.prior_variance.is_finite() && self.prior_variance > 0.0) {
            return Err(Error::invalid_param("prior_variance", "must be > 0"));
        }
        Ok(())
    }
}

/// Encoder widths of the toy net built by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub hidden_width: usize,
    pub feature_dim: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        // K = feature_dim * hidden_width = 64 keeps the dense K x K
        // covariances cheap while leaving room for per-dimension structure.
        NetConfig {
            hidden_width: 8,
            feature_dim: 8,
        }
    }
}

/// Per-step training telemetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub loss_fusion: f64,
    pub loss_unimodal: Vec<f64>,
    pub loss_total: f64,
    /// Negative cosine between concatenated unimodal and fusion Θ-gradients.
    pub conflict: bool,
    /// Mean joint uncertainty over batch items and modalities; only the
    /// calibrated arm produces one.
    pub mean_joint_uncertainty: Option<f64>,
}

/// Per-epoch test metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub overall_acc: f64,
    pub per_modality_acc: Vec<f64>,
    /// Minimum per-class test accuracy of the fusion prediction.
    pub worst_group_acc: f64,
}

/// Output of one seeded training run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub config: TrainConfig,
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
    /// Kept in memory for reporting; never written to files, so emitted
    /// bytes stay seed-deterministic.
    pub wall_clock_secs: f64,
}

impl ExperimentRecord {
    /// Fraction of steps flagged as conflicting.
    pub fn conflict_fraction(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().filter(|s| s.conflict).count() as f64 / self.steps.len() as f64
    }

    /// A run is conflict-dominant when more than half its steps conflict.
    pub fn conflict_dominant(&self) -> bool {
        self.conflict_fraction() > 0.5
    }

    pub fn final_overall_acc(&self) -> f64 {
        self.epochs.last().map(|e| e.overall_acc).unwrap_or(0.0)
    }

    pub fn final_worst_group_acc(&self) -> f64 {
        self.epochs.last().map(|e| e.worst_group_acc).unwrap_or(0.0)
    }
}

/// One line of the per-dimension mass trace (batch item 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassTraceRow {
    pub step: usize,
    pub modality: usize,
    pub d: usize,
    pub lambda_i: f64,
    pub lambda_fusion: f64,
    pub b_i: f64,
    pub b_fusion: f64,
    pub b_joint: f64,
    pub u_joint: f64,
    #[serde(rename = "C")]
    pub conflict: f64,
}

/// Posterior snapshot for debugging dumps; covariance is row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSnapshot {
    pub modality: usize,
    pub mean: Vec<f64>,
    pub covariance: MatrixJson,
}

/// What [`train_full`] should collect beyond the record.
#[derive(Debug, Clone, Copy, Default)]
pub struct TraceOptions {
    pub collect_mass_trace: bool,
    pub collect_final_posteriors: bool,
}

/// Record plus optional traces.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub record: ExperimentRecord,
    pub mass_trace: Vec<MassTraceRow>,
    pub final_posteriors: Vec<PosteriorSnapshot>,
}

/// Train with default net widths, returning only the record.
pub fn train(config: &TrainConfig, data: &Dataset) -> Result<ExperimentRecord> {
    Ok(train_full(config, &NetConfig::default(), data, TraceOptions::default())?.record)
}

struct Velocity {
    w1: DMatrix<f64>,
    b1: DVector<f64>,
    w2: DMatrix<f64>,
    b2: DVector<f64>,
}

/// Full training entry point.
pub fn train_full(
    config: &TrainConfig,
    net_config: &NetConfig,
    data: &Dataset,
    trace: TraceOptions,
) -> Result<TrainOutput> {
    config.validate()?;
    data.spec.validate()?;
    let start = std::time::Instant::now();

    let dims = NetDims {
        input_dims: data.spec.input_dims.clone(),
        hidden_width: net_config.hidden_width,
        feature_dim: net_config.feature_dim,
        num_classes: data.spec.num_classes,
    };
    let m = dims.num_modalities();
    let mut net = ToyMultiModalNet::random(
        dims,
        LossMode::Classification,
        &mut SeededRng::new(config.seed, stream_id(&[20])),
    )?;
    let prior = PriorSpec::new(config.prior_variance)?;

    let mut vel: Vec<Velocity> = net
        .encoders
        .iter()
        .map(|e| Velocity {
            w1: DMatrix::zeros(e.w1.nrows(), e.w1.ncols()),
            b1: DVector::zeros(e.b1.len()),
            w2: DMatrix::zeros(e.w2.nrows(), e.w2.ncols()),
            b2: DVector::zeros(e.b2.len()),
        })
        .collect();
    let mut head_vel: Vec<(DMatrix<f64>, DVector<f64>)> = net
        .unimodal_heads
        .iter()
        .map(|h| (DMatrix::zeros(h.w.nrows(), h.w.ncols()), DVector::zeros(h.b.len())))
        .collect();
    let mut fusion_vel = (
        DMatrix::zeros(net.fusion_head.w.nrows(), net.fusion_head.w.ncols()),
        DVector::zeros(net.fusion_head.b.len()),
    );

    let n_train = data.train.len();
    let steps_per_epoch = n_train.div_ceil(config.batch_size);
    let mut steps = Vec::with_capacity(config.epochs * steps_per_epoch);
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut mass_trace = Vec::new();
    let mut step = 0usize;

    for epoch in 0..config.epochs {
        let order = shuffled_indices(n_train, config.seed, epoch);
        for chunk in order.chunks(config.batch_size) {
            let batch = data.train.batch_of(chunk)?;
            let outcome = train_step(
                &mut net,
                &batch,
                config,
                &prior,
                m,
                step,
                &mut vel,
                &mut head_vel,
                &mut fusion_vel,
                trace.collect_mass_trace.then_some(&mut mass_trace),
            )
            .map_err(|e| e.at_step(step))?;
            steps.push(StepRecord {
                step,
                epoch,
                loss_fusion: outcome.loss_fusion,
                loss_unimodal: outcome.loss_unimodal,
                loss_total: outcome.loss_total,
                conflict: outcome.conflict,
                mean_joint_uncertainty: outcome.mean_joint_uncertainty,
            });
            step += 1;
        }
        epochs.push(evaluate(&net, data, epoch)?);
    }

    let final_posteriors = if trace.collect_final_posteriors {
        let batch = data.train.batch_of(&shuffled_indices(
            n_train.min(config.batch_size),
            config.seed,
            config.epochs,
        ))?;
        (0..m)
            .map(|i| {
                let post = modality_posterior(&net, &batch, i, &prior)?;
                Ok(PosteriorSnapshot {
                    modality: i,
                    mean: post.mean.iter().copied().collect(),
                    covariance: MatrixJson {
                        rows: post.covariance.dim(),
                        cols: post.covariance.dim(),
                        data: post.covariance.to_row_major(),
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };

    Ok(TrainOutput {
        record: ExperimentRecord {
            config: config.clone(),
            steps,
            epochs,
            wall_clock_secs: start.elapsed().as_secs_f64(),
        },
        mass_trace,
        final_posteriors,
    })
}

struct StepOutcome {
    loss_fusion: f64,
    loss_unimodal: Vec<f64>,
    loss_total: f64,
    conflict: bool,
    mean_joint_uncertainty: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
fn train_step(
    net: &mut ToyMultiModalNet,
    batch: &Batch,
    config: &TrainConfig,
    prior: &PriorSpec,
    m: usize,
    step: usize,
    vel: &mut [Velocity],
    head_vel: &mut [(DMatrix<f64>, DVector<f64>)],
    fusion_vel: &mut (DMatrix<f64>, DVector<f64>),
    mut mass_trace: Option<&mut Vec<MassTraceRow>>,
) -> Result<StepOutcome> {
    let report = net.backward(batch, config.phi)?;

    // The step conflicts when any modality's unimodal gradient opposes the
    // fusion gradient on the same Θ^i block. A gradient that has fully
    // vanished (saturated softmax late in training) has nothing to conflict
    // with, so it counts as non-conflict rather than an error.
    let mut conflict = false;
    for i in 0..m {
        match detect_conflict(&report.theta_unimodal[i], &report.theta_fusion[i]) {
            Ok(true) => {
                conflict = true;
                break;
            }
            Ok(false) | Err(Error::ZeroGradient) => {}
            Err(e) => return Err(e),
        }
    }

    // Update direction for each Θ^i block.
    let mut theta_updates = Vec::with_capacity(m);
    let mut mean_joint_uncertainty = None;
    if config.aggregator == AggregatorKind::Bogc {
        let fwd = net.forward(batch)?;
        let n = batch.batch_size();

        // Per-sample gradient distributions for every modality.
        let mut dists: Vec<Vec<GradDist>> = Vec::with_capacity(m);
        for i in 0..m {
            let posterior = modality_posterior(net, batch, i, prior)?;
            let mut per_sample = Vec::with_capacity(n);
            for t in 0..n {
                let psi = fwd.hidden[i].row(t).transpose();
                let label = batch.labels[t];
                let theta_grad = |theta: &DVector<f64>| {
                    net.unimodal_theta_grad_at(i, &psi, label, theta)
                        .expect("dimensions fixed by the net")
                };
                let mut rng = SeededRng::new(
                    config.seed,
                    stream_id(&[30, step as u64, t as u64, i as u64]),
                );
                per_sample.push(mc_moments(&posterior, theta_grad, config.mc_samples, &mut rng)?);
            }
            dists.push(per_sample);
        }

        // Fusion distribution per batch item, then masses and joints.
        let mut uncertainty_acc = 0.0;
        for i in 0..m {
            let mut joints = Vec::with_capacity(n);
            let mut mod_masses = Vec::with_capacity(n);
            let mut fus_masses = Vec::with_capacity(n);
            let mut mu_mod = Vec::with_capacity(n);
            let mut mu_fus = Vec::with_capacity(n);
            for t in 0..n {
                let per_modality: Vec<GradDist> =
                    (0..m).map(|j| dists[j][t].clone()).collect();
                let fus = fusion_dist(&per_modality)?;
                let mass_i = mass_from_precisions(&dists[i][t].precision_diag, config.s)?;
                let mass_f = mass_from_precisions(&fus.precision_diag, config.s)?;
                let joint = dempster_combine(&mass_i, &mass_f)?;
                uncertainty_acc += joint.uncertainty;
                if t == 0 {
                    if let Some(rows) = mass_trace.as_deref_mut() {
                        for d in 0..joint.dim() {
                            rows.push(MassTraceRow {
                                step,
                                modality: i,
                                d,
                                lambda_i: dists[i][t].precision_diag[d],
                                lambda_fusion: fus.precision_diag[d],
                                b_i: mass_i.beliefs[d],
                                b_fusion: mass_f.beliefs[d],
                                b_joint: joint.beliefs[d],
                                u_joint: joint.uncertainty,
                                conflict: joint.conflict,
                            });
                        }
                    }
                }
                mu_mod.push(dists[i][t].mean.clone());
                mu_fus.push(fus.mean);
                joints.push(joint);
                mod_masses.push(mass_i);
                fus_masses.push(mass_f);
            }
            let g_ds = aggregate_gradient(&joints, &mod_masses, &fus_masses, &mu_mod, &mu_fus)?;
            theta_updates.push(calibrated_step(&g_ds, config.gamma));
        }
        mean_joint_uncertainty = Some(uncertainty_acc / (m * n) as f64);
    } else {
        for i in 0..m {
            theta_updates.push(apply_aggregator(
                config.aggregator,
                &report.theta_unimodal[i],
                &report.theta_fusion[i],
            )?);
        }
    }

    // SGD with momentum. Θ^i blocks take the aggregator direction; every
    // other tensor takes the raw joint-loss gradient.
    let lr = config.lr;
    let mu = config.momentum;
    for i in 0..m {
        let g = &report.full.encoders[i];
        let hw = net.encoders[i].w2.ncols();
        let theta_dir = DMatrix::from_fn(net.encoders[i].w2.nrows(), hw, |r, c| {
            theta_updates[i][r * hw + c]
        });
        let v = &mut vel[i];
        v.w1 = &v.w1 * mu + &g.w1;
        v.b1 = &v.b1 * mu + &g.b1;
        v.w2 = &v.w2 * mu + theta_dir;
        v.b2 = &v.b2 * mu + &g.b2;
        let enc = &mut net.encoders[i];
        enc.w1 -= &v.w1 * lr;
        enc.b1 -= &v.b1 * lr;
        enc.w2 -= &v.w2 * lr;
        enc.b2 -= &v.b2 * lr;

        let (vw, vb) = &mut head_vel[i];
        *vw = &*vw * mu + &report.full.unimodal_heads[i].w;
        *vb = &*vb * mu + &report.full.unimodal_heads[i].b;
        net.unimodal_heads[i].w -= &*vw * lr;
        net.unimodal_heads[i].b -= &*vb * lr;
    }
    let (vw, vb) = fusion_vel;
    *vw = &*vw * mu + &report.full.fusion_head.w;
    *vb = &*vb * mu + &report.full.fusion_head.b;
    net.fusion_head.w -= &*vw * lr;
    net.fusion_head.b -= &*vb * lr;

    Ok(StepOutcome {
        loss_fusion: report.losses.fusion,
        loss_unimodal: report.losses.unimodal,
        loss_total: report.losses.total,
        conflict,
        mean_joint_uncertainty,
    })
}

fn shuffled_indices(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = SeededRng::new(seed, stream_id(&[10, epoch as u64]));
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.index(i + 1);
        order.swap(i, j);
    }
    order
}

fn evaluate(net: &ToyMultiModalNet, data: &Dataset, epoch: usize) -> Result<EpochRecord> {
    let batch = data.test.as_batch()?;
    let fusion_preds = net.predict_fusion(&batch)?;
    let overall_acc = accuracy(&fusion_preds, &batch.labels);
    let per_modality_acc = (0..net.num_modalities())
        .map(|i| Ok(accuracy(&net.predict_unimodal(&batch, i)?, &batch.labels)))
        .collect::<Result<Vec<_>>>()?;
    let worst_group_acc =
        worst_class_accuracy(&fusion_preds, &batch.labels, data.spec.num_classes);
    Ok(EpochRecord {
        epoch,
        overall_acc,
        per_modality_acc,
        worst_group_acc,
    })
}

pub(crate) fn accuracy(preds: &[usize], labels: &[usize]) -> f64 {
    let hits = preds.iter().zip(labels).filter(|(p, y)| p == y).count();
    hits as f64 / labels.len() as f64
}

/// Minimum per-class accuracy over the classes present in `labels`.
pub(crate) fn worst_class_accuracy(preds: &[usize], labels: &[usize], num_classes: usize) -> f64 {
    let mut hits = vec![0usize; num_classes];
    let mut counts = vec![0usize; num_classes];
    for (p, &y) in preds.iter().zip(labels) {
        counts[y] += 1;
        if *p == y {
            hits[y] += 1;
        }
    }
    (0..num_classes)
        .filter(|&c| counts[c] > 0)
        .map(|c| hits[c] as f64 / counts[c] as f64)
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::synthetic::{gen_synthetic, SyntheticSpec};

    fn tiny_spec() -> SyntheticSpec {
        SyntheticSpec {
            samples_per_class: 8,
            ..SyntheticSpec::default()
        }
    }

    fn tiny_config(aggregator: AggregatorKind) -> TrainConfig {
        TrainConfig {
            aggregator,
            epochs: 2,
            batch_size: 8,
            mc_samples: 8,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_lr_freezes_parameters_and_metrics() {
        let data = gen_synthetic(&tiny_spec()).unwrap();
        let config = TrainConfig {
            lr: 0.0,
            ..tiny_config(AggregatorKind::UniformSum)
        };
        let record = train(&config, &data).unwrap();
        assert_eq!(record.epochs.len(), 2);
        assert_eq!(record.epochs[0].overall_acc, record.epochs[1].overall_acc);
        assert_eq!(
            record.epochs[0].worst_group_acc,
            record.epochs[1].worst_group_acc
        );
    }

    #[test]
    fn bogc_training_descends() {
        let data = gen_synthetic(&SyntheticSpec {
            samples_per_class: 16,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let config = TrainConfig {
            epochs: 4,
            batch_size: 16,
            mc_samples: 16,
            ..TrainConfig::default()
        };
        let record = train(&config, &data).unwrap();
        let spe = record.steps.len() / record.epochs.len();
        let first: f64 =
            record.steps[..spe].iter().map(|s| s.loss_total).sum::<f64>() / spe as f64;
        let last: f64 = record.steps[record.steps.len() - spe..]
            .iter()
            .map(|s| s.loss_total)
            .sum::<f64>()
            / spe as f64;
        assert!(last < first, "loss did not descend: {first} -> {last}");
        assert!(record
            .steps
            .iter()
            .all(|s| s.mean_joint_uncertainty.is_some()));
    }

    #[test]
    fn same_seed_gives_identical_records() {
        let data = gen_synthetic(&tiny_spec()).unwrap();
        let config = tiny_config(AggregatorKind::Bogc);
        let a = train(&config, &data).unwrap();
        let b = train(&config, &data).unwrap();
        assert_eq!(a.steps, b.steps);
        assert_eq!(a.epochs, b.epochs);
    }

    #[test]
    fn record_length_matches_epochs_times_steps() {
        let data = gen_synthetic(&tiny_spec()).unwrap();
        let config = tiny_config(AggregatorKind::UniformSum);
        let record = train(&config, &data).unwrap();
        let steps_per_epoch = data.train.len().div_ceil(config.batch_size);
        assert_eq!(record.steps.len(), config.epochs * steps_per_epoch);
        assert_eq!(record.epochs.len(), config.epochs);
    }

    #[test]
    fn worst_group_never_exceeds_overall() {
        let data = gen_synthetic(&tiny_spec()).unwrap();
        for kind in [AggregatorKind::UniformSum, AggregatorKind::Bogc] {
            let record = train(&tiny_config(kind), &data).unwrap();
            for e in &record.epochs {
                assert!(e.worst_group_acc <= e.overall_acc + 1e-12);
            }
        }
    }

    #[test]
    fn bogc_records_stay_finite() {
        let data = gen_synthetic(&tiny_spec()).unwrap();
        let record = train(&tiny_config(AggregatorKind::Bogc), &data).unwrap();
        for s in &record.steps {
            assert!(s.loss_fusion.is_finite());
            assert!(s.loss_total.is_finite());
            assert!(s.loss_unimodal.iter().all(|l| l.is_finite()));
            assert!(s.mean_joint_uncertainty.unwrap().is_finite());
        }
    }

    #[test]
    fn traces_and_posterior_dumps_are_collected_on_request() {
        let data = gen_synthetic(&tiny_spec()).unwrap();
        let config = tiny_config(AggregatorKind::Bogc);
        let out = train_full(
            &config,
            &NetConfig::default(),
            &data,
            TraceOptions {
                collect_mass_trace: true,
                collect_final_posteriors: true,
            },
        )
        .unwrap();
        let k = NetConfig::default().hidden_width * NetConfig::default().feature_dim;
        assert_eq!(
            out.mass_trace.len(),
            out.record.steps.len() * data.spec.num_modalities * k
        );
        assert_eq!(out.final_posteriors.len(), 2);
        assert_eq!(out.final_posteriors[0].covariance.rows, k);
        let row = &out.mass_trace[0];
        assert!(row.b_i >= 0.0 && row.b_joint >= 0.0 && row.u_joint > 0.0);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad_s = TrainConfig {
            s: 0.95,
            ..TrainConfig::default()
        };
        assert!(bad_s.validate().is_err());
        let bad_momentum = TrainConfig {
            momentum: 1.0,
            ..TrainConfig::default()
        };
        assert!(bad_momentum.validate().is_err());
    }

    #[test]
    fn config_json_round_trips_with_exact_field_names() {
        let text = r#"{
            "aggregator": {"fixed_blend": {"w": 0.3}},
            "s": 0.5,
            "gamma": 1.5,
            "phi": 1.0,
            "lr": 0.1,
            "momentum": 0.9,
            "mc_samples": 64,
            "epochs": 10,
            "batch_size": 16,
            "prior_variance": 1.0,
            "seed": 42
        }"#;
        let config: TrainConfig = serde_json::from_str(text).unwrap();
        assert_eq!(config.aggregator, AggregatorKind::FixedBlend { w: 0.3 });
        assert_eq!(config.seed, 42);
        let partial: TrainConfig = serde_json::from_str(r#"{"aggregator": "bogc"}"#).unwrap();
        assert_eq!(partial, TrainConfig::default());
        assert!(serde_json::from_str::<TrainConfig>(r#"{"unknown_field": 1}"#).is_err());
    }
}
