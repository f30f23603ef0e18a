//! Precision-to-evidence mapping, subjective-logic masses, and the reduced
//! Dempster combination that produces the calibrated aggregate gradient.
//!
//! Per-dimension precisions become evidence through a power map `e = λ^s`;
//! evidence becomes Dirichlet concentrations `α = e + 1`, beliefs `b = e/S`
//! and uncertainty `u = K/S` with `S = Σ α`. A modality mass and the fusion
//! mass are then combined two at a time, and the joint beliefs weight the
//! gradient means into the aggregate update `g_DS`.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Evidence values are clamped here so precisions exploding near zero
/// variance cannot overflow downstream sums.
pub const EVIDENCE_CAP: f64 = 1e12;

/// Conflict at or above `1 - TOTAL_CONFLICT_MARGIN` is rejected.
pub const TOTAL_CONFLICT_MARGIN: f64 = 1e-12;

/// Subjective-logic mass: per-dimension beliefs plus scalar uncertainty,
/// summing to one, with the Dirichlet bookkeeping that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct MassSet {
    pub beliefs: DVector<f64>,
    pub uncertainty: f64,
    pub dirichlet_strength: f64,
    pub evidence: DVector<f64>,
}

impl MassSet {
    /// Build from beliefs and uncertainty, deriving strength and evidence
    /// from the subjective-logic identities `u = K/S`, `b = e/S`.
    pub fn new(beliefs: DVector<f64>, uncertainty: f64) -> Result<Self> {
        let k = beliefs.len();
        if k == 0 {
            return Err(Error::invalid_param("beliefs", "need at least one dimension"));
        }
        if !(uncertainty.is_finite() && uncertainty > 0.0 && uncertainty <= 1.0) {
            return Err(Error::invalid_param("uncertainty", "must be in (0, 1]"));
        }
        if beliefs.iter().any(|&b| !(0.0..=1.0).contains(&b)) {
            return Err(Error::invalid_param("beliefs", "entries must be in [0, 1]"));
        }
        let total = beliefs.sum() + uncertainty;
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid_param(
                "beliefs",
                format!("Σb + u = {total}, expected 1"),
            ));
        }
        let strength = k as f64 / uncertainty;
        let evidence = &beliefs * strength;
        Ok(MassSet {
            beliefs,
            uncertainty,
            dirichlet_strength: strength,
            evidence,
        })
    }

    /// The fully uncertain mass: zero beliefs, uncertainty one.
    pub fn vacuous(k: usize) -> Self {
        MassSet {
            beliefs: DVector::zeros(k),
            uncertainty: 1.0,
            dirichlet_strength: k as f64,
            evidence: DVector::zeros(k),
        }
    }

    pub fn dim(&self) -> usize {
        self.beliefs.len()
    }
}

/// Joint mass from a reduced Dempster combination, with the measured
/// inter-source conflict.
#[derive(Debug, Clone, PartialEq)]
pub struct JointMass {
    pub beliefs: DVector<f64>,
    pub uncertainty: f64,
    pub conflict: f64,
}

impl JointMass {
    pub fn dim(&self) -> usize {
        self.beliefs.len()
    }
}

/// Conjugate Gaussian posterior precision after `n` observations of
/// precision `tau`: `λ_n = λ_0 + n τ`.
pub fn posterior_precision(lambda0: f64, n: u64, tau: f64) -> Result<f64> {
    if !(lambda0.is_finite() && lambda0 > 0.0) {
        return Err(Error::invalid_param("lambda0", "must be finite and > 0"));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid_param("tau", "must be finite and > 0"));
    }
    Ok(lambda0 + n as f64 * tau)
}

/// Power mapping from precision to scalar evidence: `e = λ^s`.
pub fn precision_to_evidence(lambda: f64, s: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid_param("lambda", "must be finite and > 0"));
    }
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::invalid_param("s", "must be finite and > 0"));
    }
    Ok(lambda.powf(s))
}

/// Mass set from a vector of per-dimension precisions.
///
/// `e_d = λ_d^s` (clamped to [`EVIDENCE_CAP`]), `α_d = e_d + 1`, `S = Σ α_d`,
/// `b_d = e_d / S`, `u = K / S`. Zero precisions are allowed as the limiting
/// zero-evidence input, so the vacuous mass is reachable.
pub fn mass_from_precisions(lambdas: &DVector<f64>, s: f64) -> Result<MassSet> {
    if lambdas.is_empty() {
        return Err(Error::invalid_param("lambdas", "need at least one dimension"));
    }
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::invalid_param("s", "must be finite and > 0"));
    }
    if lambdas.iter().any(|&l| !l.is_finite() || l < 0.0) {
        return Err(Error::invalid_param(
            "lambdas",
            "entries must be finite and >= 0",
        ));
    }
    let k = lambdas.len();
    let evidence = DVector::from_fn(k, |d, _| lambdas[d].powf(s).clamp(0.0, EVIDENCE_CAP));
    let strength = evidence.sum() + k as f64;
    let beliefs = &evidence / strength;
    Ok(MassSet {
        beliefs,
        uncertainty: k as f64 / strength,
        dirichlet_strength: strength,
        evidence,
    })
}

/// Neumaier-compensated sum; addend order is fixed by the caller.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Reduced Dempster combination of two mass sets.
///
/// `b_d = (b_d^1 b_d^2 + b_d^1 u^2 + b_d^2 u^1) / (1 - C)` and
/// `u = u^1 u^2 / (1 - C)` with `C = Σ_{p≠q} b_p^1 b_q^2`.
///
/// The conflict is accumulated with compensated summation over pair-grouped
/// products, and the outputs are normalized by the sum of their own
/// numerators (algebraically `1 - C`), so `Σb + u = 1` holds to machine
/// precision and `combine(a, b) == combine(b, a)` bitwise.
pub fn dempster_combine(m1: &MassSet, m2: &MassSet) -> Result<JointMass> {
    let k = m1.dim();
    if m2.dim() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: m2.dim(),
        });
    }
    let conflict = compensated_sum((0..k).flat_map(|p| {
        let m1 = &m1.beliefs;
        let m2 = &m2.beliefs;
        ((p + 1)..k).map(move |q| m1[p] * m2[q] + m1[q] * m2[p])
    }));
    if conflict >= 1.0 - TOTAL_CONFLICT_MARGIN {
        return Err(Error::TotalConflict(conflict));
    }
    // Grouping matters: t1 + (t2 + t3) keeps the expression symmetric in
    // (m1, m2) at the bit level.
    let numerators = DVector::from_fn(k, |d, _| {
        m1.beliefs[d] * m2.beliefs[d]
            + (m1.beliefs[d] * m2.uncertainty + m2.beliefs[d] * m1.uncertainty)
    });
    let nu = m1.uncertainty * m2.uncertainty;
    let total = numerators.sum() + nu;
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::TotalConflict(conflict));
    }
    Ok(JointMass {
        beliefs: numerators / total,
        uncertainty: nu / total,
        conflict,
    })
}

/// Belief-weighted aggregate gradient over a batch:
/// `(g_DS)_d = Σ_t b_{t,d} (b_{t,d}^i μ_{t,d}^i + b_{t,d}^f μ_{t,d}^f)`.
/// The reduction runs in ascending `t` so results are schedule-independent.
pub fn aggregate_gradient(
    joints: &[JointMass],
    modality_masses: &[MassSet],
    fusion_masses: &[MassSet],
    mu_modality: &[DVector<f64>],
    mu_fusion: &[DVector<f64>],
) -> Result<DVector<f64>> {
    let n = joints.len();
    if n == 0 {
        return Err(Error::invalid_param("joints", "need at least one sample"));
    }
    if [
        modality_masses.len(),
        fusion_masses.len(),
        mu_modality.len(),
        mu_fusion.len(),
    ]
    .iter()
    .any(|&l| l != n)
    {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: modality_masses.len(),
        });
    }
    let k = joints[0].dim();
    let mut g = DVector::zeros(k);
    for t in 0..n {
        if joints[t].dim() != k
            || modality_masses[t].dim() != k
            || fusion_masses[t].dim() != k
            || mu_modality[t].len() != k
            || mu_fusion[t].len() != k
        {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: joints[t].dim(),
            });
        }
        for d in 0..k {
            g[d] += joints[t].beliefs[d]
                * (modality_masses[t].beliefs[d] * mu_modality[t][d]
                    + fusion_masses[t].beliefs[d] * mu_fusion[t][d]);
        }
    }
    Ok(g)
}

/// Scale the aggregate into the update handed to the optimizer: `γ g_DS`.
/// Requires `gamma > 0`.
pub fn calibrated_step(g_ds: &DVector<f64>, gamma: f64) -> DVector<f64> {
    g_ds * gamma
}
