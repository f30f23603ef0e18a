//! Reference gradient aggregators and the conflict detector used by the
//! discovery study.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which rule combines the unimodal and fusion gradients of each `Θ^i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregatorKind {
    /// `g_uni + g_fusion`.
    UniformSum,
    /// `w * g_uni + (1 - w) * g_fusion` with fixed `w`.
    FixedBlend { w: f64 },
    /// Project the unimodal gradient off the fusion gradient on conflict.
    ConflictProjection,
    /// Belief-calibrated aggregation through the full evidence pipeline.
    Bogc,
}

impl AggregatorKind {
    pub fn validate(&self) -> Result<()> {
        if let AggregatorKind::FixedBlend { w } = self {
            if !(w.is_finite() && (0.0..=1.0).contains(w)) {
                return Err(Error::invalid_param("w", "blend weight must be in [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            AggregatorKind::UniformSum => "uniform_sum",
            AggregatorKind::FixedBlend { .. } => "fixed_blend",
            AggregatorKind::ConflictProjection => "conflict_projection",
            AggregatorKind::Bogc => "bogc",
        }
    }
}

impl std::str::FromStr for AggregatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform_sum" => Ok(AggregatorKind::UniformSum),
            "fixed_blend" => Ok(AggregatorKind::FixedBlend { w: 0.5 }),
            "conflict_projection" => Ok(AggregatorKind::ConflictProjection),
            "bogc" => Ok(AggregatorKind::Bogc),
            other => {
                if let Some(w) = other.strip_prefix("fixed_blend:") {
                    let w: f64 = w.parse().map_err(|_| {
                        Error::invalid_param("aggregator", format!("bad blend weight in `{other}`"))
                    })?;
                    let kind = AggregatorKind::FixedBlend { w };
                    kind.validate()?;
                    Ok(kind)
                } else {
                    Err(Error::invalid_param(
                        "aggregator",
                        format!("unknown aggregator `{other}`"),
                    ))
                }
            }
        }
    }
}

fn check_dims(a: &DVector<f64>, b: &DVector<f64>) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

/// Plain sum of the two gradient sources.
pub fn uniform_sum(g_uni: &DVector<f64>, g_fusion: &DVector<f64>) -> Result<DVector<f64>> {
    check_dims(g_uni, g_fusion)?;
    Ok(g_uni + g_fusion)
}

/// Fixed-ratio mix `w * g_uni + (1 - w) * g_fusion`.
pub fn fixed_blend(g_uni: &DVector<f64>, g_fusion: &DVector<f64>, w: f64) -> Result<DVector<f64>> {
    check_dims(g_uni, g_fusion)?;
    if !(w.is_finite() && (0.0..=1.0).contains(&w)) {
        return Err(Error::invalid_param("w", "blend weight must be in [0, 1]"));
    }
    Ok(g_uni * w + g_fusion * (1.0 - w))
}

/// On conflict, remove from `g_a` its component along `g_b`, then sum.
/// A zero `g_b` falls back to the plain sum.
pub fn conflict_projection(g_a: &DVector<f64>, g_b: &DVector<f64>) -> Result<DVector<f64>> {
    check_dims(g_a, g_b)?;
    let denom = g_b.dot(g_b);
    if denom == 0.0 {
        return uniform_sum(g_a, g_b);
    }
    let dot = g_a.dot(g_b);
    if dot < 0.0 {
        let projected = g_a - g_b * (dot / denom);
        Ok(projected + g_b)
    } else {
        uniform_sum(g_a, g_b)
    }
}

/// True iff the cosine between the two gradients is strictly negative.
/// A zero cosine (orthogonal gradients) counts as non-conflict.
pub fn detect_conflict(g_uni: &DVector<f64>, g_fusion: &DVector<f64>) -> Result<bool> {
    check_dims(g_uni, g_fusion)?;
    let nu = g_uni.norm();
    let nf = g_fusion.norm();
    if nu == 0.0 || nf == 0.0 {
        return Err(Error::ZeroGradient);
    }
    Ok(g_uni.dot(g_fusion) / (nu * nf) < 0.0)
}

/// Dispatch for the non-calibrated arms.
pub fn apply_aggregator(
    kind: AggregatorKind,
    g_uni: &DVector<f64>,
    g_fusion: &DVector<f64>,
) -> Result<DVector<f64>> {
    match kind {
        AggregatorKind::UniformSum => uniform_sum(g_uni, g_fusion),
        AggregatorKind::FixedBlend { w } => fixed_blend(g_uni, g_fusion, w),
        AggregatorKind::ConflictProjection => conflict_projection(g_uni, g_fusion),
        AggregatorKind::Bogc => Err(Error::invalid_param(
            "aggregator",
            "bogc is not a two-vector rule; it runs the evidence pipeline",
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn v(vals: &[f64]) -> DVector<f64> {
        DVector::from_vec(vals.to_vec())
    }

    #[test]
    fn uniform_sum_cases() {
        assert_eq!(uniform_sum(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), v(&[1.0, 1.0]));
        let g = v(&[2.0, -3.0]);
        assert_eq!(uniform_sum(&g, &v(&[0.0, 0.0])).unwrap(), g);
        assert_eq!(
            uniform_sum(&v(&[1.0, 2.0]), &v(&[3.0, 4.0])).unwrap(),
            uniform_sum(&v(&[3.0, 4.0]), &v(&[1.0, 2.0])).unwrap()
        );
    }

    #[test]
    fn fixed_blend_cases() {
        let gu = v(&[10.0, 0.0]);
        let gf = v(&[0.0, 10.0]);
        assert_eq!(fixed_blend(&gu, &gf, 1.0).unwrap(), gu);
        let mid = fixed_blend(&gu, &gf, 0.5).unwrap();
        assert_eq!(mid, v(&[5.0, 5.0]));
        let mixed = fixed_blend(&gu, &gf, 0.3).unwrap();
        assert_relative_eq!(mixed[0], 3.0, max_relative = 1e-15);
        assert_relative_eq!(mixed[1], 7.0, max_relative = 1e-15);
        assert!(fixed_blend(&gu, &gf, 1.5).is_err());
    }

    #[test]
    fn projection_leaves_orthogonal_gradients_alone() {
        let ga = v(&[1.0, 0.0]);
        let gb = v(&[0.0, 1.0]);
        assert_eq!(
            conflict_projection(&ga, &gb).unwrap(),
            uniform_sum(&ga, &gb).unwrap()
        );
    }

    #[test]
    fn projection_cancels_opposed_gradient() {
        let ga = v(&[-1.0, 0.0]);
        let gb = v(&[1.0, 0.0]);
        assert_eq!(conflict_projection(&ga, &gb).unwrap(), v(&[1.0, 0.0]));
    }

    #[test]
    fn projection_output_never_opposes_reference() {
        let mut rng = crate::numerics::SeededRng::new(3, 0);
        for _ in 0..100 {
            let ga = DVector::from_fn(4, |_, _| rng.standard_normal());
            let gb = DVector::from_fn(4, |_, _| rng.standard_normal());
            let out = conflict_projection(&ga, &gb).unwrap();
            assert!(out.dot(&gb) >= -1e-12);
        }
    }

    #[test]
    fn projection_falls_back_on_zero_reference() {
        let ga = v(&[1.0, 2.0]);
        let gb = v(&[0.0, 0.0]);
        assert_eq!(conflict_projection(&ga, &gb).unwrap(), ga);
    }

    #[test]
    fn conflict_detection_cases() {
        assert!(!detect_conflict(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap());
        assert!(detect_conflict(&v(&[1.0, 0.0]), &v(&[-1.0, 0.0])).unwrap());
        // cosine = -1/sqrt(10) < 0
        assert!(detect_conflict(&v(&[1.0, 1.0]), &v(&[1.0, -2.0])).unwrap());
        assert!(matches!(
            detect_conflict(&v(&[0.0, 0.0]), &v(&[1.0, 0.0])),
            Err(Error::ZeroGradient)
        ));
    }

    #[test]
    fn projection_equals_uniform_sum_without_conflict() {
        let mut rng = crate::numerics::SeededRng::new(4, 0);
        for _ in 0..100 {
            let ga = DVector::from_fn(3, |_, _| rng.standard_normal());
            let gb = DVector::from_fn(3, |_, _| rng.standard_normal());
            if !detect_conflict(&ga, &gb).unwrap() {
                assert_eq!(
                    conflict_projection(&ga, &gb).unwrap(),
                    uniform_sum(&ga, &gb).unwrap()
                );
            }
        }
    }

    #[test]
    fn aggregator_parsing() {
        assert_eq!(
            "uniform_sum".parse::<AggregatorKind>().unwrap(),
            AggregatorKind::UniformSum
        );
        assert_eq!(
            "fixed_blend".parse::<AggregatorKind>().unwrap(),
            AggregatorKind::FixedBlend { w: 0.5 }
        );
        assert_eq!(
            "fixed_blend:0.3".parse::<AggregatorKind>().unwrap(),
            AggregatorKind::FixedBlend { w: 0.3 }
        );
        assert_eq!("bogc".parse::<AggregatorKind>().unwrap(), AggregatorKind::Bogc);
        assert!("nope".parse::<AggregatorKind>().is_err());
        assert!("fixed_blend:1.5".parse::<AggregatorKind>().is_err());
    }

    proptest! {
        #[test]
        fn aggregators_are_positively_homogeneous(
            a in proptest::collection::vec(-10.0f64..10.0, 3),
            b in proptest::collection::vec(-10.0f64..10.0, 3),
            c in 0.01f64..100.0,
        ) {
            let ga = DVector::from_vec(a);
            let gb = DVector::from_vec(b);
            for kind in [
                AggregatorKind::UniformSum,
                AggregatorKind::FixedBlend { w: 0.5 },
                AggregatorKind::ConflictProjection,
            ] {
                let base = apply_aggregator(kind, &ga, &gb).unwrap();
                let scaled = apply_aggregator(kind, &(&ga * c), &(&gb * c)).unwrap();
                for d in 0..3 {
                    prop_assert!((scaled[d] - c * base[d]).abs() <= 1e-9 * (1.0 + base[d].abs() * c));
                }
            }
        }
    }
}
