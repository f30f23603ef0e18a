//! The experiment suite: the conflict/non-conflict discovery study and the
//! evidence-exponent ablation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::AggregatorKind;
use crate::error::{Error, Result};
use crate::harness::synthetic::{gen_synthetic, SyntheticSpec};
use crate::harness::training::{train, TrainConfig};
use crate::numerics::stream_id;

/// Engineered data regimes used by the discovery study. Runs are still
/// assigned to conflict partitions by what they actually measure; the
/// scenarios only push them toward one side.
///
/// Measured gradient conflict behaves counter to first intuition here:
/// label noise keeps both objectives pulling along the shared signal
/// (cosine stays positive), while a clean, nearly-converged run leaves
/// small competing gradients whose cosine goes negative on most steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Noisy labels over partially redundant modalities: large shared-signal
    /// gradients keep the objectives aligned throughout training.
    Aligned,
    /// Clean labels and a tighter class separation: training converges and
    /// the residual unimodal and fusion gradients compete over each Θ^i.
    Conflicting,
}

impl Scenario {
    pub const ALL: [Scenario; 2] = [Scenario::Aligned, Scenario::Conflicting];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Aligned => "aligned",
            Scenario::Conflicting => "conflicting",
        }
    }

    /// Data spec for one repeat of this scenario.
    pub fn spec(&self, base: &SyntheticSpec, base_seed: u64, repeat: usize) -> SyntheticSpec {
        let seed = stream_id(&[40, base_seed, repeat as u64, *self as u64]);
        match self {
            Scenario::Aligned => SyntheticSpec {
                redundancy: 0.6,
                label_noise: 0.2,
                seed,
                ..base.clone()
            },
            Scenario::Conflicting => SyntheticSpec {
                redundancy: 0.6,
                label_noise: 0.02,
                separation: 1.4,
                seed,
                ..base.clone()
            },
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One trained run inside the discovery grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryCell {
    pub repeat: usize,
    pub scenario: Scenario,
    pub aggregator: String,
    pub overall_acc: f64,
    pub worst_group_acc: f64,
    pub conflict_fraction: f64,
    pub conflict_dominant: bool,
}

/// Aggregated row of the discovery table: one (arm, scenario) pair.
/// The two dominance counts always sum to the number of repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoverySummaryRow {
    pub aggregator: String,
    pub scenario: Scenario,
    pub conflict_dominant_runs: usize,
    pub non_conflict_dominant_runs: usize,
    pub mean_worst_group_acc: f64,
    pub std_worst_group_acc: f64,
}

/// Results of the discovery study.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryReport {
    pub repeats: usize,
    pub cells: Vec<DiscoveryCell>,
}

/// The three comparison arms of the discovery study.
pub const DISCOVERY_ARMS: [AggregatorKind; 3] = [
    AggregatorKind::UniformSum,
    AggregatorKind::FixedBlend { w: 0.5 },
    AggregatorKind::Bogc,
];

impl DiscoveryReport {
    /// One summary row per (arm, scenario).
    pub fn summary(&self) -> Vec<DiscoverySummaryRow> {
        let mut rows = Vec::new();
        for arm in DISCOVERY_ARMS {
            for scenario in Scenario::ALL {
                let cells: Vec<&DiscoveryCell> = self
                    .cells
                    .iter()
                    .filter(|c| c.aggregator == arm.name() && c.scenario == scenario)
                    .collect();
                if cells.is_empty() {
                    continue;
                }
                let accs: Vec<f64> = cells.iter().map(|c| c.worst_group_acc).collect();
                let mean = accs.iter().sum::<f64>() / accs.len() as f64;
                let var = accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>()
                    / accs.len() as f64;
                let dominant = cells.iter().filter(|c| c.conflict_dominant).count();
                rows.push(DiscoverySummaryRow {
                    aggregator: arm.name().to_string(),
                    scenario,
                    conflict_dominant_runs: dominant,
                    non_conflict_dominant_runs: cells.len() - dominant,
                    mean_worst_group_acc: mean,
                    std_worst_group_acc: var.sqrt(),
                });
            }
        }
        rows
    }

    /// Conflict-dominance of one (repeat, scenario) group, measured on the
    /// uniform reference run so all arms are partitioned by the same data.
    pub fn reference_dominant(&self, repeat: usize, scenario: Scenario) -> Option<bool> {
        self.cells
            .iter()
            .find(|c| {
                c.repeat == repeat
                    && c.scenario == scenario
                    && c.aggregator == AggregatorKind::UniformSum.name()
            })
            .map(|c| c.conflict_dominant)
    }

    /// Cells of one arm whose group falls in the given partition.
    pub fn partition_cells(&self, arm: &str, conflict_dominant: bool) -> Vec<&DiscoveryCell> {
        self.cells
            .iter()
            .filter(|c| {
                c.aggregator == arm
                    && self.reference_dominant(c.repeat, c.scenario) == Some(conflict_dominant)
            })
            .collect()
    }

    /// `(count, mean worst-group accuracy)` of one arm in one partition.
    pub fn partition_mean(&self, arm: &str, conflict_dominant: bool) -> (usize, f64) {
        let cells = self.partition_cells(arm, conflict_dominant);
        if cells.is_empty() {
            return (0, f64::NAN);
        }
        let mean =
            cells.iter().map(|c| c.worst_group_acc).sum::<f64>() / cells.len() as f64;
        (cells.len(), mean)
    }

    /// Text table in the style of the discovery figure.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(
            "aggregator        scenario      runs  conflict-dominant  worst-group acc (mean ± std)\n",
        );
        for row in self.summary() {
            out.push_str(&format!(
                "{:<16}  {:<12}  {:>4}  {:>17}  {:.4} ± {:.4}\n",
                row.aggregator,
                row.scenario.name(),
                row.conflict_dominant_runs + row.non_conflict_dominant_runs,
                row.conflict_dominant_runs,
                row.mean_worst_group_acc,
                row.std_worst_group_acc,
            ));
        }
        for dominant in [true, false] {
            let partition = if dominant {
                "conflict-dominant"
            } else {
                "non-conflict-dominant"
            };
            out.push_str(&format!("\npartition: {partition}\n"));
            for arm in DISCOVERY_ARMS {
                let (n, mean) = self.partition_mean(arm.name(), dominant);
                out.push_str(&format!(
                    "  {:<16}  n = {:>3}  mean worst-group acc = {}\n",
                    arm.name(),
                    n,
                    if n == 0 {
                        "-".to_string()
                    } else {
                        format!("{mean:.4}")
                    }
                ));
            }
        }
        out
    }
}

/// Run the discovery study: `repeats` seeds, two engineered scenarios each,
/// all three arms trained on identical data and initialization per cell.
pub fn run_discovery(config: &TrainConfig, repeats: usize) -> Result<DiscoveryReport> {
    if repeats < 5 {
        return Err(Error::invalid_param("repeats", "need at least 5 repeats"));
    }
    config.validate()?;
    let base_spec = SyntheticSpec::default();
    let grid: Vec<(usize, Scenario)> = (0..repeats)
        .flat_map(|r| Scenario::ALL.into_iter().map(move |s| (r, s)))
        .collect();

    let nested: Vec<Result<Vec<DiscoveryCell>>> = grid
        .par_iter()
        .map(|&(repeat, scenario)| {
            let spec = scenario.spec(&base_spec, config.seed, repeat);
            let data = gen_synthetic(&spec)?;
            let run_seed = stream_id(&[41, config.seed, repeat as u64, scenario as u64]);
            let mut cells = Vec::with_capacity(DISCOVERY_ARMS.len());
            for arm in DISCOVERY_ARMS {
                let cfg = TrainConfig {
                    aggregator: arm,
                    seed: run_seed,
                    ..config.clone()
                };
                let record = train(&cfg, &data)?;
                cells.push(DiscoveryCell {
                    repeat,
                    scenario,
                    aggregator: arm.name().to_string(),
                    overall_acc: record.final_overall_acc(),
                    worst_group_acc: record.final_worst_group_acc(),
                    conflict_fraction: record.conflict_fraction(),
                    conflict_dominant: record.conflict_dominant(),
                });
            }
            Ok(cells)
        })
        .collect();

    let mut cells = Vec::with_capacity(grid.len() * DISCOVERY_ARMS.len());
    for group in nested {
        cells.extend(group?);
    }
    Ok(DiscoveryReport { repeats, cells })
}

/// One trained run of the `s` sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub s: f64,
    pub seed_index: usize,
    pub overall_acc: f64,
    pub worst_group_acc: f64,
    /// No recorded field was NaN or infinite.
    pub all_finite: bool,
}

/// Results of the evidence-exponent sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub s_values: Vec<f64>,
    pub num_seeds: usize,
    pub cells: Vec<AblationCell>,
}

impl AblationReport {
    /// Mean and std of overall accuracy at one `s`.
    pub fn mean_std(&self, s: f64) -> (f64, f64) {
        let accs: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.s == s)
            .map(|c| c.overall_acc)
            .collect();
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        let var = accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / accs.len() as f64;
        (mean, var.sqrt())
    }

    /// Spread (max - min) of the per-`s` mean accuracies, in accuracy points.
    pub fn accuracy_spread(&self) -> f64 {
        let means: Vec<f64> = self.s_values.iter().map(|&s| self.mean_std(s).0).collect();
        let max = means.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let min = means.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        max - min
    }

    pub fn render_table(&self) -> String {
        let mut out = String::from("s       accuracy (mean ± std over seeds)\n");
        for &s in &self.s_values {
            let (mean, std) = self.mean_std(s);
            out.push_str(&format!("{s:<6}  {mean:.4} ± {std:.4}\n"));
        }
        out.push_str(&format!(
            "spread of means: {:.4} accuracy points\n",
            self.accuracy_spread()
        ));
        out
    }
}

/// Sweep the evidence exponent: one calibrated run per `(s, seed)` on the
/// default data spec, with the same seed set shared across all `s` values.
pub fn run_s_ablation(
    config: &TrainConfig,
    s_values: &[f64],
    num_seeds: usize,
) -> Result<AblationReport> {
    if s_values.is_empty() {
        return Err(Error::invalid_param("s_values", "need at least one value"));
    }
    if num_seeds == 0 {
        return Err(Error::invalid_param("num_seeds", "need at least one seed"));
    }
    for &s in s_values {
        if !(s.is_finite() && (0.01..=0.9).contains(&s)) {
            return Err(Error::invalid_param("s_values", "entries must be in [0.01, 0.9]"));
        }
    }
    config.validate()?;
    let base_spec = SyntheticSpec::default();
    let grid: Vec<(usize, usize)> = (0..s_values.len())
        .flat_map(|si| (0..num_seeds).map(move |r| (si, r)))
        .collect();

    let cells: Vec<Result<AblationCell>> = grid
        .par_iter()
        .map(|&(si, seed_index)| {
            let spec = SyntheticSpec {
                seed: stream_id(&[50, config.seed, seed_index as u64]),
                ..base_spec.clone()
            };
            let data = gen_synthetic(&spec)?;
            let cfg = TrainConfig {
                aggregator: AggregatorKind::Bogc,
                s: s_values[si],
                seed: stream_id(&[51, config.seed, seed_index as u64]),
                ..config.clone()
            };
            let record = train(&cfg, &data)?;
            let all_finite = record.steps.iter().all(|s| {
                s.loss_fusion.is_finite()
                    && s.loss_total.is_finite()
                    && s.loss_unimodal.iter().all(|l| l.is_finite())
                    && s.mean_joint_uncertainty.is_none_or(f64::is_finite)
            }) && record.epochs.iter().all(|e| {
                e.overall_acc.is_finite()
                    && e.worst_group_acc.is_finite()
                    && e.per_modality_acc.iter().all(|a| a.is_finite())
            });
            Ok(AblationCell {
                s: s_values[si],
                seed_index,
                overall_acc: record.final_overall_acc(),
                worst_group_acc: record.final_worst_group_acc(),
                all_finite,
            })
        })
        .collect();

    Ok(AblationReport {
        s_values: s_values.to_vec(),
        num_seeds,
        cells: cells.into_iter().collect::<Result<_>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_config() -> TrainConfig {
        TrainConfig {
            epochs: 1,
            batch_size: 16,
            mc_samples: 4,
            seed: 11,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn discovery_grid_has_full_shape() {
        let report = run_discovery(&quick_config(), 5).unwrap();
        assert_eq!(report.cells.len(), 5 * 3 * 2);
        let summary = report.summary();
        assert_eq!(summary.len(), 3 * 2);
        for row in &summary {
            assert_eq!(
                row.conflict_dominant_runs + row.non_conflict_dominant_runs,
                5
            );
        }
    }

    #[test]
    fn discovery_rejects_too_few_repeats() {
        assert!(run_discovery(&quick_config(), 4).is_err());
    }

    #[test]
    fn ablation_shapes_and_finiteness() {
        let report = run_s_ablation(&quick_config(), &[0.5], 2).unwrap();
        assert_eq!(report.cells.len(), 2);
        assert!(report.cells.iter().all(|c| c.all_finite));
        let (mean, _) = report.mean_std(0.5);
        assert!(mean.is_finite());
    }

    #[test]
    fn ablation_rejects_out_of_range_s() {
        assert!(run_s_ablation(&quick_config(), &[0.95], 1).is_err());
    }
}
