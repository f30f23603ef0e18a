//! Report files: CSV and JSONL emission with lossless float formatting.
//!
//! Floats are written with 17 significant digits, enough to reproduce every
//! `f64` bit-exactly on re-read. Wall-clock time is never written, so two
//! runs with the same seed emit byte-identical files.
//!
//! JSONL carries the config object plus one object per step and per epoch;
//! CSV is a single-header table of the step and epoch rows (a flat table has
//! no natural place for the config object).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::experiments::{AblationReport, DiscoveryReport};
use crate::harness::training::{
    EpochRecord, ExperimentRecord, MassTraceRow, PosteriorSnapshot, StepRecord, TrainConfig,
};

/// Output format of a report file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Jsonl,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "jsonl" => Ok(ReportFormat::Jsonl),
            other => Err(Error::invalid_param(
                "format",
                format!("unknown format `{other}`, expected csv or jsonl"),
            )),
        }
    }
}

/// 17 significant digits: the shortest width that round-trips every double.
pub fn fmt_f64(value: f64) -> String {
    format!("{value:.16e}")
}

/// JSON formatter writing floats via [`fmt_f64`].
struct SigDigitFormatter;

impl serde_json::ser::Formatter for SigDigitFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        if !value.is_finite() {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                "refusing to serialize a non-finite float",
            ));
        }
        writer.write_all(fmt_f64(value).as_bytes())
    }
}

/// Serialize one value as a JSONL line with lossless floats.
pub fn to_jsonl_line<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigitFormatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits utf-8"))
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ReportRow {
    Config { config: TrainConfig },
    Step(StepRecord),
    Epoch(EpochRecord),
}

/// Write a training record to `path` in the chosen format.
pub fn emit_report(record: &ExperimentRecord, format: ReportFormat, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    match format {
        ReportFormat::Jsonl => {
            writeln!(
                w,
                "{}",
                to_jsonl_line(&ReportRow::Config {
                    config: record.config.clone()
                })?
            )?;
            for step in &record.steps {
                writeln!(w, "{}", to_jsonl_line(&ReportRow::Step(step.clone()))?)?;
            }
            for epoch in &record.epochs {
                writeln!(w, "{}", to_jsonl_line(&ReportRow::Epoch(epoch.clone()))?)?;
            }
        }
        ReportFormat::Csv => {
            let num_modalities = record
                .steps
                .first()
                .map(|s| s.loss_unimodal.len())
                .or_else(|| record.epochs.first().map(|e| e.per_modality_acc.len()))
                .unwrap_or(0);
            let mut csv = csv::Writer::from_writer(w);
            let mut header = vec!["kind".to_string(), "step".into(), "epoch".into()];
            header.push("loss_fusion".into());
            for i in 0..num_modalities {
                header.push(format!("loss_uni_{i}"));
            }
            header.push("loss_total".into());
            header.push("conflict".into());
            header.push("mean_joint_uncertainty".into());
            header.push("overall_acc".into());
            for i in 0..num_modalities {
                header.push(format!("acc_modality_{i}"));
            }
            header.push("worst_group_acc".into());
            csv.write_record(&header)?;
            let blank = || String::new();
            for s in &record.steps {
                let mut row = vec![
                    "step".to_string(),
                    s.step.to_string(),
                    s.epoch.to_string(),
                    fmt_f64(s.loss_fusion),
                ];
                row.extend(s.loss_unimodal.iter().map(|&v| fmt_f64(v)));
                row.push(fmt_f64(s.loss_total));
                row.push(s.conflict.to_string());
                row.push(s.mean_joint_uncertainty.map(fmt_f64).unwrap_or_default());
                row.push(blank());
                row.extend((0..num_modalities).map(|_| blank()));
                row.push(blank());
                csv.write_record(&row)?;
            }
            for e in &record.epochs {
                let mut row = vec!["epoch".to_string(), blank(), e.epoch.to_string(), blank()];
                row.extend((0..num_modalities).map(|_| blank()));
                row.push(blank());
                row.push(blank());
                row.push(blank());
                row.push(fmt_f64(e.overall_acc));
                row.extend(e.per_modality_acc.iter().map(|&v| fmt_f64(v)));
                row.push(fmt_f64(e.worst_group_acc));
                csv.write_record(&row)?;
            }
            csv.flush()?;
        }
    }
    Ok(())
}

/// Read a report back. JSONL restores the config too; CSV restores the step
/// and epoch rows (its table carries no config object).
pub fn read_report(path: &Path, format: ReportFormat) -> Result<ExperimentRecord> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut config = TrainConfig::default();
    let mut steps = Vec::new();
    let mut epochs = Vec::new();
    match format {
        ReportFormat::Jsonl => {
            for line in reader.lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<ReportRow>(&line)? {
                    ReportRow::Config { config: c } => config = c,
                    ReportRow::Step(s) => steps.push(s),
                    ReportRow::Epoch(e) => epochs.push(e),
                }
            }
        }
        ReportFormat::Csv => {
            let mut csv = csv::Reader::from_reader(reader);
            let headers = csv.headers()?.clone();
            let num_modalities = headers
                .iter()
                .filter(|h| h.starts_with("loss_uni_"))
                .count();
            let col = |name: &str| -> Result<usize> {
                headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::MalformedReport(format!("missing column {name}")))
            };
            let parse_f = |field: &str, name: &str| -> Result<f64> {
                field.parse::<f64>().map_err(|_| {
                    Error::MalformedReport(format!("bad float `{field}` in column {name}"))
                })
            };
            let parse_u = |field: &str, name: &str| -> Result<usize> {
                field.parse::<usize>().map_err(|_| {
                    Error::MalformedReport(format!("bad integer `{field}` in column {name}"))
                })
            };
            for row in csv.records() {
                let row = row?;
                match &row[col("kind")?] {
                    "step" => {
                        let mut loss_unimodal = Vec::with_capacity(num_modalities);
                        for i in 0..num_modalities {
                            let name = format!("loss_uni_{i}");
                            loss_unimodal.push(parse_f(&row[col(&name)?], &name)?);
                        }
                        let mju = &row[col("mean_joint_uncertainty")?];
                        steps.push(StepRecord {
                            step: parse_u(&row[col("step")?], "step")?,
                            epoch: parse_u(&row[col("epoch")?], "epoch")?,
                            loss_fusion: parse_f(&row[col("loss_fusion")?], "loss_fusion")?,
                            loss_unimodal,
                            loss_total: parse_f(&row[col("loss_total")?], "loss_total")?,
                            conflict: &row[col("conflict")?] == "true",
                            mean_joint_uncertainty: if mju.is_empty() {
                                None
                            } else {
                                Some(parse_f(mju, "mean_joint_uncertainty")?)
                            },
                        });
                    }
                    "epoch" => {
                        let mut per_modality_acc = Vec::with_capacity(num_modalities);
                        for i in 0..num_modalities {
                            let name = format!("acc_modality_{i}");
                            per_modality_acc.push(parse_f(&row[col(&name)?], &name)?);
                        }
                        epochs.push(EpochRecord {
                            epoch: parse_u(&row[col("epoch")?], "epoch")?,
                            overall_acc: parse_f(&row[col("overall_acc")?], "overall_acc")?,
                            per_modality_acc,
                            worst_group_acc: parse_f(
                                &row[col("worst_group_acc")?],
                                "worst_group_acc",
                            )?,
                        });
                    }
                    other => {
                        return Err(Error::MalformedReport(format!("unknown row kind `{other}`")))
                    }
                }
            }
        }
    }
    Ok(ExperimentRecord {
        config,
        steps,
        epochs,
        wall_clock_secs: 0.0,
    })
}

/// Write the per-dimension mass trace as JSONL.
pub fn emit_mass_trace(rows: &[MassTraceRow], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in rows {
        writeln!(w, "{}", to_jsonl_line(row)?)?;
    }
    Ok(())
}

/// Write posterior snapshots as a JSON array (compact, lossless floats).
pub fn emit_posteriors(snapshots: &[PosteriorSnapshot], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", to_jsonl_line(&snapshots)?)?;
    Ok(())
}

/// Write discovery cells to a file, one row per trained run.
pub fn emit_discovery(report: &DiscoveryReport, format: ReportFormat, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        ReportFormat::Jsonl => {
            for cell in &report.cells {
                writeln!(w, "{}", to_jsonl_line(cell)?)?;
            }
        }
        ReportFormat::Csv => {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record([
                "repeat",
                "scenario",
                "aggregator",
                "overall_acc",
                "worst_group_acc",
                "conflict_fraction",
                "conflict_dominant",
            ])?;
            for c in &report.cells {
                csv.write_record([
                    c.repeat.to_string(),
                    c.scenario.name().to_string(),
                    c.aggregator.clone(),
                    fmt_f64(c.overall_acc),
                    fmt_f64(c.worst_group_acc),
                    fmt_f64(c.conflict_fraction),
                    c.conflict_dominant.to_string(),
                ])?;
            }
            csv.flush()?;
        }
    }
    Ok(())
}

/// Write ablation cells to a file, one row per trained run.
pub fn emit_ablation(report: &AblationReport, format: ReportFormat, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        ReportFormat::Jsonl => {
            for cell in &report.cells {
                writeln!(w, "{}", to_jsonl_line(cell)?)?;
            }
        }
        ReportFormat::Csv => {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(["s", "seed_index", "overall_acc", "worst_group_acc", "all_finite"])?;
            for c in &report.cells {
                csv.write_record([
                    fmt_f64(c.s),
                    c.seed_index.to_string(),
                    fmt_f64(c.overall_acc),
                    fmt_f64(c.worst_group_acc),
                    c.all_finite.to_string(),
                ])?;
            }
            csv.flush()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sample_record() -> ExperimentRecord {
        ExperimentRecord {
            config: TrainConfig::default(),
            steps: vec![
                StepRecord {
                    step: 0,
                    epoch: 0,
                    loss_fusion: 1.3862943611198906,
                    loss_unimodal: vec![1.5, 0.25],
                    loss_total: 3.1362943611198906,
                    conflict: false,
                    mean_joint_uncertainty: Some(0.4217182936182371),
                },
                StepRecord {
                    step: 1,
                    epoch: 0,
                    loss_fusion: 1.2,
                    loss_unimodal: vec![1.25, 0.3333333333333333],
                    loss_total: 2.7833333333333332,
                    conflict: true,
                    mean_joint_uncertainty: None,
                },
            ],
            epochs: vec![EpochRecord {
                epoch: 0,
                overall_acc: 0.71875,
                per_modality_acc: vec![0.5, 0.46875],
                worst_group_acc: 0.625,
            }],
            wall_clock_secs: 1.25,
        }
    }

    #[test]
    fn fmt_f64_has_seventeen_significant_digits_and_round_trips() {
        let values = [
            0.1,
            -1.0 / 3.0,
            1.3862943611198906,
            f64::MIN_POSITIVE,
            123456789.123456789,
            0.0,
        ];
        for v in values {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
            let mantissa: String = s
                .trim_start_matches('-')
                .chars()
                .take_while(|&c| c != 'e')
                .filter(|c| c.is_ascii_digit())
                .collect();
            assert_eq!(mantissa.len(), 17, "{s}");
        }
    }

    #[test]
    fn jsonl_round_trip_is_exact_including_config() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("report.jsonl");
        let record = sample_record();
        emit_report(&record, ReportFormat::Jsonl, &path).unwrap();
        let back = read_report(&path, ReportFormat::Jsonl).unwrap();
        assert_eq!(back.config, record.config);
        assert_eq!(back.steps, record.steps);
        assert_eq!(back.epochs, record.epochs);
    }

    #[test]
    fn csv_round_trip_is_exact_for_steps_and_epochs() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("report.csv");
        let record = sample_record();
        emit_report(&record, ReportFormat::Csv, &path).unwrap();
        let back = read_report(&path, ReportFormat::Csv).unwrap();
        assert_eq!(back.steps, record.steps);
        assert_eq!(back.epochs, record.epochs);
    }

    #[test]
    fn empty_record_yields_header_only_csv() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        let record = ExperimentRecord {
            config: TrainConfig::default(),
            steps: vec![],
            epochs: vec![],
            wall_clock_secs: 0.0,
        };
        emit_report(&record, ReportFormat::Csv, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("kind,step,epoch"));
        let back = read_report(&path, ReportFormat::Csv).unwrap();
        assert!(back.steps.is_empty() && back.epochs.is_empty());
    }

    #[test]
    fn wall_clock_never_reaches_the_file() {
        let dir = tempdir().unwrap();
        let mut record = sample_record();
        let p1 = dir.path().join("a.jsonl");
        emit_report(&record, ReportFormat::Jsonl, &p1).unwrap();
        record.wall_clock_secs = 99.0;
        let p2 = dir.path().join("b.jsonl");
        emit_report(&record, ReportFormat::Jsonl, &p2).unwrap();
        assert_eq!(
            std::fs::read(&p1).unwrap(),
            std::fs::read(&p2).unwrap()
        );
    }
}
