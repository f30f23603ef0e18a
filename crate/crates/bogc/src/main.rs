//! Command-line front end: data generation, training, and the experiment
//! suite. All logic lives in the library; this binary parses flags, resolves
//! the config, and writes files.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use bogc::baselines::AggregatorKind;
use bogc::error::Result;
use bogc::harness::report::{emit_ablation, emit_discovery, emit_mass_trace, emit_posteriors};
use bogc::harness::{
    emit_report, gen_synthetic, run_discovery, run_s_ablation, train_full, Dataset, NetConfig,
    ReportFormat, SyntheticSpec, TraceOptions, TrainConfig,
};

#[derive(Parser)]
#[command(name = "bogc", about = "Uncertainty-calibrated gradient aggregation for multi-modal training", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-modal dataset as JSON.
    GenData(GenDataArgs),
    /// Train one run and write its step/epoch report.
    Train(TrainArgs),
    /// Run the conflict/non-conflict discovery study over all arms.
    Discovery(DiscoveryArgs),
    /// Sweep the evidence exponent s over seeded runs.
    AblateS(AblateArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// Synthetic spec JSON; defaults to the built-in spec.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Override the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output dataset path.
    #[arg(long)]
    out: PathBuf,
}

/// Training flags shared by train/discovery/ablate-s; unset flags fall back
/// to the config file, then to the defaults.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// JSON config mirroring the training-config field names.
    #[arg(long)]
    config: Option<PathBuf>,
    /// uniform_sum | fixed_blend[:w] | conflict_projection | bogc
    #[arg(long)]
    aggregator: Option<AggregatorKind>,
    /// Evidence exponent in [0.01, 0.9].
    #[arg(long)]
    s: Option<f64>,
    /// Scale on the calibrated aggregate.
    #[arg(long)]
    gamma: Option<f64>,
    /// Weight of the unimodal losses.
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    prior_variance: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<TrainConfig> {
        let mut config = match &self.config {
            Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
            None => TrainConfig::default(),
        };
        if let Some(v) = self.aggregator {
            config.aggregator = v;
        }
        if let Some(v) = self.s {
            config.s = v;
        }
        if let Some(v) = self.gamma {
            config.gamma = v;
        }
        if let Some(v) = self.phi {
            config.phi = v;
        }
        if let Some(v) = self.lr {
            config.lr = v;
        }
        if let Some(v) = self.momentum {
            config.momentum = v;
        }
        if let Some(v) = self.mc_samples {
            config.mc_samples = v;
        }
        if let Some(v) = self.epochs {
            config.epochs = v;
        }
        if let Some(v) = self.batch_size {
            config.batch_size = v;
        }
        if let Some(v) = self.prior_variance {
            config.prior_variance = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Dataset JSON from gen-data; generated from the default spec if unset.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Report output path.
    #[arg(long)]
    out: PathBuf,
    /// csv or jsonl.
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
    /// Write a per-dimension mass trace (JSONL) for batch item 0.
    #[arg(long)]
    trace_masses: Option<PathBuf>,
    /// Write final per-modality posterior snapshots as JSON.
    #[arg(long)]
    dump_posterior: Option<PathBuf>,
}

#[derive(Args)]
struct DiscoveryArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Seeded repeats; each runs both scenarios across all arms.
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// Per-run cell table output path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Comma-separated exponent values.
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.05, 0.1, 0.3, 0.5, 0.7, 0.9])]
    s_values: Vec<f64>,
    /// Seeds per exponent value.
    #[arg(long, default_value_t = 5)]
    num_seeds: usize,
    /// Per-run cell table output path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
}

fn load_or_generate(data: &Option<PathBuf>) -> Result<Dataset> {
    match data {
        Some(path) => Dataset::from_json(&std::fs::read_to_string(path)?),
        None => gen_synthetic(&SyntheticSpec::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(args) => {
            let mut spec = match &args.spec {
                Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
                None => SyntheticSpec::default(),
            };
            if let Some(seed) = args.seed {
                spec.seed = seed;
            }
            let data = gen_synthetic(&spec)?;
            std::fs::write(&args.out, data.to_json()?)?;
            println!(
                "wrote {} ({} train / {} test samples)",
                args.out.display(),
                data.train.len(),
                data.test.len()
            );
            println!(
                "probe accuracy: joint {:.3}, per-modality {:?}",
                data.probe.joint_test_acc,
                data.probe
                    .unimodal_test_acc
                    .iter()
                    .map(|a| format!("{a:.3}"))
                    .collect::<Vec<_>>()
            );
        }
        Command::Train(args) => {
            let config = args.config.resolve()?;
            let data = load_or_generate(&args.data)?;
            let trace = TraceOptions {
                collect_mass_trace: args.trace_masses.is_some(),
                collect_final_posteriors: args.dump_posterior.is_some(),
            };
            let out = train_full(&config, &NetConfig::default(), &data, trace)?;
            emit_report(&out.record, args.format, &args.out)?;
            if let Some(path) = &args.trace_masses {
                emit_mass_trace(&out.mass_trace, path)?;
            }
            if let Some(path) = &args.dump_posterior {
                emit_posteriors(&out.final_posteriors, path)?;
            }
            let last = out
                .record
                .epochs
                .last()
                .expect("at least one epoch");
            println!(
                "trained {} epochs ({} steps) with {} in {:.1}s",
                out.record.epochs.len(),
                out.record.steps.len(),
                config.aggregator.name(),
                out.record.wall_clock_secs
            );
            println!(
                "final test accuracy {:.4}, worst-group {:.4}, conflict fraction {:.2}",
                last.overall_acc,
                last.worst_group_acc,
                out.record.conflict_fraction()
            );
            println!("report written to {}", args.out.display());
        }
        Command::Discovery(args) => {
            let config = args.config.resolve()?;
            let report = run_discovery(&config, args.repeats)?;
            emit_discovery(&report, args.format, &args.out)?;
            println!("{}", report.render_table());
            println!("cells written to {}", args.out.display());
        }
        Command::AblateS(args) => {
            let config = args.config.resolve()?;
            let report = run_s_ablation(&config, &args.s_values, args.num_seeds)?;
            emit_ablation(&report, args.format, &args.out)?;
            println!("{}", report.render_table());
            println!("cells written to {}", args.out.display());
        }
    }
    Ok(())
}

fn main() {
    if let Err(err) = run(Cli::parse()) {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}
