//! Synthetic data, the training loop, and the experiment suite.

pub mod report;
pub mod synthetic;
pub mod training;

mod experiments;

pub use experiments::{
    run_discovery, run_s_ablation, AblationCell, AblationReport, DiscoveryCell, DiscoveryReport,
    DiscoverySummaryRow, Scenario,
};
pub use report::{emit_report, read_report, ReportFormat};
pub use synthetic::{gen_synthetic, Dataset, Split, SyntheticSpec};
pub use training::{
    train, train_full, EpochRecord, ExperimentRecord, MassTraceRow, NetConfig, PosteriorSnapshot,
    StepRecord, TraceOptions, TrainConfig, TrainOutput,
};
