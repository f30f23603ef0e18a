//! One full calibrated training run on the default synthetic data, with the
//! per-epoch metrics and conflict telemetry printed.
//!
//! ```bash
//! cargo run --release -p bogc --example train_bogc
//! ```

use bogc::harness::{gen_synthetic, train, SyntheticSpec, TrainConfig};

fn main() {
    let data = gen_synthetic(&SyntheticSpec::default()).unwrap();
    let config = TrainConfig {
        seed: 11,
        ..TrainConfig::default()
    };
    println!(
        "training {} epochs of {} steps, aggregator = {}, s = {}, γ = {}\n",
        config.epochs,
        data.train.len().div_ceil(config.batch_size),
        config.aggregator.name(),
        config.s,
        config.gamma
    );
    let record = train(&config, &data).unwrap();

    println!("{:>5} {:>10} {:>10} {:>12} {:>12}", "epoch", "loss", "test acc", "worst group", "uncertainty");
    for e in &record.epochs {
        let steps: Vec<_> = record.steps.iter().filter(|s| s.epoch == e.epoch).collect();
        let mean_loss = steps.iter().map(|s| s.loss_total).sum::<f64>() / steps.len() as f64;
        let mean_u = steps
            .iter()
            .filter_map(|s| s.mean_joint_uncertainty)
            .sum::<f64>()
            / steps.len() as f64;
        println!(
            "{:>5} {:>10.4} {:>10.4} {:>12.4} {:>12.4}",
            e.epoch, mean_loss, e.overall_acc, e.worst_group_acc, mean_u
        );
    }
    println!(
        "\nconflict flagged on {:.0}% of steps; wall clock {:.1}s",
        100.0 * record.conflict_fraction(),
        record.wall_clock_secs
    );
    println!(
        "per-modality head accuracy at the end: {:?}",
        record
            .epochs
            .last()
            .unwrap()
            .per_modality_acc
            .iter()
            .map(|a| format!("{a:.3}"))
            .collect::<Vec<_>>()
    );
}
