//! All four aggregators on identical data and initialization, compared on
//! final accuracy and worst-group accuracy.
//!
//! ```bash
//! cargo run --release -p bogc --example compare_aggregators
//! ```

use bogc::baselines::AggregatorKind;
use bogc::harness::{gen_synthetic, train, SyntheticSpec, TrainConfig};

fn main() {
    // A noisy-label regime, where calibration has room to help.
    let spec = SyntheticSpec {
        redundancy: 0.6,
        label_noise: 0.2,
        seed: 21,
        ..SyntheticSpec::default()
    };
    let data = gen_synthetic(&spec).unwrap();
    let base = TrainConfig {
        batch_size: 8,
        epochs: 14,
        seed: 4,
        ..TrainConfig::default()
    };

    println!(
        "{:<20} {:>10} {:>12} {:>10}",
        "aggregator", "test acc", "worst group", "conflict%"
    );
    for kind in [
        AggregatorKind::UniformSum,
        AggregatorKind::FixedBlend { w: 0.5 },
        AggregatorKind::ConflictProjection,
        AggregatorKind::Bogc,
    ] {
        let record = train(
            &TrainConfig {
                aggregator: kind,
                ..base.clone()
            },
            &data,
        )
        .unwrap();
        let last = record.epochs.last().unwrap();
        println!(
            "{:<20} {:>10.4} {:>12.4} {:>9.0}%",
            kind.name(),
            last.overall_acc,
            last.worst_group_acc,
            100.0 * record.conflict_fraction()
        );
    }
    println!("\nsame data, same seeds; only the Θ update rule differs.");
}
