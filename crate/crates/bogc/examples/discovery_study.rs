//! The discovery study: does the calibrated aggregator hold up in both the
//! conflict-dominant and the non-conflict-dominant regime?
//!
//! Uses fewer repeats than the acceptance suite so it finishes quickly;
//! bump `repeats` for tighter means.
//!
//! ```bash
//! cargo run --release -p bogc --example discovery_study
//! ```

use bogc::harness::{run_discovery, TrainConfig};

fn main() {
    let config = TrainConfig {
        batch_size: 8,
        epochs: 18,
        seed: 1,
        ..TrainConfig::default()
    };
    let repeats = 6;
    println!("running {repeats} repeats x 2 scenarios x 3 arms...\n");
    let report = run_discovery(&config, repeats).unwrap();
    println!("{}", report.render_table());

    for dominant in [true, false] {
        let label = if dominant { "conflict-dominant" } else { "non-conflict-dominant" };
        let (n_u, u) = report.partition_mean("uniform_sum", dominant);
        let (_, b) = report.partition_mean("bogc", dominant);
        if n_u == 0 {
            println!("{label}: no groups this small run; increase repeats");
            continue;
        }
        println!(
            "{label}: calibrated - uniform gap = {:+.4} over {n_u} groups",
            b - u
        );
    }
}
