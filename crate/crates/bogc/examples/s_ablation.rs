//! Sensitivity of the calibrated pipeline to the evidence exponent `s`.
//!
//! The full seven-value sweep lives in the acceptance suite; this runs a
//! quicker slice to show the shape of the curve.
//!
//! ```bash
//! cargo run --release -p bogc --example s_ablation
//! ```

use bogc::harness::{run_s_ablation, TrainConfig};

fn main() {
    let config = TrainConfig {
        seed: 2,
        ..TrainConfig::default()
    };
    let s_values = [0.05, 0.3, 0.5, 0.9];
    let num_seeds = 3;
    println!("sweeping s over {s_values:?} with {num_seeds} seeds each...\n");
    let report = run_s_ablation(&config, &s_values, num_seeds).unwrap();
    println!("{}", report.render_table());
    println!("the exponent shapes how sharply precision differences translate");
    println!("into belief differences; accuracy moves only mildly with it.");
}
