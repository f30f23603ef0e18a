//! Build a Laplace posterior over one encoder's last layer and watch its
//! variance respond to the prior and to more data.
//!
//! ```bash
//! cargo run --release -p bogc --example laplace_posterior
//! ```

use bogc::model::{Batch, LossMode, NetDims, ToyMultiModalNet};
use bogc::numerics::SeededRng;
use bogc::posterior::{modality_posterior, PriorSpec};
use nalgebra::DMatrix;

fn main() {
    let mut rng = SeededRng::new(42, 0);
    let dims = NetDims {
        input_dims: vec![6, 4],
        hidden_width: 4,
        feature_dim: 3,
        num_classes: 3,
    };
    let net = ToyMultiModalNet::random(dims, LossMode::Classification, &mut rng).unwrap();

    let make_batch = |n: usize, rng: &mut SeededRng| {
        let inputs = net
            .dims
            .input_dims
            .iter()
            .map(|&d| {
                let vals: Vec<f64> = (0..n * d).map(|_| rng.standard_normal()).collect();
                DMatrix::from_row_slice(n, d, &vals)
            })
            .collect();
        let labels = (0..n).map(|t| t % 3).collect();
        Batch::new(inputs, labels).unwrap()
    };

    println!("posterior variance of Θ^0 (mean over its {} dims)\n", net.dims.theta_dim());
    println!("{:>12} {:>12} {:>14}", "batch size", "prior var", "mean post var");
    for &prior_variance in &[1.0, 0.25] {
        let prior = PriorSpec::new(prior_variance).unwrap();
        for &n in &[2usize, 8, 32] {
            let batch = make_batch(n, &mut rng.substream(n as u64));
            let post = modality_posterior(&net, &batch, 0, &prior).unwrap();
            let mean_var = post.covariance.diagonal().mean();
            println!("{n:>12} {prior_variance:>12.2} {mean_var:>14.6}");
        }
    }

    println!("\nMore data adds precision, so the posterior variance falls, and it");
    println!("never exceeds the prior variance. A couple of posterior draws:");
    let prior = PriorSpec::default();
    let batch = make_batch(8, &mut rng.substream(99));
    let post = modality_posterior(&net, &batch, 0, &prior).unwrap();
    for k in 0..2 {
        let draw = post.sample(&mut SeededRng::new(7, k));
        let head: Vec<String> = draw.iter().take(4).map(|v| format!("{v:+.3}")).collect();
        println!("  draw {k}: [{}, ...]", head.join(", "));
    }
}
