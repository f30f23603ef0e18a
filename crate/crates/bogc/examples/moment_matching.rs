//! Monte Carlo moment matching of a gradient distribution against the exact
//! linear-Gaussian law, showing the error shrink as draws increase.
//!
//! ```bash
//! cargo run --release -p bogc --example moment_matching
//! ```

use bogc::graddist::{fusion_dist, mc_moments};
use bogc::numerics::{SeededRng, SpdMatrix};
use bogc::posterior::GaussianPosterior;
use nalgebra::{DMatrix, DVector};

fn main() {
    // Posterior over a 3-dim parameter, gradient g(Θ) = A Θ + b.
    let mean = DVector::from_vec(vec![0.5, -0.3, 0.8]);
    let l = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.3, 0.9, 0.0, -0.2, 0.1, 0.7]);
    let cov = &l * l.transpose();
    let posterior =
        GaussianPosterior::new(mean.clone(), SpdMatrix::symmetrized(cov.clone())).unwrap();
    let a = DMatrix::from_row_slice(2, 3, &[0.7, -0.4, 0.2, 0.1, 0.5, -0.9]);
    let b = DVector::from_vec(vec![1.0, -2.0]);

    let exact_mean = &a * &mean + &b;
    let exact_cov = &a * &cov * a.transpose();
    println!("exact law: N(({:.3}, {:.3}), ...)\n", exact_mean[0], exact_mean[1]);

    println!("{:>8} {:>14} {:>14}", "draws", "mean rel err", "cov rel err");
    for &n in &[100usize, 1_000, 10_000, 100_000] {
        let mut rng = SeededRng::new(3, 0);
        let dist = mc_moments(&posterior, |t| &a * t + &b, n, &mut rng).unwrap();
        let me = (&dist.mean - &exact_mean).norm() / exact_mean.norm();
        let ce = (dist.covariance.matrix() - &exact_cov).norm() / exact_cov.norm();
        println!("{n:>8} {me:>14.5} {ce:>14.5}");
    }

    // The fusion distribution across two modalities is an exact average.
    let mut rng = SeededRng::new(5, 0);
    let d1 = mc_moments(&posterior, |t| &a * t + &b, 2_000, &mut rng).unwrap();
    let d2 = mc_moments(&posterior, |t| &a * t * 0.5, 2_000, &mut rng).unwrap();
    let fused = fusion_dist(&[d1.clone(), d2.clone()]).unwrap();
    println!(
        "\nfusion mean = average of modality means: ({:.4}, {:.4}) from ({:.4}, {:.4}) and ({:.4}, {:.4})",
        fused.mean[0], fused.mean[1], d1.mean[0], d1.mean[1], d2.mean[0], d2.mean[1]
    );
    println!(
        "per-dimension precisions come from the full inverse: λ = ({:.4}, {:.4})",
        fused.precision_diag[0], fused.precision_diag[1]
    );
}
