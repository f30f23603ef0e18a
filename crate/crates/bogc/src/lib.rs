//! Uncertainty-aware gradient calibration for multi-modal training.
//!
//! Multi-modal training drives each encoder with two gradient sources: its
//! own unimodal loss and the shared fusion loss. This crate treats both as
//! random variables, estimates their distributions from a Laplace posterior
//! over each encoder's last layer, converts per-dimension precisions into
//! subjective-logic evidence, fuses the resulting belief/uncertainty masses
//! with a reduced Dempster combination rule, and emits a calibrated update
//! direction per modality. A toy multi-modal harness and reference
//! aggregators make the whole pipeline runnable and testable at desk scale.
//!
//! Module map:
//! - [`numerics`]: dense SPD algebra, jitter ladder, seeded Gaussian draws
//! - [`model`]: the toy network with exact manual gradients
//! - [`posterior`]: generalized Gauss-Newton Laplace posteriors
//! - [`graddist`]: Monte Carlo moment matching of gradient distributions
//! - [`evidence`]: precision → evidence → mass → Dempster → `g_DS`
//! - [`baselines`]: uniform sum, fixed blend, conflict projection
//! - [`harness`]: synthetic data, training loop, experiments, reports
//!
//! See the crate examples for one runnable entry point per capability, and
//! the `bogc` binary for the `gen-data` / `train` / `discovery` / `ablate-s`
//! subcommands.

pub mod baselines;
pub mod error;
pub mod evidence;
pub mod graddist;
pub mod harness;
pub mod model;
pub mod numerics;
pub mod posterior;

pub use error::{Error, Result};
