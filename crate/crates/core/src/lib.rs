//! Unsupervised two-phase video parsing from motion-derived weak labels.
//!
//! Camera motion gives a coarse, noisy phase boundary; those boundaries label
//! every frame, the labels train an appearance classifier, its penultimate
//! activations feed a multi-stage temporal convolutional network, and a
//! partition-score detector places the final transition.
//!
//! Numeric cores are generic over [`Scalar`]; the aliases below fix the
//! precisions used by the pipeline.

pub mod dataio;
pub mod eval;
pub mod features;
pub mod flow;
pub mod frameclf;
pub mod motion;
pub mod nn;
pub mod scalar;
pub mod synth;
pub mod tcn;
pub mod transition;

pub use scalar::{Additive, Scalar};

/// Optical flow between consecutive frames (32-bit, `.flo` compatible).
pub use dataio::FlowField;
/// Two-class per-frame probabilities at 64-bit precision.
pub type PhaseProbabilitySeries = transition::PhaseProbs<f64>;
/// Per-frame appearance descriptor.
pub use features::FeatureVector;
/// Frame classifier with 32-bit parameters.
pub type MlpModel = frameclf::Mlp<f32>;
/// Multi-stage temporal network with 32-bit parameters.
pub type MsTcnModel = tcn::MsTcn<f32>;
