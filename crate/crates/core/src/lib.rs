//! Pointwise Riemannian Dimension generalization bounds for fully connected
//! ReLU networks.
//!
//! The crate computes feature Gram spectra from a trained network, turns them
//! into per-layer effective ranks and effective dimensions, and assembles the
//! Riemannian Dimension together with the one-shot and integral bounds and the
//! VC / spectral-norm baselines. Supporting modules cover subspace geometry
//! (ellipsoidal projection metric, graph charts, Grassmannian sampling), a
//! small deterministic SGD trainer, and the on-disk formats.

pub mod bounds;
pub mod error;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod network;
pub mod pipeline;
pub mod spectra;
pub mod trainer;

pub use error::{Error, Result};
pub use linalg::{Matrix, Rng, Spectrum, SpectrumSource};
