//! Dense real linear algebra: matrices, symmetric eigensolver, spectral norm,
//! Gram products, Gaussian sketching and deterministic randomness.

mod eigen;
mod matrix;
mod power;
mod qr;
mod rng;
mod sketch;

pub use eigen::{
    gram, gram_spectrum, op_norm, sqrt_psd, sym_eig, sym_eigen, Spectrum, SpectrumSource,
    SymEigen, ASYMMETRY_TOL, PSD_CLAMP_TOL,
};
pub use matrix::{dot, norm2, Matrix};
pub use power::spectral_norm;
pub use qr::{orthogonal_complement, qr_orthonormalize, RANK_TOL};
pub use rng::Rng;
pub use sketch::{sketch_dim, sketched_gram_spectrum, sketched_gram_spectrum_with};
