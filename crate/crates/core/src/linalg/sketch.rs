use super::{gram_spectrum, Matrix, Rng, Spectrum, SpectrumSource};
use crate::error::{Error, Result};

/// Sketch size for a feature matrix with `rows` rows: `min(threshold, ⌊rows / divisor⌋)`,
/// at least 1.
pub fn sketch_dim(rows: usize, threshold: usize, divisor: usize) -> usize {
    threshold.min(rows / divisor.max(1)).max(1)
}

/// Approximate top spectrum of `F Fᵀ` from the Gaussian sketch `(ΩF)(ΩF)ᵀ`,
/// `Ω ∈ R^{r×d}` with i.i.d. `N(0, 1/r)` entries.
pub fn sketched_gram_spectrum(f: &Matrix, r: usize, rng: &mut Rng) -> Result<Spectrum> {
    let d = f.rows();
    if r == 0 || r > d {
        return Err(Error::SketchDimExceedsRows { sketch: r, rows: d });
    }
    let omega = rng.normal_matrix(r, d, 1.0 / (r as f64).sqrt());
    sketched_gram_spectrum_with(f, &omega)
}

/// Spectrum of `(ΩF)(ΩF)ᵀ` for a caller-supplied sketch `Ω` (`r × d`).
pub fn sketched_gram_spectrum_with(f: &Matrix, omega: &Matrix) -> Result<Spectrum> {
    if omega.cols() != f.rows() || omega.rows() == 0 || omega.rows() > f.rows() {
        return Err(Error::SketchDimExceedsRows {
            sketch: omega.rows(),
            rows: f.rows(),
        });
    }
    let y = omega.matmul(f)?;
    let exact = gram_spectrum(&y)?;
    Spectrum::new(
        exact.values().to_vec(),
        SpectrumSource::Sketched {
            sketch_dim: omega.rows(),
        },
    )
}
