//! Subspace geometry on the Grassmannian and the finite-resolution subspace
//! isomorphism checker.

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::RADIUS_FLOOR;
use crate::error::{Error, Result};
use crate::linalg::{
    gram, op_norm, orthogonal_complement, qr_orthonormalize, sqrt_psd, sym_eig, sym_eigen, Matrix,
    Rng, Spectrum,
};
use crate::network::{frobenius_norm_all, FcnModel, LayerFeatureSet, LipschitzSurrogates};

const ORTHONORMAL_TOL: f64 = 1e-10;

/// Default covering constant `72²`.
pub const COVER_CONSTANT: f64 = 5184.0;

/// Hits below which a ball-mass estimate is flagged.
pub const MIN_RELIABLE_HITS: usize = 30;

const REDRAWS: usize = 8;

/// Parallel chunks for Monte Carlo; fixed so results do not depend on the
/// thread count.
const MC_CHUNKS: usize = 64;

/// Relative cutoff below which Gram eigenvalues never count as active.
pub const PINV_CUTOFF: f64 = 1e-12;

/// An `r`-dimensional subspace of `R^d`, held as an orthonormal frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace {
    frame: Matrix,
}

impl Subspace {
    pub fn from_frame(frame: Matrix) -> Result<Self> {
        if frame.cols() > frame.rows() {
            return Err(Error::DimensionMismatch(format!(
                "frame has {} columns in dimension {}",
                frame.cols(),
                frame.rows()
            )));
        }
        let dev = frame
            .transpose_matmul(&frame)?
            .max_abs_diff(&Matrix::identity(frame.cols()));
        if dev > ORTHONORMAL_TOL {
            return Err(Error::InvalidArgument(format!(
                "frame is not orthonormal (deviation {dev:.3e})"
            )));
        }
        Ok(Subspace { frame })
    }

    /// Span of arbitrary full-rank columns.
    pub fn span_of(columns: &Matrix) -> Result<Self> {
        Ok(Subspace {
            frame: qr_orthonormalize(columns)?,
        })
    }

    pub fn frame(&self) -> &Matrix {
        &self.frame
    }

    pub fn ambient(&self) -> usize {
        self.frame.rows()
    }

    pub fn dim(&self) -> usize {
        self.frame.cols()
    }

    /// `V Vᵀ`.
    pub fn projector(&self) -> Matrix {
        self.frame
            .matmul_transpose(&self.frame)
            .and_then(|p| p.symmetrized())
            .expect("frame times its own transpose is square")
    }
}

/// `‖Σ^{1/2}(P₁ − P₂)‖_op`.
pub fn ellipsoidal_proj_metric(v1: &Subspace, v2: &Subspace, sigma: &Matrix) -> Result<f64> {
    let d = v1.ambient();
    if v2.ambient() != d || sigma.shape() != (d, d) {
        return Err(Error::DimensionMismatch(format!(
            "subspaces in R^{} and R^{}, sigma {}x{}",
            d,
            v2.ambient(),
            sigma.rows(),
            sigma.cols()
        )));
    }
    let diff = v1.projector().sub(&v2.projector())?;
    let root = sqrt_psd(sigma)?;
    op_norm(&root.matmul(&diff)?)
}

/// Isotropic projection distance (`Σ = I`).
pub fn proj_distance(v1: &Subspace, v2: &Subspace) -> Result<f64> {
    if v1.ambient() != v2.ambient() {
        return Err(Error::DimensionMismatch(format!(
            "subspaces in R^{} and R^{}",
            v1.ambient(),
            v2.ambient()
        )));
    }
    op_norm(&v1.projector().sub(&v2.projector())?)
}

/// The plane spanned by `[V̄ V̄_⊥]·[I; X]`.
pub fn graph_chart(vbar: &Subspace, x: &Matrix) -> Result<Subspace> {
    let (d, r) = vbar.frame.shape();
    if r >= d || x.shape() != (d - r, r) {
        return Err(Error::DimensionMismatch(format!(
            "chart of a {r}-plane in R^{d} needs a {}x{r} matrix, got {}x{}",
            d.saturating_sub(r),
            x.rows(),
            x.cols()
        )));
    }
    let perp = orthogonal_complement(&vbar.frame)?;
    let cols = vbar.frame.add(&perp.matmul(x)?)?;
    Subspace::span_of(&cols)
}

/// `(ρ_proj(V(X), V̄), ‖X‖/√(1 + ‖X‖²))`.
pub fn sine_tangent_check(vbar: &Subspace, x: &Matrix) -> Result<(f64, f64)> {
    let chart = graph_chart(vbar, x)?;
    let rho = proj_distance(&chart, vbar)?;
    let t = op_norm(x)?;
    Ok((rho, t / (1.0 + t * t).sqrt()))
}

/// Uniform draw from `Gr(d, r)`: the span of a Gaussian `d × r` matrix.
pub fn sample_grassmannian(d: usize, r: usize, rng: &mut Rng) -> Result<Subspace> {
    if r == 0 || r > d {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= r <= d, got d = {d}, r = {r}"
        )));
    }
    let mut last = Error::RankDeficient { column: 0 };
    for _ in 0..REDRAWS {
        match Subspace::span_of(&rng.normal_matrix(d, r, 1.0)) {
            Ok(s) => return Ok(s),
            Err(e @ Error::RankDeficient { .. }) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BallMass {
    pub mass_hat: f64,
    /// `−ln(mass_hat)`; `None` when no sample hit the ball.
    pub log_inv_mass: Option<f64>,
    pub hits: usize,
    pub samples: usize,
    /// At least [`MIN_RELIABLE_HITS`] hits.
    pub reliable: bool,
}

/// Fraction of uniform Grassmannian draws within ellipsoidal distance `eps`
/// of `center`.
pub fn ball_mass_estimate(
    center: &Subspace,
    sigma: &Matrix,
    eps: f64,
    samples: usize,
    rng: &mut Rng,
) -> Result<BallMass> {
    let d = center.ambient();
    let r = center.dim();
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if sigma.shape() != (d, d) {
        return Err(Error::DimensionMismatch(format!(
            "sigma is {}x{}, subspace lives in R^{d}",
            sigma.rows(),
            sigma.cols()
        )));
    }
    let root = sqrt_psd(sigma)?;
    let p0 = center.projector();
    let children = rng.split_n(MC_CHUNKS);
    let hits = children
        .into_par_iter()
        .enumerate()
        .map(|(i, mut child)| -> Result<usize> {
            let quota = samples / MC_CHUNKS + usize::from(i < samples % MC_CHUNKS);
            let mut hits = 0;
            for _ in 0..quota {
                let v = sample_grassmannian(d, r, &mut child)?;
                let diff = p0.sub(&v.projector())?;
                if op_norm(&root.matmul(&diff)?)? <= eps {
                    hits += 1;
                }
            }
            Ok(hits)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    let mass_hat = hits as f64 / samples as f64;
    Ok(BallMass {
        mass_hat,
        log_inv_mass: (hits > 0).then(|| -mass_hat.ln()),
        hits,
        samples,
        reliable: hits >= MIN_RELIABLE_HITS,
    })
}

/// `((d−r)/2)·Σ_{k≤r} ln(C·max{λ_k,ε²}/ε²) + (r/2)·Σ_{k≤d−r} ln(C·max{λ_k,ε²}/ε²)`.
pub fn grassmannian_cover_rhs(d: usize, r: usize, spectrum: &Spectrum, eps: f64, c: f64) -> Result<f64> {
    if r > d {
        return Err(Error::InvalidArgument(format!("r = {r} exceeds d = {d}")));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidResolution(eps));
    }
    let needed = r.max(d - r);
    if spectrum.len() < needed {
        return Err(Error::SpectrumTooShort {
            len: spectrum.len(),
            needed,
        });
    }
    let e2 = eps * eps;
    let term = |k: usize| (c * spectrum.values()[k].max(e2) / e2).ln();
    let first: f64 = (0..r).map(term).sum();
    let second: f64 = (0..d - r).map(term).sum();
    Ok((d - r) as f64 / 2.0 * first + r as f64 / 2.0 * second)
}

/// Margins of `λ_k ≥ λ_k(P̄ΣP̄) ≥ λ_k/2 − ρ²` for `k ≤ r`, where `V` is the
/// top-`r` eigenspace of `Σ` and `ρ = ρ_proj,Σ(V, V̄)`. Both margins are
/// nonnegative when the sandwich holds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SandwichMargins {
    pub upper: f64,
    pub lower: f64,
}

pub fn eigenvalue_sandwich(sigma: &Matrix, v: &Subspace, vbar: &Subspace) -> Result<SandwichMargins> {
    let lam = sym_eig(sigma)?;
    let pbar = vbar.projector();
    let projected = sym_eig(&pbar.matmul(sigma)?.matmul(&pbar)?.symmetrized()?)?;
    let rho = ellipsoidal_proj_metric(v, vbar, sigma)?;
    let mut upper = f64::INFINITY;
    let mut lower = f64::INFINITY;
    for k in 0..v.dim() {
        let lk = lam.values()[k];
        let pk = projected.values()[k];
        upper = upper.min(lk - pk);
        lower = lower.min(pk - (lk / 2.0 - rho * rho));
    }
    Ok(SandwichMargins { upper, lower })
}

/// Top-`r` eigenspace of a symmetric matrix.
pub fn top_eigenspace(sigma: &Matrix, r: usize) -> Result<Subspace> {
    let eig = sym_eigen(sigma)?;
    Subspace::from_frame(eig.vectors.column_range(0, r))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IsoLayer {
    /// Feature layer `j` (0 is the input).
    pub layer: usize,
    pub theta: f64,
    pub kappa_hat: f64,
    pub b_sub_hat: f64,
    pub active_dim: usize,
    /// No eigenvalue of `Γ_j^S` reaches `theta`.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IsoCertificate {
    pub eps: f64,
    pub per_layer: Vec<IsoLayer>,
}

/// Estimates `(κ, b_sub)` for each feature layer feeding a weight matrix:
/// `κ̂` is the largest generalized Rayleigh quotient of `Γ^{S'}` against `Γ^S`
/// on the active eigenspace of `Γ^S` (eigenvalues `≥ ϑ_j`), and
/// `b̂ = ‖QΓ^{S'}Q‖_op/ϑ_j` on its complement.
pub fn iso_check(
    feats_s: &LayerFeatureSet,
    feats_sp: &LayerFeatureSet,
    model: &FcnModel,
    lip: &LipschitzSurrogates,
    eps: f64,
) -> Result<IsoCertificate> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidResolution(eps));
    }
    let depth = model.depth();
    if feats_s.features.len() != depth + 1 || feats_sp.features.len() != depth + 1 {
        return Err(Error::MismatchedLayers {
            spectra: feats_s.features.len().min(feats_sp.features.len()),
            layers: depth + 1,
        });
    }
    let n = feats_s.samples();
    if feats_sp.samples() != n {
        return Err(Error::DimensionMismatch(format!(
            "samples differ: {n} vs {}",
            feats_sp.samples()
        )));
    }
    let radius = frobenius_norm_all(model).max(RADIUS_FLOOR);
    let per_layer = (0..depth)
        .map(|j| {
            let fs = &feats_s.features[j];
            let fp = &feats_sp.features[j];
            if fs.rows() != fp.rows() {
                return Err(Error::DimensionMismatch(format!(
                    "layer {j} widths differ: {} vs {}",
                    fs.rows(),
                    fp.rows()
                )));
            }
            let theta = n as f64 * eps * eps
                / (2.0 * depth as f64 * lip.m_bar[j].powi(2) * radius * radius);
            iso_layer(j, theta, &gram(fs)?, &gram(fp)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IsoCertificate { eps, per_layer })
}

fn iso_layer(layer: usize, theta: f64, g: &Matrix, gp: &Matrix) -> Result<IsoLayer> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::NonFinite("resolution threshold"));
    }
    let d = g.rows();
    let eig = sym_eigen(g)?;
    let top = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let active: Vec<usize> = (0..d)
        .filter(|&k| eig.values[k] >= theta && eig.values[k] > PINV_CUTOFF * top)
        .collect();
    let a = active.len();
    let kappa_hat = if a == 0 {
        0.0
    } else {
        let u = eig.vectors.select_columns(&active);
        let inv_sqrt: Vec<f64> = active.iter().map(|&k| 1.0 / eig.values[k].sqrt()).collect();
        let m = u.transpose_matmul(&gp.matmul(&u)?)?;
        let whitened = Matrix::from_fn(a, a, |i, k| inv_sqrt[i] * m[(i, k)] * inv_sqrt[k]);
        sym_eig(&whitened.symmetrized()?)?.max().max(0.0)
    };
    let q = {
        let mut q = Matrix::identity(d);
        if a > 0 {
            let u = eig.vectors.select_columns(&active);
            q = q.sub(&u.matmul_transpose(&u)?)?;
        }
        q.symmetrized()?
    };
    let leak = sym_eig(&q.matmul(gp)?.matmul(&q)?.symmetrized()?)?.max().max(0.0);
    Ok(IsoLayer {
        layer,
        theta,
        kappa_hat,
        b_sub_hat: leak / theta,
        active_dim: a,
        degenerate: a == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(cols: &[&[f64]]) -> Subspace {
        let d = cols[0].len();
        let v: Vec<Vec<f64>> = cols.iter().map(|c| c.to_vec()).collect();
        Subspace::span_of(&Matrix::from_columns(d, &v).unwrap()).unwrap()
    }

    #[test]
    fn metric_examples() {
        let e1 = span(&[&[1.0, 0.0]]);
        let e2 = span(&[&[0.0, 1.0]]);
        let i2 = Matrix::identity(2);
        assert_eq!(ellipsoidal_proj_metric(&e1, &e1, &i2).unwrap(), 0.0);
        assert!((ellipsoidal_proj_metric(&e1, &e2, &i2).unwrap() - 1.0).abs() < 1e-12);
        let s = Matrix::from_diag(&[4.0, 0.0]);
        assert!((ellipsoidal_proj_metric(&e1, &e2, &s).unwrap() - 2.0).abs() < 1e-12);
        let bad = Matrix::from_diag(&[1.0, -1.0]);
        assert!(matches!(ellipsoidal_proj_metric(&e1, &e2, &bad), Err(Error::NotPsd { .. })));
        assert!(matches!(
            ellipsoidal_proj_metric(&e1, &e2, &Matrix::identity(3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn frame_checks() {
        assert!(Subspace::from_frame(Matrix::from_rows(&[[1.0], [1.0]]).unwrap()).is_err());
        assert!(Subspace::from_frame(Matrix::identity(2)).is_ok());
        let p = span(&[&[1.0, 1.0, 0.0]]).projector();
        assert!(p.matmul(&p).unwrap().max_abs_diff(&p) < 1e-12);
    }

    #[test]
    fn chart_examples() {
        let e1 = span(&[&[1.0, 0.0]]);
        let c = graph_chart(&e1, &Matrix::zeros(1, 1)).unwrap();
        assert!(proj_distance(&c, &e1).unwrap() < 1e-12);
        let c = graph_chart(&e1, &Matrix::from_rows(&[[1.0]]).unwrap()).unwrap();
        let expected = span(&[&[1.0, 1.0]]);
        assert!(proj_distance(&c, &expected).unwrap() < 1e-12);
        let (rho, pred) = sine_tangent_check(&e1, &Matrix::from_rows(&[[1.0]]).unwrap()).unwrap();
        assert!((rho - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((pred - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(graph_chart(&e1, &Matrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn random_chart_orthonormal() {
        let mut rng = Rng::new(5);
        let vbar = sample_grassmannian(3, 1, &mut rng).unwrap();
        let x = rng.normal_matrix(2, 1, 1.0);
        let f = graph_chart(&vbar, &x).unwrap();
        let dev = f.frame().transpose_matmul(f.frame()).unwrap().max_abs_diff(&Matrix::identity(1));
        assert!(dev < 1e-10);
        let vbar = sample_grassmannian(6, 2, &mut rng).unwrap();
        let x = rng.normal_matrix(4, 2, 1.0);
        let (rho, pred) = sine_tangent_check(&vbar, &x).unwrap();
        assert!((rho - pred).abs() < 1e-8);
    }

    #[test]
    fn full_space_and_distinct_draws() {
        let mut rng = Rng::new(1);
        let v = sample_grassmannian(3, 3, &mut rng).unwrap();
        assert!(v.projector().max_abs_diff(&Matrix::identity(3)) < 1e-12);
        let a = sample_grassmannian(4, 2, &mut Rng::new(1)).unwrap();
        let b = sample_grassmannian(4, 2, &mut Rng::new(2)).unwrap();
        assert!(proj_distance(&a, &b).unwrap() > 0.0);
        assert!(sample_grassmannian(2, 3, &mut rng).is_err());
        assert!(sample_grassmannian(2, 0, &mut rng).is_err());
    }

    #[test]
    fn ball_mass_extremes() {
        let mut rng = Rng::new(8);
        let c = sample_grassmannian(3, 1, &mut rng).unwrap();
        let sigma = Matrix::from_diag(&[2.0, 1.0, 0.5]);
        let all = ball_mass_estimate(&c, &sigma, 2.0 * 2f64.sqrt(), 200, &mut rng).unwrap();
        assert_eq!((all.mass_hat, all.log_inv_mass), (1.0, Some(0.0)));
        assert!(all.reliable);
        let none = ball_mass_estimate(&c, &sigma, 0.0, 200, &mut rng).unwrap();
        assert_eq!(none.hits, 0);
        assert_eq!(none.log_inv_mass, None);
        assert!(!none.reliable);
    }

    #[test]
    fn ball_mass_deterministic() {
        let c = sample_grassmannian(4, 2, &mut Rng::new(0)).unwrap();
        let i4 = Matrix::identity(4);
        let a = ball_mass_estimate(&c, &i4, 0.9, 1000, &mut Rng::new(3)).unwrap();
        let b = ball_mass_estimate(&c, &i4, 0.9, 1000, &mut Rng::new(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cover_rhs_examples() {
        let small = Spectrum::exact(vec![0.1, 0.1, 0.05, 0.0]).unwrap();
        let v = grassmannian_cover_rhs(4, 2, &small, 1.0, COVER_CONSTANT).unwrap();
        assert!((v - 4.0 * COVER_CONSTANT.ln()).abs() < 1e-12);
        let ones = Spectrum::exact(vec![1.0; 4]).unwrap();
        assert_eq!(grassmannian_cover_rhs(4, 0, &ones, 1.0, COVER_CONSTANT).unwrap(), 0.0);
        let v = grassmannian_cover_rhs(5, 2, &Spectrum::exact(vec![1.0; 5]).unwrap(), 1.0, COVER_CONSTANT).unwrap();
        assert!((v - 6.0 * COVER_CONSTANT.ln()).abs() < 1e-12);
        assert!(matches!(
            grassmannian_cover_rhs(7, 2, &ones, 1.0, COVER_CONSTANT),
            Err(Error::SpectrumTooShort { len: 4, needed: 5 })
        ));
    }

    #[test]
    fn theta_arithmetic() {
        // n = 100, ε = 0.1, L = 2, m̄ = 1, R_W = 1.
        let theta = 100.0 * 0.01 / (2.0 * 2.0 * 1.0 * 1.0);
        assert_eq!(theta, 0.25);
        let g = Matrix::from_diag(&[1.0, 0.1]);
        let l = iso_layer(0, theta, &g, &g).unwrap();
        assert_eq!(l.active_dim, 1);
        assert!((l.kappa_hat - 1.0).abs() < 1e-12);
        assert!((l.b_sub_hat - 0.4).abs() < 1e-12);
        let gp = g.scale(4.0);
        let l2 = iso_layer(0, theta, &g, &gp).unwrap();
        assert!((l2.kappa_hat - 4.0).abs() < 1e-12);
        assert!((l2.b_sub_hat - 4.0 * l.b_sub_hat).abs() < 1e-12);
        let empty = iso_layer(0, 10.0, &g, &g).unwrap();
        assert!(empty.degenerate && empty.kappa_hat == 0.0);
    }
}
