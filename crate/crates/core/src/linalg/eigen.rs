//! Symmetric eigendecomposition by cyclic Jacobi rotations.

use serde::Serialize;

use super::Matrix;
use crate::error::{Error, Result};

/// Relative asymmetry `‖m − mᵀ‖_F / ‖m‖_F` tolerated by the eigensolver.
pub const ASYMMETRY_TOL: f64 = 1e-10;

/// Negative eigenvalues within this fraction of the largest magnitude are
/// roundoff and are clamped to zero.
pub const PSD_CLAMP_TOL: f64 = 1e-9;

const MAX_SWEEPS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumSource {
    Exact,
    Sketched { sketch_dim: usize },
}

/// Eigenvalues sorted nonincreasing.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
    source: SpectrumSource,
}

impl Spectrum {
    /// Sorts `values` nonincreasing and clamps roundoff-level negatives to 0.
    pub fn new(mut values: Vec<f64>, source: SpectrumSource) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("spectrum"));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let floor = -PSD_CLAMP_TOL * scale;
        for v in values.iter_mut() {
            if *v < 0.0 && *v >= floor {
                *v = 0.0;
            }
        }
        Ok(Spectrum { values, source })
    }

    pub fn exact(values: Vec<f64>) -> Result<Self> {
        Spectrum::new(values, SpectrumSource::Exact)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source(&self) -> SpectrumSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest eigenvalue, 0 for an empty spectrum.
    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Eigenvalues (nonincreasing) and matching unit eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymEigen {
    /// `V diag(f(λ)) Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.values.len();
        let v = &self.vectors;
        let fl: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let s: f64 = (0..n).map(|k| v.get(i, k) * fl[k] * v.get(j, k)).sum();
                out.set(i, j, s);
                out.set(j, i, s);
            }
        }
        out
    }
}

fn check_symmetric(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::NonSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    if !m.all_finite() {
        return Err(Error::NonFinite("eigensolver input"));
    }
    let norm = m.frobenius_norm();
    if norm > 0.0 {
        let asym = m.sub(&m.transpose())?.frobenius_norm() / norm;
        if asym > ASYMMETRY_TOL {
            return Err(Error::AsymmetryTooLarge { relative: asym });
        }
    }
    m.symmetrized()
}

/// Cyclic Jacobi on a symmetric matrix stored row-major in `a`.
/// Leaves the eigenvalues on the diagonal of `a`; accumulates rotations in `v`.
fn jacobi(a: &mut [f64], n: usize, mut v: Option<&mut [f64]>) {
    let total: f64 = a.iter().map(|x| x * x).sum();
    if total == 0.0 {
        return;
    }
    for sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() <= f64::EPSILON * 1e-3 * total.sqrt() || off == 0.0 {
            return;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let g = 100.0 * apq.abs();
                // Late sweeps: drop elements already below the diagonal's precision.
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                let h = aqq - app;
                let t = if h.abs() + g == h.abs() {
                    apq / h
                } else {
                    let theta = 0.5 * h / apq;
                    let t = 1.0 / (theta.abs() + (theta * theta + 1.0).sqrt());
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    let new_kp = c * akp - s * akq;
                    let new_kq = s * akp + c * akq;
                    a[k * n + p] = new_kp;
                    a[p * n + k] = new_kp;
                    a[k * n + q] = new_kq;
                    a[q * n + k] = new_kq;
                }
                if let Some(v) = v.as_deref_mut() {
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    log::warn!("jacobi eigensolver hit {MAX_SWEEPS} sweeps on a {n}x{n} matrix");
}

/// Eigenvalues of the symmetrized `(m + mᵀ)/2`, sorted nonincreasing.
pub fn sym_eig(m: &Matrix) -> Result<Spectrum> {
    let sym = check_symmetric(m)?;
    let n = sym.rows();
    let mut a = sym.into_data();
    jacobi(&mut a, n, None);
    Spectrum::exact((0..n).map(|i| a[i * n + i]).collect())
}

/// Full eigendecomposition; eigenvalues nonincreasing, no clamping.
pub fn sym_eigen(m: &Matrix) -> Result<SymEigen> {
    let sym = check_symmetric(m)?;
    let n = sym.rows();
    let mut a = sym.into_data();
    let mut v = Matrix::identity(n).into_data();
    jacobi(&mut a, n, Some(&mut v));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[r * n + order[c]]);
    Ok(SymEigen { values, vectors })
}

/// `F Fᵀ`, exactly symmetric.
pub fn gram(f: &Matrix) -> Result<Matrix> {
    let d = f.rows();
    let mut out = Matrix::zeros(d, d);
    for i in 0..d {
        let ri = f.row(i);
        for j in i..d {
            let v = super::dot(ri, f.row(j));
            out.set(i, j, v);
            out.set(j, i, v);
        }
    }
    if !out.all_finite() {
        return Err(Error::NonFinite("gram matrix"));
    }
    Ok(out)
}

/// Exact spectrum of `F Fᵀ` (length `d`). When `F` is wide-short the cheaper
/// `Fᵀ F` is diagonalized and the spectrum padded with zeros; the nonzero
/// eigenvalues of both products coincide.
pub fn gram_spectrum(f: &Matrix) -> Result<Spectrum> {
    let (d, n) = f.shape();
    if n < d {
        let small = gram(&f.transpose())?;
        let mut vals = sym_eig(&small)?.values().to_vec();
        vals.resize(d, 0.0);
        Spectrum::exact(vals)
    } else {
        sym_eig(&gram(f)?)
    }
}

/// Symmetric square root of a PSD matrix.
pub fn sqrt_psd(m: &Matrix) -> Result<Matrix> {
    let eig = sym_eigen(m)?;
    let top = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    if let Some(&min) = eig.values.last() {
        if min < -PSD_CLAMP_TOL * top {
            return Err(Error::NotPsd { min_eig: min });
        }
    }
    Ok(eig.reconstruct_with(|l| l.max(0.0).sqrt()))
}

/// Exact operator norm through the eigenvalues of the smaller Gram product.
pub fn op_norm(m: &Matrix) -> Result<f64> {
    if m.is_empty() {
        return Ok(0.0);
    }
    let g = if m.rows() <= m.cols() {
        gram(m)?
    } else {
        gram(&m.transpose())?
    };
    Ok(sym_eig(&g)?.max().max(0.0).sqrt())
}
