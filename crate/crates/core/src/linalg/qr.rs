use super::{dot, Matrix};
use crate::error::{Error, Result};

/// Pivot threshold relative to the original column norm.
pub const RANK_TOL: f64 = 1e-12;

/// Orthonormal basis of the column span, by modified Gram-Schmidt with one
/// reorthogonalization pass. Column `j` of the result spans the same flag as
/// the first `j + 1` input columns.
pub fn qr_orthonormalize(m: &Matrix) -> Result<Matrix> {
    let (d, r) = m.shape();
    if r > d {
        return Err(Error::ShapeMismatch(format!(
            "cannot orthonormalize {r} columns in dimension {d}"
        )));
    }
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(r);
    for j in 0..r {
        let mut v = m.column(j);
        let norm0 = dot(&v, &v).sqrt();
        for _ in 0..2 {
            for qi in &q {
                let c = dot(qi, &v);
                v.iter_mut().zip(qi).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm0 == 0.0 || norm <= RANK_TOL * norm0 {
            return Err(Error::RankDeficient { column: j });
        }
        v.iter_mut().for_each(|x| *x /= norm);
        q.push(v);
    }
    Matrix::from_columns(d, &q)
}

/// Extends an orthonormal `d × r` frame with `d − r` further orthonormal columns.
pub fn orthogonal_complement(frame: &Matrix) -> Result<Matrix> {
    let (d, r) = frame.shape();
    let mut basis: Vec<Vec<f64>> = (0..r).map(|j| frame.column(j)).collect();
    let mut extra = Vec::with_capacity(d - r);
    for e in 0..d {
        if basis.len() == d {
            break;
        }
        let mut v = vec![0.0; d];
        v[e] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &v);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = dot(&v, &v).sqrt();
        // Unit vectors leave at least 1/√d outside any proper subspace for some e.
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v.clone());
            extra.push(v);
        }
    }
    if extra.len() != d - r {
        return Err(Error::RankDeficient { column: r });
    }
    Matrix::from_columns(d, &extra)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;

    fn orth_error(q: &Matrix) -> f64 {
        q.transpose_matmul(q)
            .unwrap()
            .sub(&Matrix::identity(q.cols()))
            .unwrap()
            .frobenius_norm()
    }

    #[test]
    fn normalizes_single_column() {
        let q = qr_orthonormalize(&Matrix::from_rows(&[[1.0], [1.0]]).unwrap()).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((q.get(0, 0) - h).abs() < 1e-15 && (q.get(1, 0) - h).abs() < 1e-15);
    }

    #[test]
    fn orthonormal_input_is_fixed() {
        let m = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0], [0.0, 0.0]]).unwrap();
        let q = qr_orthonormalize(&m).unwrap();
        assert!(q.max_abs_diff(&m) < 1e-15);
    }

    #[test]
    fn random_gaussian() {
        let mut rng = Rng::new(4);
        for _ in 0..20 {
            let m = rng.normal_matrix(6, 3, 1.0);
            let q = qr_orthonormalize(&m).unwrap();
            assert!(orth_error(&q) <= 1e-10);
            // Same span: m = Q Qᵀ m.
            let proj = q.matmul(&q.transpose_matmul(&m).unwrap()).unwrap();
            assert!(proj.max_abs_diff(&m) < 1e-10);
        }
    }

    #[test]
    fn rank_deficient() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [1.0, 2.0]]).unwrap();
        assert!(matches!(
            qr_orthonormalize(&m),
            Err(Error::RankDeficient { column: 1 })
        ));
        assert!(qr_orthonormalize(&Matrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn complement_completes_basis() {
        let mut rng = Rng::new(5);
        let q = qr_orthonormalize(&rng.normal_matrix(5, 2, 1.0)).unwrap();
        let c = orthogonal_complement(&q).unwrap();
        assert_eq!(c.shape(), (5, 3));
        let full = q.hcat(&c).unwrap();
        assert!(orth_error(&full) < 1e-12);
    }
}
