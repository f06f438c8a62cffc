//! IDX files as distributed with MNIST: a big-endian magic `0x0000_08_ND`
//! (unsigned bytes, `ND` dimensions), `ND` big-endian u32 sizes, then the
//! payload.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::trainer::LabeledDataset;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

const U8_TYPE: u8 = 0x08;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxTensor {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

impl IdxTensor {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::TruncatedFile("IDX header".into()));
        }
        let magic = u32::from_be_bytes(bytes[..4].try_into().unwrap());
        let ndims = bytes[3] as usize;
        if bytes[0] != 0 || bytes[1] != 0 || bytes[2] != U8_TYPE || ndims == 0 {
            return Err(Error::BadMagic { found: magic });
        }
        let header = 4 + 4 * ndims;
        if bytes.len() < header {
            return Err(Error::TruncatedFile(format!("IDX header declares {ndims} dimensions")));
        }
        let dims: Vec<usize> = bytes[4..header]
            .chunks_exact(4)
            .map(|c| u32::from_be_bytes(c.try_into().unwrap()) as usize)
            .collect();
        let payload = &bytes[header..];
        // Item size is checked on its own so a zero leading dimension cannot hide an overflow.
        let expected = dims[1..]
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|item| item.checked_mul(dims[0]))
            .ok_or_else(|| Error::TruncatedFile("IDX dimensions overflow".into()))?;
        if payload.len() < expected {
            return Err(Error::TruncatedFile(format!(
                "IDX payload has {} bytes, dimensions require {expected}",
                payload.len()
            )));
        }
        if payload.len() > expected {
            return Err(Error::TrailingBytes(payload.len() - expected));
        }
        Ok(IdxTensor {
            dims,
            data: payload.to_vec(),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0, 0, U8_TYPE, self.dims.len() as u8];
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_be_bytes());
        }
        out.extend_from_slice(&self.data);
        out
    }

    /// One column per item (first dimension), the remaining dimensions
    /// flattened row-major: 28×28 images become 784-row columns. Values are
    /// scaled to `[0, 1]` when `normalize` is set.
    pub fn to_columns(&self, normalize: bool) -> Matrix {
        let n = self.dims[0];
        let d: usize = self.dims[1..].iter().product();
        let scale = if normalize { 1.0 / 255.0 } else { 1.0 };
        Matrix::from_fn(d, n, |i, j| self.data[j * d + i] as f64 * scale)
    }

    pub fn labels(&self) -> Result<Vec<usize>> {
        if self.dims.len() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "label file has {} dimensions",
                self.dims.len()
            )));
        }
        Ok(self.data.iter().map(|&b| b as usize).collect())
    }
}

pub fn read_idx(path: impl AsRef<Path>) -> Result<IdxTensor> {
    IdxTensor::from_bytes(&fs::read(path)?)
}

/// Images (normalized to `[0, 1]`) and labels; `num_classes` is the largest
/// label plus one, at least 2.
pub fn read_idx_dataset(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<LabeledDataset> {
    let img = read_idx(images)?;
    if img.dims.len() < 2 {
        return Err(Error::ShapeMismatch("image file needs at least two dimensions".into()));
    }
    let y = read_idx(labels)?.labels()?;
    if y.len() != img.dims[0] {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} images",
            y.len(),
            img.dims[0]
        )));
    }
    let classes = y.iter().copied().max().map_or(2, |m| (m + 1).max(2));
    LabeledDataset::new(img.to_columns(true), y, classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_leading_dim_with_huge_items() {
        let mut b = vec![0, 0, 8, 3];
        for d in [0u32, u32::MAX, u32::MAX] {
            b.extend_from_slice(&d.to_be_bytes());
        }
        if usize::BITS == 64 {
            // 2^64 - 2^33 + 1 still fits, so only the empty payload matters.
            let t = IdxTensor::from_bytes(&b).unwrap();
            assert_eq!(t.to_columns(false).cols(), 0);
        }
        b[3] = 4;
        b.extend_from_slice(&u32::MAX.to_be_bytes());
        assert!(matches!(IdxTensor::from_bytes(&b), Err(Error::TruncatedFile(_))));
    }

    fn images_fixture() -> Vec<u8> {
        let mut b = vec![0, 0, 8, 3];
        for d in [2u32, 2, 2] {
            b.extend_from_slice(&d.to_be_bytes());
        }
        b.extend_from_slice(&[0, 255, 51, 102, 1, 2, 3, 4]);
        b
    }

    #[test]
    fn parses_images() {
        let t = IdxTensor::from_bytes(&images_fixture()).unwrap();
        assert_eq!(t.dims, vec![2, 2, 2]);
        assert_eq!(t.data.len(), 8);
        let m = t.to_columns(true);
        assert_eq!(m.shape(), (4, 2));
        assert_eq!(m.column(0), vec![0.0, 1.0, 0.2, 0.4]);
        assert_eq!(t.to_columns(false).column(1), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(t.to_bytes(), images_fixture());
    }

    #[test]
    fn parses_labels() {
        let mut b = IDX_LABELS_MAGIC.to_be_bytes().to_vec();
        b.extend_from_slice(&3u32.to_be_bytes());
        b.extend_from_slice(&[7, 0, 9]);
        let t = IdxTensor::from_bytes(&b).unwrap();
        assert_eq!(t.dims, vec![3]);
        assert_eq!(t.labels().unwrap(), vec![7, 0, 9]);
    }

    #[test]
    fn rejects_bad_files() {
        let mut bad = images_fixture();
        bad[2] = 0x0D; // float payloads are not supported
        assert!(matches!(IdxTensor::from_bytes(&bad), Err(Error::BadMagic { .. })));
        assert!(matches!(IdxTensor::from_bytes(&[0, 0, 8, 0]), Err(Error::BadMagic { .. })));
        assert!(matches!(IdxTensor::from_bytes(&[0, 0]), Err(Error::TruncatedFile(_))));
        let good = images_fixture();
        assert!(matches!(IdxTensor::from_bytes(&good[..good.len() - 1]), Err(Error::TruncatedFile(_))));
        assert!(matches!(IdxTensor::from_bytes(&good[..10]), Err(Error::TruncatedFile(_))));
        let mut huge = vec![0, 0, 8, 4];
        for _ in 0..4 {
            huge.extend_from_slice(&u32::MAX.to_be_bytes());
        }
        assert!(IdxTensor::from_bytes(&huge).is_err());
    }
}
