//! RDMB: a little-endian container of named real64 matrices.
//!
//! ```text
//! "RDMB" | u32 version = 1 | u32 count
//! count × ( u32 name_len | name (UTF-8) | u64 rows | u64 cols | rows·cols × f64 )
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::network::{default_activations, FcnModel};

pub const BUNDLE_MAGIC: &[u8; 4] = b"RDMB";
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatrixBundle {
    entries: Vec<(String, Matrix)>,
}

impl MatrixBundle {
    pub fn new() -> Self {
        MatrixBundle::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, m: Matrix) -> Result<()> {
        let name = name.into();
        if self.get(&name).is_some() {
            return Err(Error::DuplicateName(name));
        }
        self.entries.push((name, m));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn entries(&self) -> &[(String, Matrix)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(BUNDLE_MAGIC);
        out.extend_from_slice(&BUNDLE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, m) in &self.entries {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
            for v in m.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Parses a complete bundle. Lengths are checked against the remaining
    /// input before anything is allocated.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        let magic = r.take(4, "magic")?;
        if magic != BUNDLE_MAGIC {
            return Err(Error::BadMagic {
                found: u32::from_be_bytes(magic.try_into().unwrap()),
            });
        }
        let version = r.u32("version")?;
        if version != BUNDLE_VERSION {
            return Err(Error::VersionUnsupported(version));
        }
        let count = r.u32("entry count")?;
        let mut bundle = MatrixBundle::new();
        for i in 0..count {
            let name_len = r.u32("name length")? as usize;
            let name = std::str::from_utf8(r.take(name_len, "name")?)
                .map_err(|_| Error::InvalidName)?
                .to_owned();
            let rows = r.u64("rows")?;
            let cols = r.u64("cols")?;
            let len = rows
                .checked_mul(cols)
                .and_then(|c| c.checked_mul(8))
                .filter(|&b| b <= r.remaining() as u64)
                .ok_or_else(|| {
                    Error::TruncatedFile(format!("entry {i} ({name}) declares {rows}x{cols} values"))
                })? as usize;
            let data = r
                .take(len, "matrix data")?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let m = Matrix::new(rows as usize, cols as usize, data)?;
            bundle.insert(name, m)?;
        }
        if r.remaining() != 0 {
            return Err(Error::TrailingBytes(r.remaining()));
        }
        Ok(bundle)
    }

    /// Stores a model as `W1..WL` plus a `1×(L+1)` `widths` row.
    pub fn from_model(model: &FcnModel) -> Self {
        let mut b = MatrixBundle::new();
        let widths: Vec<f64> = model.widths().iter().map(|&w| w as f64).collect();
        b.insert("widths", Matrix::from_raw(1, widths.len(), widths))
            .expect("fresh bundle");
        for (l, w) in model.weights().iter().enumerate() {
            b.insert(format!("W{}", l + 1), w.clone()).expect("unique names");
        }
        b
    }

    /// Inverse of [`MatrixBundle::from_model`]; hidden layers ReLU, output identity.
    pub fn to_model(&self) -> Result<FcnModel> {
        let widths = self
            .get("widths")
            .ok_or_else(|| Error::MissingEntry("widths".into()))?;
        if widths.rows() != 1 || widths.cols() < 2 {
            return Err(Error::ShapeMismatch(format!(
                "entry \"widths\" must be 1x(L+1), found {}x{}",
                widths.rows(),
                widths.cols()
            )));
        }
        let widths: Vec<usize> = widths
            .data()
            .iter()
            .map(|&v| {
                if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                    Ok(v as usize)
                } else {
                    Err(Error::ShapeMismatch(format!("entry \"widths\" holds non-integer {v}")))
                }
            })
            .collect::<Result<_>>()?;
        let depth = widths.len() - 1;
        let mut weights = Vec::with_capacity(depth);
        for l in 1..=depth {
            let name = format!("W{l}");
            let w = self.get(&name).ok_or_else(|| Error::MissingEntry(name.clone()))?;
            if w.shape() != (widths[l], widths[l - 1]) {
                return Err(Error::ShapeMismatch(format!(
                    "entry {name:?} is {}x{}, widths require {}x{}",
                    w.rows(),
                    w.cols(),
                    widths[l],
                    widths[l - 1]
                )));
            }
            weights.push(w.clone());
        }
        FcnModel::new(weights, default_activations(depth))
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::TruncatedFile(format!(
                "needed {n} bytes for {what} at offset {}, {} left",
                self.pos,
                self.remaining()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn write_bundle(path: impl AsRef<Path>, bundle: &MatrixBundle) -> Result<()> {
    fs::write(path, bundle.to_bytes())?;
    Ok(())
}

pub fn read_bundle(path: impl AsRef<Path>) -> Result<MatrixBundle> {
    MatrixBundle::from_bytes(&fs::read(path)?)
}
