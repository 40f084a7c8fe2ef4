//! Binary container for trained models.
//!
//! Layout:
//!
//! ```text
//! magic     8 bytes  "AENGMDL\0"
//! hdr_len   u32 LE
//! header    hdr_len bytes of JSON:
//!           {"format_version": 1, "model_kind": "...", "params": {...},
//!            "matrices": [{"name": "...", "dtype": "f32"|"f64", "rows": r, "cols": c}, ...]}
//! payload   each matrix in header order, row-major, little-endian
//! ```
//!
//! Files with a different `format_version` are refused.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"AENGMDL\0";

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model format version {found} (expected {FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("expected a {expected} model, found {found}")]
    WrongKind { expected: String, found: String },
    #[error("model file is missing matrix {0:?}")]
    MissingMatrix(String),
    #[error("matrix {name:?} has shape {rows}x{cols}, expected {expected}")]
    ShapeMismatch {
        name: String,
        rows: usize,
        cols: usize,
        expected: String,
    },
    #[error("model file is truncated")]
    Truncated,
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatrixData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: MatrixData,
}

impl Matrix {
    pub fn f32(name: impl Into<String>, rows: usize, cols: usize, data: Vec<f32>) -> Self {
        assert_eq!(rows * cols, data.len());
        Self {
            name: name.into(),
            rows,
            cols,
            data: MatrixData::F32(data),
        }
    }

    pub fn f64(name: impl Into<String>, rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len());
        Self {
            name: name.into(),
            rows,
            cols,
            data: MatrixData::F64(data),
        }
    }

    fn check_shape(&self, rows: usize, cols: usize) -> Result<(), ModelIoError> {
        if self.rows == rows && self.cols == cols {
            Ok(())
        } else {
            Err(ModelIoError::ShapeMismatch {
                name: self.name.clone(),
                rows: self.rows,
                cols: self.cols,
                expected: format!("{rows}x{cols}"),
            })
        }
    }

    pub fn into_f32(self, rows: usize, cols: usize) -> Result<Vec<f32>, ModelIoError> {
        self.check_shape(rows, cols)?;
        match self.data {
            MatrixData::F32(v) => Ok(v),
            MatrixData::F64(_) => Err(ModelIoError::InvalidParams(format!(
                "matrix {:?} must be f32",
                self.name
            ))),
        }
    }

    pub fn into_f64(self, rows: usize, cols: usize) -> Result<Vec<f64>, ModelIoError> {
        self.check_shape(rows, cols)?;
        match self.data {
            MatrixData::F64(v) => Ok(v),
            MatrixData::F32(_) => Err(ModelIoError::InvalidParams(format!(
                "matrix {:?} must be f64",
                self.name
            ))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixHeader {
    name: String,
    dtype: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    model_kind: String,
    params: serde_json::Value,
    matrices: Vec<MatrixHeader>,
}

/// A decoded model file: kind tag, JSON parameters and named matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub kind: String,
    pub params: serde_json::Value,
    pub matrices: Vec<Matrix>,
}

impl ModelFile {
    pub fn new(kind: impl Into<String>, params: serde_json::Value) -> Self {
        Self {
            kind: kind.into(),
            params,
            matrices: Vec::new(),
        }
    }

    pub fn with_matrix(mut self, m: Matrix) -> Self {
        self.matrices.push(m);
        self
    }

    pub fn expect_kind(&self, kind: &str) -> Result<(), ModelIoError> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(ModelIoError::WrongKind {
                expected: kind.to_string(),
                found: self.kind.clone(),
            })
        }
    }

    pub fn take_matrix(&mut self, name: &str) -> Result<Matrix, ModelIoError> {
        let pos = self
            .matrices
            .iter()
            .position(|m| m.name == name)
            .ok_or_else(|| ModelIoError::MissingMatrix(name.to_string()))?;
        Ok(self.matrices.remove(pos))
    }

    pub fn params<T: serde::de::DeserializeOwned>(&self) -> Result<T, ModelIoError> {
        Ok(serde_json::from_value(self.params.clone())?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            format_version: FORMAT_VERSION,
            model_kind: self.kind.clone(),
            params: self.params.clone(),
            matrices: self
                .matrices
                .iter()
                .map(|m| MatrixHeader {
                    name: m.name.clone(),
                    dtype: match m.data {
                        MatrixData::F32(_) => "f32".into(),
                        MatrixData::F64(_) => "f64".into(),
                    },
                    rows: m.rows,
                    cols: m.cols,
                })
                .collect(),
        };
        let header = serde_json::to_vec(&header).expect("header serialization cannot fail");
        let mut out = Vec::with_capacity(header.len() + 12);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for m in &self.matrices {
            match &m.data {
                MatrixData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
                MatrixData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelIoError> {
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(ModelIoError::BadMagic);
        }
        let hdr_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let body = &bytes[12..];
        if body.len() < hdr_len {
            return Err(ModelIoError::Truncated);
        }
        // Peek at the version before the full parse so that future layouts
        // fail with a version error, not a schema error.
        let raw: serde_json::Value = serde_json::from_slice(&body[..hdr_len])?;
        let found = raw
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or(ModelIoError::BadMagic)? as u32;
        if found != FORMAT_VERSION {
            return Err(ModelIoError::UnsupportedVersion { found });
        }
        let header: Header = serde_json::from_value(raw)?;
        let mut payload = &body[hdr_len..];
        let mut matrices = Vec::with_capacity(header.matrices.len());
        for mh in header.matrices {
            let n = mh.rows * mh.cols;
            let data = match mh.dtype.as_str() {
                "f32" => {
                    let (chunk, rest) = split(payload, n * 4)?;
                    payload = rest;
                    MatrixData::F32(
                        chunk
                            .chunks_exact(4)
                            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                            .collect(),
                    )
                }
                "f64" => {
                    let (chunk, rest) = split(payload, n * 8)?;
                    payload = rest;
                    MatrixData::F64(
                        chunk
                            .chunks_exact(8)
                            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                            .collect(),
                    )
                }
                other => {
                    return Err(ModelIoError::InvalidParams(format!("unknown dtype {other:?}")))
                }
            };
            matrices.push(Matrix {
                name: mh.name,
                rows: mh.rows,
                cols: mh.cols,
                data,
            });
        }
        if !payload.is_empty() {
            return Err(ModelIoError::InvalidParams("trailing bytes after payload".into()));
        }
        Ok(Self {
            kind: header.model_kind,
            params: header.params,
            matrices,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelIoError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelIoError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn split(bytes: &[u8], n: usize) -> Result<(&[u8], &[u8]), ModelIoError> {
    if bytes.len() < n {
        Err(ModelIoError::Truncated)
    } else {
        Ok(bytes.split_at(n))
    }
}

/// Models that can be stored in a [`ModelFile`].
pub trait Persist: Sized {
    const KIND: &'static str;

    fn to_model_file(&self) -> ModelFile;

    fn from_model_file(file: ModelFile) -> Result<Self, ModelIoError>;

    fn to_bytes(&self) -> Vec<u8> {
        self.to_model_file().to_bytes()
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self, ModelIoError> {
        let file = ModelFile::from_bytes(bytes)?;
        file.expect_kind(Self::KIND)?;
        Self::from_model_file(file)
    }

    fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelIoError> {
        self.to_model_file().save(path)
    }

    fn load(path: impl AsRef<Path>) -> Result<Self, ModelIoError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
