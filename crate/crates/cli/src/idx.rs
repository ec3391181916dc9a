//! IDX tensor files (the MNIST container format): `00 00 08 <ndims>`
//! followed by big-endian u32 dimensions and the raw unsigned-byte payload.

use std::fs;
use std::path::{Path, PathBuf};

use fedowen_core::sim::{DataError, Dataset};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IdxError {
    #[error("{path}: bad magic bytes {found:02x?}, expected [00, 00]")]
    BadMagic { path: PathBuf, found: [u8; 2] },
    #[error("{path}: unsupported element type {found:#04x}, only unsigned byte (0x08)")]
    UnsupportedType { path: PathBuf, found: u8 },
    #[error("{path}: header truncated at {len} bytes")]
    HeaderTruncated { path: PathBuf, len: usize },
    #[error("{path}: truncated payload: expected {expected} bytes, found {actual}")]
    Truncated { path: PathBuf, expected: usize, actual: usize },
    #[error("{path}: expected a {expected}-dimensional tensor, found {found} dimensions")]
    WrongRank { path: PathBuf, expected: usize, found: usize },
    #[error("images/labels pair mismatch: {images} images vs {labels} labels")]
    PairMismatch { images: usize, labels: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("loaded dataset rejected: {0}")]
    Dataset(#[from] DataError),
}

/// An unsigned-byte tensor with explicit dimensions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxTensor {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

impl IdxTensor {
    pub fn new(dims: Vec<usize>, data: Vec<u8>) -> Self {
        assert_eq!(dims.iter().product::<usize>(), data.len(), "dims/payload mismatch");
        Self { dims, data }
    }
}

const TYPE_UNSIGNED_BYTE: u8 = 0x08;

pub fn read_idx(path: &Path) -> Result<IdxTensor, IdxError> {
    let bytes = fs::read(path).map_err(|source| IdxError::Io { path: path.into(), source })?;
    if bytes.len() < 4 {
        return Err(IdxError::HeaderTruncated { path: path.into(), len: bytes.len() });
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(IdxError::BadMagic { path: path.into(), found: [bytes[0], bytes[1]] });
    }
    if bytes[2] != TYPE_UNSIGNED_BYTE {
        return Err(IdxError::UnsupportedType { path: path.into(), found: bytes[2] });
    }
    let ndims = bytes[3] as usize;
    let header_len = 4 + 4 * ndims;
    if bytes.len() < header_len {
        return Err(IdxError::HeaderTruncated { path: path.into(), len: bytes.len() });
    }
    let dims: Vec<usize> = (0..ndims)
        .map(|d| {
            let at = 4 + 4 * d;
            u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]) as usize
        })
        .collect();
    let expected: usize = dims.iter().product();
    let actual = bytes.len() - header_len;
    if actual != expected {
        return Err(IdxError::Truncated { path: path.into(), expected, actual });
    }
    Ok(IdxTensor { dims, data: bytes[header_len..].to_vec() })
}

pub fn write_idx(path: &Path, tensor: &IdxTensor) -> Result<(), IdxError> {
    let mut bytes = Vec::with_capacity(4 + 4 * tensor.dims.len() + tensor.data.len());
    bytes.extend_from_slice(&[0, 0, TYPE_UNSIGNED_BYTE, tensor.dims.len() as u8]);
    for &dim in &tensor.dims {
        bytes.extend_from_slice(&(dim as u32).to_be_bytes());
    }
    bytes.extend_from_slice(&tensor.data);
    fs::write(path, bytes).map_err(|source| IdxError::Io { path: path.into(), source })
}

/// Loads an images/labels IDX pair into a dataset: 3-D images flattened to
/// rows scaled into [0, 1], 1-D labels, class count from the label range.
pub fn load_idx_dataset(images_path: &Path, labels_path: &Path) -> Result<Dataset, IdxError> {
    let images = read_idx(images_path)?;
    if images.dims.len() != 3 {
        return Err(IdxError::WrongRank {
            path: images_path.into(),
            expected: 3,
            found: images.dims.len(),
        });
    }
    let labels = read_idx(labels_path)?;
    if labels.dims.len() != 1 {
        return Err(IdxError::WrongRank {
            path: labels_path.into(),
            expected: 1,
            found: labels.dims.len(),
        });
    }
    if images.dims[0] != labels.dims[0] {
        return Err(IdxError::PairMismatch { images: images.dims[0], labels: labels.dims[0] });
    }
    let dim = images.dims[1] * images.dims[2];
    let features: Vec<f64> = images.data.iter().map(|&b| f64::from(b) / 255.0).collect();
    let label_ids: Vec<usize> = labels.data.iter().map(|&b| b as usize).collect();
    let classes = label_ids.iter().copied().max().map_or(0, |m| m + 1);
    Ok(Dataset::new(features, dim, label_ids, classes)?)
}
