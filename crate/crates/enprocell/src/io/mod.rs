//! Readers and writers for expression matrices and label tables.

mod dense;
mod labels;
mod mtx;

pub use dense::{read_dense, write_dense};
pub use labels::{read_labels, summarize, write_labels, LabelOptions};
pub use mtx::{read_mtx_dir, read_sparse_mtx, write_mtx_dir};

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Which axis the rows of a dense file hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    CellsAsRows,
    GenesAsRows,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delimiter {
    Comma,
    Tab,
}

impl Delimiter {
    pub fn byte(self) -> u8 {
        match self {
            Delimiter::Comma => b',',
            Delimiter::Tab => b'\t',
        }
    }
}

/// Lowercase hex SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// Digest of a matrix input: the file itself, or for a MatrixMarket
/// directory the digests of its three members combined.
pub fn input_digest(path: &Path) -> Result<String> {
    if !path.is_dir() {
        return file_digest(path);
    }
    let files = mtx::member_files(path)?;
    let mut hasher = Sha256::new();
    for f in files {
        hasher.update(file_digest(&f)?.as_bytes());
    }
    Ok(format!("{:x}", hasher.finalize()))
}
