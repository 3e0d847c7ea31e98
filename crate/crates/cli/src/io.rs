//! Bit-exact file formats: matrices, concept dictionaries, realization
//! sets, and model checkpoints.
//!
//! Matrix files (`.mat`) carry a 28-byte header — magic `SSAEMAT1`,
//! a u32 dtype code (1 = f32, 2 = f64), u64 row and column counts — and a
//! little-endian column-major payload. Checkpoints (`.ckpt`) carry magic
//! `SSAECKP1`, a u64 metadata length, a JSON metadata block, and the
//! tensors W2, Yc, and optionally W1 as embedded matrix blocks in that
//! order. Loaders reject every malformed input instead of repairing it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use ssae_core::design::{ConceptDictionary, RealizationSet, SparseDesign};
use ssae_core::model::{Activation, SsaeModel};
use ssae_core::numerics::Matrix;

pub const MATRIX_MAGIC: [u8; 8] = *b"SSAEMAT1";
pub const CHECKPOINT_MAGIC: [u8; 8] = *b"SSAECKP1";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const ROW_LAYOUT_TAG: &str = "k*d+j";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: bad magic, not a {expected} file")]
    BadMagic { path: PathBuf, expected: &'static str },
    #[error("{path}: unknown dtype code {code}")]
    UnknownDtype { path: PathBuf, code: u32 },
    #[error("{path}: truncated: needed {expected} more bytes, found {found}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("{path}: {extra} trailing bytes after payload")]
    TrailingBytes { path: PathBuf, extra: usize },
    #[error("{path}: non-finite value at payload index {index}")]
    NonFinite { path: PathBuf, index: usize },
    #[error("{path}: value at payload index {index} exceeds 32-bit float range")]
    F32Overflow { path: PathBuf, index: usize },
    #[error("{path}: dimensions overflow the payload size")]
    OversizedHeader { path: PathBuf },
    #[error("{path}: malformed JSON: {source}")]
    MalformedJson {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path} line {line}: malformed record: {source}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("{path} line {line}: unknown concept '{name}'")]
    UnknownConcept {
        path: PathBuf,
        line: usize,
        name: String,
    },
    #[error("{path}: unsupported checkpoint version {found} (this build reads {expected})")]
    VersionMismatch {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("{path}: checkpoint metadata inconsistent: {reason}")]
    MetadataMismatch { path: PathBuf, reason: String },
    #[error(transparent)]
    Core(#[from] ssae_core::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn code(self) -> u32 {
        match self {
            Dtype::F32 => 1,
            Dtype::F64 => 2,
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            1 => Some(Dtype::F32),
            2 => Some(Dtype::F64),
            _ => None,
        }
    }
}

/// Serializes a matrix to the on-disk block format.
pub fn matrix_to_bytes(m: &Matrix, dtype: Dtype, path: &Path) -> Result<Vec<u8>, IoError> {
    let mut out = Vec::with_capacity(28 + m.data().len() * dtype.size());
    out.extend_from_slice(&MATRIX_MAGIC);
    out.extend_from_slice(&dtype.code().to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    match dtype {
        Dtype::F64 => {
            for v in m.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Dtype::F32 => {
            for (index, v) in m.data().iter().enumerate() {
                let narrow = *v as f32;
                if !narrow.is_finite() {
                    return Err(IoError::F32Overflow {
                        path: path.to_path_buf(),
                        index,
                    });
                }
                out.extend_from_slice(&narrow.to_le_bytes());
            }
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IoError> {
        let remaining = self.buf.len() - self.pos;
        if remaining < n {
            return Err(IoError::Truncated {
                path: self.path.to_path_buf(),
                expected: n,
                found: remaining,
            });
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn take_u32(&mut self) -> Result<u32, IoError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn take_u64(&mut self) -> Result<u64, IoError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn expect_eof(&self) -> Result<(), IoError> {
        if self.pos != self.buf.len() {
            return Err(IoError::TrailingBytes {
                path: self.path.to_path_buf(),
                extra: self.buf.len() - self.pos,
            });
        }
        Ok(())
    }
}

/// Parses one matrix block; 32-bit payloads are widened to f64 in memory
/// and every entry must be finite.
fn parse_matrix(cur: &mut Cursor) -> Result<Matrix, IoError> {
    let magic = cur.take(8)?;
    if magic != MATRIX_MAGIC {
        return Err(IoError::BadMagic {
            path: cur.path.to_path_buf(),
            expected: "SSAEMAT1",
        });
    }
    let code = cur.take_u32()?;
    let dtype = Dtype::from_code(code).ok_or(IoError::UnknownDtype {
        path: cur.path.to_path_buf(),
        code,
    })?;
    let rows = cur.take_u64()? as usize;
    let cols = cur.take_u64()? as usize;
    let count = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(dtype.size()))
        .ok_or(IoError::OversizedHeader {
            path: cur.path.to_path_buf(),
        })?;
    let payload = cur.take(count)?;
    let data: Vec<f64> = match dtype {
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
    };
    if let Some(index) = data.iter().position(|v| !v.is_finite()) {
        return Err(IoError::NonFinite {
            path: cur.path.to_path_buf(),
            index,
        });
    }
    Ok(Matrix::from_vec(rows, cols, data)?)
}

pub fn write_matrix(path: &Path, m: &Matrix, dtype: Dtype) -> Result<(), IoError> {
    let bytes = matrix_to_bytes(m, dtype, path)?;
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn read_matrix(path: &Path) -> Result<Matrix, IoError> {
    let buf = fs::read(path).map_err(io_err(path))?;
    let mut cur = Cursor {
        buf: &buf,
        pos: 0,
        path,
    };
    let m = parse_matrix(&mut cur)?;
    cur.expect_eof()?;
    Ok(m)
}

pub fn write_concepts(path: &Path, dict: &ConceptDictionary) -> Result<(), IoError> {
    let bytes = serde_json::to_vec_pretty(dict.names()).expect("string array serializes");
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn read_concepts(path: &Path) -> Result<ConceptDictionary, IoError> {
    let buf = fs::read(path).map_err(io_err(path))?;
    let names: Vec<String> =
        serde_json::from_slice(&buf).map_err(|source| IoError::MalformedJson {
            path: path.to_path_buf(),
            source,
        })?;
    Ok(ConceptDictionary::new(names)?)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RealizationRecord {
    id: String,
    concepts: Vec<String>,
}

/// JSON-lines realizations: one `{"id": ..., "concepts": [names]}` record
/// per line; line order is the column order of the data matrix.
pub fn write_realizations(
    path: &Path,
    real: &RealizationSet,
    dict: &ConceptDictionary,
) -> Result<(), IoError> {
    let mut out = String::new();
    for i in 0..real.len() {
        let record = RealizationRecord {
            id: real.id(i).to_string(),
            concepts: real
                .set(i)
                .iter()
                .map(|&k| dict.name(k).expect("validated index").to_string())
                .collect(),
        };
        out.push_str(&serde_json::to_string(&record).expect("record serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

pub fn read_realizations(
    path: &Path,
    dict: &ConceptDictionary,
) -> Result<RealizationSet, IoError> {
    let buf = fs::read_to_string(path).map_err(io_err(path))?;
    let mut ids = Vec::new();
    let mut sets = Vec::new();
    for (idx, line) in buf.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: RealizationRecord =
            serde_json::from_str(line).map_err(|source| IoError::MalformedLine {
                path: path.to_path_buf(),
                line: line_no,
                source,
            })?;
        let mut set = Vec::with_capacity(record.concepts.len());
        for name in &record.concepts {
            match dict.index_of(name) {
                Some(k) => set.push(k),
                None => {
                    return Err(IoError::UnknownConcept {
                        path: path.to_path_buf(),
                        line: line_no,
                        name: name.clone(),
                    })
                }
            }
        }
        ids.push(record.id);
        sets.push(set);
    }
    Ok(RealizationSet::new(ids, sets, dict.len())?)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointMeta {
    version: u32,
    k: usize,
    d: usize,
    n: usize,
    activation: String,
    concepts: Vec<String>,
    row_layout: String,
    has_encoder: bool,
}

pub fn save_checkpoint(
    path: &Path,
    model: &SsaeModel,
    dict: &ConceptDictionary,
) -> Result<(), IoError> {
    if dict.len() != model.design().concepts() {
        return Err(IoError::MetadataMismatch {
            path: path.to_path_buf(),
            reason: format!(
                "dictionary has {} names but the model has K = {}",
                dict.len(),
                model.design().concepts()
            ),
        });
    }
    let meta = CheckpointMeta {
        version: CHECKPOINT_VERSION,
        k: model.design().concepts(),
        d: model.design().subspace_dim(),
        n: model.n_embed(),
        activation: model.activation().as_str().to_string(),
        concepts: dict.names().to_vec(),
        row_layout: ROW_LAYOUT_TAG.to_string(),
        has_encoder: model.encoder().is_some(),
    };
    let meta_bytes = serde_json::to_vec(&meta).expect("metadata serializes");
    let mut out = Vec::new();
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&(meta_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta_bytes);
    out.extend_from_slice(&matrix_to_bytes(model.w2(), Dtype::F64, path)?);
    out.extend_from_slice(&matrix_to_bytes(model.yc(), Dtype::F64, path)?);
    if let Some(w1) = model.encoder() {
        out.extend_from_slice(&matrix_to_bytes(w1, Dtype::F64, path)?);
    }
    fs::write(path, out).map_err(io_err(path))
}

pub fn load_checkpoint(path: &Path) -> Result<(SsaeModel, ConceptDictionary), IoError> {
    let buf = fs::read(path).map_err(io_err(path))?;
    let mut cur = Cursor {
        buf: &buf,
        pos: 0,
        path,
    };
    let magic = cur.take(8)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(IoError::BadMagic {
            path: path.to_path_buf(),
            expected: "SSAECKP1",
        });
    }
    let meta_len = cur.take_u64()? as usize;
    let meta_bytes = cur.take(meta_len)?;
    let meta: CheckpointMeta =
        serde_json::from_slice(meta_bytes).map_err(|source| IoError::MalformedJson {
            path: path.to_path_buf(),
            source,
        })?;
    if meta.version != CHECKPOINT_VERSION {
        return Err(IoError::VersionMismatch {
            path: path.to_path_buf(),
            found: meta.version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let mismatch = |reason: String| IoError::MetadataMismatch {
        path: path.to_path_buf(),
        reason,
    };
    if meta.row_layout != ROW_LAYOUT_TAG {
        return Err(mismatch(format!(
            "unknown row layout '{}', expected '{ROW_LAYOUT_TAG}'",
            meta.row_layout
        )));
    }
    if meta.concepts.len() != meta.k {
        return Err(mismatch(format!(
            "{} concept names for K = {}",
            meta.concepts.len(),
            meta.k
        )));
    }
    let activation = Activation::parse(&meta.activation)
        .ok_or_else(|| mismatch(format!("unknown activation '{}'", meta.activation)))?;
    let dict =
        ConceptDictionary::new(meta.concepts.clone()).map_err(|e| mismatch(e.to_string()))?;
    let design = SparseDesign::new(meta.d, meta.k).map_err(|e| mismatch(e.to_string()))?;

    let w2 = parse_matrix(&mut cur)?;
    let yc = parse_matrix(&mut cur)?;
    let encoder = if meta.has_encoder {
        Some(parse_matrix(&mut cur)?)
    } else {
        None
    };
    cur.expect_eof()?;
    let model = SsaeModel::from_parts(design, meta.n, w2, yc, activation, encoder)
        .map_err(|e| mismatch(e.to_string()))?;
    Ok((model, dict))
}
