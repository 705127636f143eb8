//! The ZSEB embedding exchange format.
//!
//! A ZSEB file is a fixed 19-byte little-endian header followed by the raw
//! row-major `f32` payload:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `b"ZSEB"`                         |
//! | 4      | 2    | version (`u16`, currently 1)            |
//! | 6      | 4    | dim (`u32`)                             |
//! | 10     | 8    | count (`u64`)                           |
//! | 18     | 1    | flags (bit 0: rows are pre-normalized)  |
//! | 19     | 4·count·dim | payload, `f32` LE                |
//!
//! Row metadata lives in a JSON sidecar next to the file (`<path>.json`),
//! which also carries the encoder provenance and the SHA-256 of the payload.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fsutil::write_atomic;
use crate::vecspace::{norm, EmbeddingMatrix, NORM_TOLERANCE};

pub const MAGIC: [u8; 4] = *b"ZSEB";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 19;
pub const FLAG_NORMALIZED: u8 = 0b0000_0001;

pub const SIDECAR_FORMAT: &str = "zseb-sidecar";
pub const SIDECAR_VERSION: u32 = 1;

/// Rows whose norms are re-checked when the normalized flag is set and the
/// read is not strict.
const NORM_SAMPLE: usize = 32;

#[derive(Debug, Error)]
pub enum ExchangeError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad magic {found:?}, expected \"ZSEB\"")]
    BadMagic { found: Vec<u8> },
    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("header truncated: {len} bytes, need {HEADER_LEN}")]
    TruncatedHeader { len: usize },
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("payload truncated: file is {actual} bytes, header implies {expected}")]
    TruncatedPayload { expected: u64, actual: u64 },
    #[error("trailing bytes: file is {actual} bytes, header implies {expected}")]
    TrailingBytes { expected: u64, actual: u64 },
    #[error("payload digest {actual} does not match sidecar digest {expected}")]
    DigestMismatch { expected: String, actual: String },
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },
    #[error("sidecar describes {actual} rows, payload has {expected}")]
    SidecarRowCount { expected: usize, actual: usize },
    #[error("sidecar: {0}")]
    Sidecar(String),
    #[error("row {row} is flagged normalized but has norm {norm}")]
    NormalizationMismatch { row: usize, norm: f64 },
}

impl ExchangeError {
    pub fn name(&self) -> &'static str {
        match self {
            ExchangeError::Io { .. } => "IoFailure",
            ExchangeError::BadMagic { .. } => "BadMagic",
            ExchangeError::UnsupportedVersion(_) => "UnsupportedVersion",
            ExchangeError::TruncatedHeader { .. } => "TruncatedHeader",
            ExchangeError::BadHeader(_) => "BadHeader",
            ExchangeError::TruncatedPayload { .. } => "TruncatedPayload",
            ExchangeError::TrailingBytes { .. } => "TrailingBytes",
            ExchangeError::DigestMismatch { .. } => "DigestMismatch",
            ExchangeError::NonFiniteValue { .. } => "NonFiniteValue",
            ExchangeError::SidecarRowCount { .. } => "SidecarRowCount",
            ExchangeError::Sidecar(_) => "SidecarError",
            ExchangeError::NormalizationMismatch { .. } => "NormalizationMismatch",
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        ExchangeError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// One text-bank row: which class and which of its descriptions produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextRow {
    pub class_id: usize,
    pub class_name: String,
    pub description_index: usize,
    pub description_text: String,
}

/// One image row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRow {
    pub item_id: String,
    pub source: String,
    pub true_label: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "rows", rename_all = "snake_case")]
pub enum RowDescriptors {
    Text(Vec<TextRow>),
    Image(Vec<ImageRow>),
}

impl RowDescriptors {
    pub fn len(&self) -> usize {
        match self {
            RowDescriptors::Text(r) => r.len(),
            RowDescriptors::Image(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format: String,
    pub version: u32,
    pub provenance: String,
    /// Lowercase hex SHA-256 of the payload bytes (header excluded).
    pub payload_sha256: String,
    pub descriptors: RowDescriptors,
}

impl Sidecar {
    /// A sidecar whose digest is filled in at write time.
    pub fn new(provenance: impl Into<String>, descriptors: RowDescriptors) -> Self {
        Self {
            format: SIDECAR_FORMAT.to_string(),
            version: SIDECAR_VERSION,
            provenance: provenance.into(),
            payload_sha256: String::new(),
            descriptors,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("sidecar serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ExchangeError> {
        let sc: Sidecar =
            serde_json::from_str(text).map_err(|e| ExchangeError::Sidecar(e.to_string()))?;
        if sc.format != SIDECAR_FORMAT {
            return Err(ExchangeError::Sidecar(format!(
                "unexpected format tag {:?}",
                sc.format
            )));
        }
        if sc.version != SIDECAR_VERSION {
            return Err(ExchangeError::Sidecar(format!(
                "unsupported sidecar version {}",
                sc.version
            )));
        }
        Ok(sc)
    }
}

/// Parsed fixed header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub version: u16,
    pub dim: u32,
    pub count: u64,
    pub flags: u8,
}

impl Header {
    pub fn payload_len(&self) -> Option<u64> {
        self.count.checked_mul(self.dim as u64)?.checked_mul(4)
    }

    pub fn normalized(&self) -> bool {
        self.flags & FLAG_NORMALIZED != 0
    }
}

/// `<path>.json`
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".json");
    PathBuf::from(s)
}

/// Encodes header and payload.
pub fn encode(matrix: &EmbeddingMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + matrix.data().len() * 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(matrix.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(matrix.rows() as u64).to_le_bytes());
    out.push(if matrix.is_normalized() {
        FLAG_NORMALIZED
    } else {
        0
    });
    for v in matrix.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn payload_digest(payload: &[u8]) -> String {
    hex::encode(Sha256::digest(payload))
}

/// Validates the header and returns it with the payload slice.
pub fn decode_header(bytes: &[u8]) -> Result<(Header, &[u8]), ExchangeError> {
    if bytes.len() < MAGIC.len() || bytes[..4] != MAGIC {
        return Err(ExchangeError::BadMagic {
            found: bytes[..bytes.len().min(4)].to_vec(),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(ExchangeError::TruncatedHeader { len: bytes.len() });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(ExchangeError::UnsupportedVersion(version));
    }
    let dim = u32::from_le_bytes(bytes[6..10].try_into().unwrap());
    let count = u64::from_le_bytes(bytes[10..18].try_into().unwrap());
    let flags = bytes[18];
    if dim == 0 {
        return Err(ExchangeError::BadHeader("dim is zero".into()));
    }
    if flags & !FLAG_NORMALIZED != 0 {
        return Err(ExchangeError::BadHeader(format!(
            "reserved flag bits set: {flags:#04x}"
        )));
    }
    let header = Header {
        version,
        dim,
        count,
        flags,
    };
    let actual = bytes.len() as u64;
    let expected = header
        .payload_len()
        .and_then(|p| p.checked_add(HEADER_LEN as u64))
        .ok_or_else(|| ExchangeError::BadHeader("count × dim overflows".into()))?;
    if actual < expected {
        return Err(ExchangeError::TruncatedPayload { expected, actual });
    }
    if actual > expected {
        return Err(ExchangeError::TrailingBytes { expected, actual });
    }
    Ok((header, &bytes[HEADER_LEN..]))
}

/// Decodes a full file image. The normalized flag is not re-verified here.
pub fn decode(bytes: &[u8]) -> Result<(Header, EmbeddingMatrix), ExchangeError> {
    let (header, payload) = decode_header(bytes)?;
    let dim = header.dim as usize;
    let mut data = Vec::with_capacity(payload.len() / 4);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(ExchangeError::NonFiniteValue {
                row: i / dim,
                col: i % dim,
            });
        }
        data.push(v);
    }
    let matrix = EmbeddingMatrix::new(dim, data)
        .map_err(|e| ExchangeError::BadHeader(e.to_string()))?
        .with_normalized_flag(header.normalized());
    Ok((header, matrix))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReadOptions {
    /// Re-verify every row of a normalized-flagged file instead of a sample.
    pub strict: bool,
}

/// Writes the file and its sidecar. Returns the sidecar as written, with
/// the payload digest filled in.
pub fn write_embedding_file(
    path: &Path,
    matrix: &EmbeddingMatrix,
    sidecar: &Sidecar,
) -> Result<Sidecar, ExchangeError> {
    if sidecar.descriptors.len() != matrix.rows() {
        return Err(ExchangeError::SidecarRowCount {
            expected: matrix.rows(),
            actual: sidecar.descriptors.len(),
        });
    }
    // EmbeddingMatrix rejects non-finite values on construction, so this
    // only guards matrices built through unchecked paths.
    if let Some(i) = matrix.data().iter().position(|v| !v.is_finite()) {
        return Err(ExchangeError::NonFiniteValue {
            row: i / matrix.dim(),
            col: i % matrix.dim(),
        });
    }
    let bytes = encode(matrix);
    let mut written = sidecar.clone();
    written.payload_sha256 = payload_digest(&bytes[HEADER_LEN..]);
    write_atomic(path, &bytes).map_err(|e| ExchangeError::io(path, e))?;
    let sc_path = sidecar_path(path);
    write_atomic(&sc_path, written.to_json().as_bytes())
        .map_err(|e| ExchangeError::io(&sc_path, e))?;
    Ok(written)
}

fn sample_rows(count: usize) -> Vec<usize> {
    if count <= NORM_SAMPLE {
        return (0..count).collect();
    }
    let mut rows: Vec<usize> = (0..NORM_SAMPLE).map(|i| i * count / NORM_SAMPLE).collect();
    rows.push(count - 1);
    rows
}

/// Reads and validates a file and its sidecar.
pub fn read_embedding_file(
    path: &Path,
    options: ReadOptions,
) -> Result<(EmbeddingMatrix, Sidecar), ExchangeError> {
    let bytes = fs::read(path).map_err(|e| ExchangeError::io(path, e))?;
    let (_, matrix) = decode(&bytes)?;
    let sc_path = sidecar_path(path);
    let text = fs::read_to_string(&sc_path).map_err(|e| ExchangeError::io(&sc_path, e))?;
    let sidecar = Sidecar::from_json(&text)?;
    let actual = payload_digest(&bytes[HEADER_LEN..]);
    if actual != sidecar.payload_sha256.to_ascii_lowercase() {
        return Err(ExchangeError::DigestMismatch {
            expected: sidecar.payload_sha256.clone(),
            actual,
        });
    }
    if sidecar.descriptors.len() != matrix.rows() {
        return Err(ExchangeError::SidecarRowCount {
            expected: matrix.rows(),
            actual: sidecar.descriptors.len(),
        });
    }
    if matrix.is_normalized() {
        let rows = if options.strict {
            (0..matrix.rows()).collect()
        } else {
            sample_rows(matrix.rows())
        };
        for row in rows {
            let n = norm(matrix.row(row));
            if (n - 1.0).abs() > NORM_TOLERANCE {
                return Err(ExchangeError::NormalizationMismatch { row, norm: n });
            }
        }
    }
    Ok((matrix, sidecar))
}

/// Reads only the fixed header of a file.
pub fn read_header(path: &Path) -> Result<Header, ExchangeError> {
    use std::io::Read;
    let mut f = fs::File::open(path).map_err(|e| ExchangeError::io(path, e))?;
    let mut buf = [0u8; HEADER_LEN];
    let mut filled = 0;
    while filled < HEADER_LEN {
        let n = f
            .read(&mut buf[filled..])
            .map_err(|e| ExchangeError::io(path, e))?;
        if n == 0 {
            break;
        }
        filled += n;
    }
    let buf = &buf[..filled];
    if buf.len() < 4 || buf[..4] != MAGIC {
        return Err(ExchangeError::BadMagic {
            found: buf[..buf.len().min(4)].to_vec(),
        });
    }
    if buf.len() < HEADER_LEN {
        return Err(ExchangeError::TruncatedHeader { len: buf.len() });
    }
    let version = u16::from_le_bytes([buf[4], buf[5]]);
    if version != VERSION {
        return Err(ExchangeError::UnsupportedVersion(version));
    }
    Ok(Header {
        version,
        dim: u32::from_le_bytes(buf[6..10].try_into().unwrap()),
        count: u64::from_le_bytes(buf[10..18].try_into().unwrap()),
        flags: buf[18],
    })
}
