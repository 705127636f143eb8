//! Embedding-space numerics: vector storage, L2 normalization and cosine
//! similarity.
//!
//! Values are stored as `f32` (the width encoders emit) and every reduction
//! is accumulated in `f64`.

use thiserror::Error;

/// Norms at or below this are treated as a zero vector.
pub const EPS_NORM: f64 = 1e-12;

/// Maximum deviation of a row norm from 1.0 for the row to count as normalized.
pub const NORM_TOLERANCE: f64 = 1e-5;

/// Rows already unit-length to within `f32` resolution are left untouched by
/// normalization so that re-normalizing is bit-exact.
const UNIT_SNAP: f64 = f32::EPSILON as f64;

/// Floating-point excess over |1| that cosine similarity silently clamps.
const COSINE_CLAMP: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VecError {
    #[error("embedding has zero dimensions")]
    EmptyVector,
    #[error("embedding contains a non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("embedding norm {norm:e} is at or below the zero threshold")]
    ZeroVector { norm: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("input is not normalized")]
    NotNormalized,
    #[error("matrix data length {len} is not a multiple of dim {dim}")]
    RaggedMatrix { len: usize, dim: usize },
}

impl VecError {
    pub fn name(&self) -> &'static str {
        match self {
            VecError::EmptyVector => "EmptyVector",
            VecError::NonFinite { .. } => "NonFinite",
            VecError::ZeroVector { .. } => "ZeroVector",
            VecError::DimensionMismatch { .. } => "DimensionMismatch",
            VecError::NotNormalized => "NotNormalized",
            VecError::RaggedMatrix { .. } => "RaggedMatrix",
        }
    }
}

fn check_finite(values: &[f32]) -> Result<(), VecError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(VecError::NonFinite { index }),
        None => Ok(()),
    }
}

/// Euclidean norm accumulated in `f64`.
pub fn norm(values: &[f32]) -> f64 {
    values
        .iter()
        .map(|&v| {
            let v = v as f64;
            v * v
        })
        .sum::<f64>()
        .sqrt()
}

/// Dot product accumulated in `f64`, ascending index order.
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

fn normalize_slice(values: &[f32]) -> Result<Vec<f32>, VecError> {
    let n = norm(values);
    if n <= EPS_NORM {
        return Err(VecError::ZeroVector { norm: n });
    }
    if (n - 1.0).abs() <= UNIT_SNAP {
        return Ok(values.to_vec());
    }
    Ok(values.iter().map(|&v| (v as f64 / n) as f32).collect())
}

/// A single embedding of fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f32>,
    normalized: bool,
}

impl EmbeddingVector {
    /// Wraps raw encoder output. The vector is not marked normalized.
    pub fn new(values: Vec<f32>) -> Result<Self, VecError> {
        if values.is_empty() {
            return Err(VecError::EmptyVector);
        }
        check_finite(&values)?;
        Ok(Self {
            values,
            normalized: false,
        })
    }

    /// Wraps values that are claimed to be unit length; the claim is checked.
    pub fn new_normalized(values: Vec<f32>) -> Result<Self, VecError> {
        let mut v = Self::new(values)?;
        if (norm(&v.values) - 1.0).abs() > NORM_TOLERANCE {
            return Err(VecError::NotNormalized);
        }
        v.normalized = true;
        Ok(v)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    /// Returns a copy scaled by `factor`, dropping the normalized flag.
    pub fn scaled(&self, factor: f32) -> Result<Self, VecError> {
        Self::new(self.values.iter().map(|v| v * factor).collect())
    }
}

/// `v / ‖v‖`.
pub fn l2_normalize(v: &EmbeddingVector) -> Result<EmbeddingVector, VecError> {
    Ok(EmbeddingVector {
        values: normalize_slice(&v.values)?,
        normalized: true,
    })
}

/// Plain dot product of two normalized vectors.
///
/// Unnormalized inputs are rejected rather than normalized on the fly. A
/// result that overshoots ±1 by at most 1e-6 is clamped; larger excess is
/// returned as computed.
pub fn cosine_similarity(u: &EmbeddingVector, t: &EmbeddingVector) -> Result<f64, VecError> {
    if u.dim() != t.dim() {
        return Err(VecError::DimensionMismatch {
            expected: u.dim(),
            actual: t.dim(),
        });
    }
    if !u.normalized || !t.normalized {
        return Err(VecError::NotNormalized);
    }
    Ok(cosine_unchecked(&u.values, &t.values))
}

pub(crate) fn cosine_unchecked(u: &[f32], t: &[f32]) -> f64 {
    clamp_unit(dot(u, t))
}

fn clamp_unit(s: f64) -> f64 {
    if s > 1.0 && s - 1.0 <= COSINE_CLAMP {
        1.0
    } else if s < -1.0 && -1.0 - s <= COSINE_CLAMP {
        -1.0
    } else {
        s
    }
}

/// Row-major collection of embeddings sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f32>,
    normalized: bool,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self, VecError> {
        if dim == 0 {
            return Err(VecError::EmptyVector);
        }
        if !data.len().is_multiple_of(dim) {
            return Err(VecError::RaggedMatrix {
                len: data.len(),
                dim,
            });
        }
        check_finite(&data)?;
        Ok(Self {
            dim,
            data,
            normalized: false,
        })
    }

    pub fn from_rows<R: AsRef<[f32]>>(dim: usize, rows: &[R]) -> Result<Self, VecError> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(VecError::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    pub fn empty(dim: usize) -> Result<Self, VecError> {
        Self::new(dim, Vec::new())
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Copies row `i` out as a vector carrying this matrix's normalized flag.
    pub fn row_vector(&self, i: usize) -> EmbeddingVector {
        EmbeddingVector {
            values: self.row(i).to_vec(),
            normalized: self.normalized,
        }
    }

    /// Normalizes every row.
    pub fn l2_normalized(&self) -> Result<Self, VecError> {
        let mut data = Vec::with_capacity(self.data.len());
        for row in self.iter_rows() {
            data.extend(normalize_slice(row)?);
        }
        Ok(Self {
            dim: self.dim,
            data,
            normalized: true,
        })
    }

    /// Rows `start..end` as a new matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> Self {
        Self {
            dim: self.dim,
            data: self.data[start * self.dim..end * self.dim].to_vec(),
            normalized: self.normalized,
        }
    }

    /// Gathers the given rows, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            dim: self.dim,
            data,
            normalized: self.normalized,
        }
    }

    /// True when every listed row has norm within [`NORM_TOLERANCE`] of 1.
    pub fn rows_unit_norm(&self, indices: impl IntoIterator<Item = usize>) -> bool {
        indices
            .into_iter()
            .all(|i| (norm(self.row(i)) - 1.0).abs() <= NORM_TOLERANCE)
    }

    /// Sets the normalized flag after verifying every row.
    pub fn assume_normalized(mut self) -> Result<Self, VecError> {
        if !self.rows_unit_norm(0..self.rows()) {
            return Err(VecError::NotNormalized);
        }
        self.normalized = true;
        Ok(self)
    }

    /// Sets the normalized flag without checking. Used by readers that have
    /// already verified rows by their own policy.
    pub(crate) fn with_normalized_flag(mut self, normalized: bool) -> Self {
        self.normalized = normalized;
        self
    }
}
