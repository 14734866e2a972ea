use crate::error::{mismatch, Error, Result};
use crate::records::RecordMeta;
use crate::tensor::Vector;

/// `n` dense embeddings of uniform dimension, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    data: Vec<f64>,
    meta: RecordMeta,
}

impl EmbeddingSet {
    /// Builds a set from a flat row-major buffer.
    pub fn new(dim: usize, data: Vec<f64>, meta: RecordMeta) -> Result<Self> {
        if dim == 0 {
            if !data.is_empty() {
                return Err(Error::InvalidArgument(
                    "zero-dimensional embeddings cannot carry data".into(),
                ));
            }
        } else if !data.len().is_multiple_of(dim) {
            return Err(mismatch(
                "EmbeddingSet::new",
                format!("dimension {dim}"),
                format!("{} values", data.len()),
            ));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!(
                "embedding value {} at row {}",
                data[i],
                i / dim
            )));
        }
        let n = data.len().checked_div(dim).unwrap_or(0);
        let meta = RecordMeta::new(n, meta.ids().map(<[_]>::to_vec), meta.labels().map(<[_]>::to_vec))?;
        Ok(Self { dim, data, meta })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(mismatch("EmbeddingSet::from_rows", dim, bad.len()));
        }
        Self::new(dim, rows.concat(), RecordMeta::default())
    }

    pub fn with_meta(self, meta: RecordMeta) -> Result<Self> {
        Self::new(self.dim, self.data, meta)
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn vector(&self, i: usize) -> Vector {
        Vector::from_raw(self.row(i).to_vec())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn meta(&self) -> &RecordMeta {
        &self.meta
    }

    /// Mean squared Euclidean norm of the rows.
    pub fn mean_sq_norm(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.rows().map(|r| r.iter().map(|x| x * x).sum::<f64>()).sum::<f64>() / self.len() as f64
    }

    /// Values of dimension `j` across all rows.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }
}
