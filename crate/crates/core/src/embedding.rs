//! Dense document embeddings and cosine kernels.
//!
//! Storage is f32 row-major; every reduction accumulates in f64.
//!
//! On-disk layout (little endian):
//!
//! ```text
//! "TSEB" | version: u32 | rows: u64 | dims: u32 | rows*dims f32 | JSON array of ids
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TSEB";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 4;
const UNIT_TOLERANCE: f64 = 1e-4;

/// Default embedding width of the MiniLM sentence encoders.
pub const DEFAULT_DIMS: usize = 384;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    dims: usize,
    data: Vec<f32>,
    normalized: bool,
    index: HashMap<String, usize>,
}

impl EmbeddingMatrix {
    pub fn new(ids: Vec<String>, dims: usize, data: Vec<f32>) -> Result<Self> {
        if dims == 0 {
            return Err(Error::invalid("embedding dims must be positive"));
        }
        if data.len() != ids.len() * dims {
            return Err(Error::DimensionMismatch {
                expected: ids.len() * dims,
                actual: data.len(),
            });
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        let mut m = Self {
            ids,
            dims,
            data,
            normalized: false,
            index,
        };
        m.normalized = m.rows_are_unit();
        Ok(m)
    }

    pub fn from_rows(ids: Vec<String>, rows: &[Vec<f32>]) -> Result<Self> {
        let dims = rows.first().map(|r| r.len()).unwrap_or(0);
        if let Some(bad) = rows.iter().find(|r| r.len() != dims) {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: bad.len(),
            });
        }
        Self::new(ids, dims, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.ids.len()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.position(id).map(|i| self.row(i))
    }

    fn rows_are_unit(&self) -> bool {
        (0..self.rows()).all(|i| (norm(self.row(i)) - 1.0).abs() <= UNIT_TOLERANCE)
    }

    /// Returns a copy whose rows have unit L2 norm.
    pub fn normalize_rows(&self) -> Result<Self> {
        let mut data = self.data.clone();
        for (i, row) in data.chunks_mut(self.dims).enumerate() {
            let n = norm(row);
            if n == 0.0 {
                return Err(Error::ZeroVector(Some(self.ids[i].clone())));
            }
            for v in row.iter_mut() {
                *v = (f64::from(*v) / n) as f32;
            }
        }
        Ok(Self {
            ids: self.ids.clone(),
            dims: self.dims,
            data,
            normalized: true,
            index: self.index.clone(),
        })
    }

    /// Cosine of every row against `target`, in row order.
    pub fn cosine_to(&self, target: &[f64]) -> Result<Vec<f64>> {
        if target.len() != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims,
                actual: target.len(),
            });
        }
        let tn = norm64(target);
        if tn == 0.0 {
            return Err(Error::ZeroVector(None));
        }
        self.data
            .par_chunks(self.dims)
            .enumerate()
            .map(|(i, row)| {
                let rn = norm(row);
                if rn == 0.0 {
                    return Err(Error::ZeroVector(Some(self.ids[i].clone())));
                }
                let dot: f64 = row
                    .iter()
                    .zip(target)
                    .map(|(&a, &b)| f64::from(a) * b)
                    .sum();
                Ok(clamp_cos(dot / (rn * tn)))
            })
            .collect()
    }

    /// Row-subset in the order of `ids`.
    pub fn subset(&self, ids: &[String]) -> Result<Self> {
        let missing: Vec<String> = ids
            .iter()
            .filter(|id| !self.index.contains_key(id.as_str()))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingEmbedding(missing));
        }
        let mut data = Vec::with_capacity(ids.len() * self.dims);
        for id in ids {
            data.extend_from_slice(self.get(id).expect("checked above"));
        }
        Self::new(ids.to_vec(), self.dims, data)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.rows() as u64).to_le_bytes());
        out.extend_from_slice(&(self.dims as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(
            serde_json::to_string(&self.ids)
                .expect("string list serializes")
                .as_bytes(),
        );
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fmt = |offset: usize, reason: String| Error::Format {
            offset: offset as u64,
            reason,
        };
        if bytes.len() < HEADER_LEN {
            return Err(fmt(bytes.len(), "truncated header".into()));
        }
        if &bytes[0..4] != MAGIC {
            return Err(fmt(0, "bad magic".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(fmt(4, format!("unsupported version {version}")));
        }
        let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let dims = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
        if dims == 0 {
            return Err(fmt(16, "dims must be positive".into()));
        }
        let payload_len = (rows as usize)
            .checked_mul(dims)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| fmt(8, "row count overflows".into()))?;
        let payload_end = HEADER_LEN + payload_len;
        if bytes.len() < payload_end {
            return Err(fmt(
                bytes.len(),
                format!("truncated payload: expected {payload_len} bytes of f32 data"),
            ));
        }
        let data: Vec<f32> = bytes[HEADER_LEN..payload_end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let ids: Vec<String> = serde_json::from_slice(&bytes[payload_end..])
            .map_err(|e| fmt(payload_end, format!("invalid id sidecar: {e}")))?;
        if ids.len() as u64 != rows {
            return Err(fmt(
                payload_end,
                format!("id count {} does not match {rows} rows", ids.len()),
            ));
        }
        Self::new(ids, dims, data)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Imports `id,v1,...,vd` rows. A leading header row is skipped.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_path(path)?;
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let parsed: std::result::Result<Vec<f32>, _> = record
                .iter()
                .skip(1)
                .map(|v| v.trim().parse::<f32>())
                .collect();
            match parsed {
                Ok(row) => {
                    ids.push(record.get(0).unwrap_or_default().to_string());
                    rows.push(row);
                }
                Err(_) if i == 0 => continue,
                Err(e) => {
                    return Err(Error::Format {
                        offset: record.position().map(|p| p.byte()).unwrap_or(0),
                        reason: format!("row {}: {e}", i + 1),
                    })
                }
            }
        }
        Self::from_rows(ids, &rows)
    }
}

fn norm(v: &[f32]) -> f64 {
    v.iter()
        .map(|&x| f64::from(x) * f64::from(x))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn norm64(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn clamp_cos(c: f64) -> f64 {
    c.clamp(-1.0, 1.0)
}

/// Cosine similarity of two non-zero vectors, accumulated in f64.
pub fn cosine_similarity(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector(None));
    }
    let dot: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum();
    Ok(clamp_cos(dot / (na * nb)))
}
