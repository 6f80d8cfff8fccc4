//! Database ranking: descriptor dot products, ground-truth pose ranking,
//! and rank-interval viewpoint sets.
//!
//! Feature matrix file layout (little endian):
//!
//! ```text
//! b"RPF1" | dim: u32 | rows: u32 | rows × dim f32
//! ```
//!
//! The ids file is UTF-8 with one id per line, in row order. Descriptors
//! are used as stored; normalize them beforehand if cosine similarity is
//! wanted.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::relpose::pose_metric;
use crate::scene::{ImageRecord, Pose};

pub const FEATURE_MAGIC: &[u8; 4] = b"RPF1";
const HEADER_LEN: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetrievalError {
    #[error("descriptor has dimension {got}, store has {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("requested {n} neighbors but only {available} candidates")]
    NTooLarge { n: usize, available: usize },
    #[error("ids file lists {ids} ids but the matrix has {rows} rows")]
    CountMismatch { ids: usize, rows: usize },
    #[error("malformed feature header: {0}")]
    MalformedHeader(String),
    #[error("feature store has non-finite entry in row `{0}`")]
    NonFinite(String),
    #[error("duplicate feature id `{0}`")]
    DuplicateId(String),
    #[error("no descriptor for id `{0}`")]
    UnknownId(String),
    #[error("ranking has {available} entries; {needed} needed for the requested viewpoint sets")]
    InsufficientRanking { needed: usize, available: usize },
    #[error("io error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

/// Row-major descriptor matrix with one row per id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f32>,
    index: HashMap<String, usize>,
}

impl FeatureStore {
    pub fn new(dim: usize, ids: Vec<String>, data: Vec<f32>) -> Result<Self, RetrievalError> {
        if dim == 0 {
            return Err(RetrievalError::MalformedHeader("dimension must be positive".into()));
        }
        if data.len() != ids.len() * dim {
            return Err(RetrievalError::CountMismatch {
                ids: ids.len(),
                rows: data.len() / dim,
            });
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if data[i * dim..(i + 1) * dim].iter().any(|v| !v.is_finite()) {
                return Err(RetrievalError::NonFinite(id.clone()));
            }
            if index.insert(id.clone(), i).is_some() {
                return Err(RetrievalError::DuplicateId(id.clone()));
            }
        }
        Ok(Self { dim, ids, data, index })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index.get(id).map(|&i| self.row(i))
    }

    /// Store restricted to `ids`, in the given order.
    pub fn subset<S: AsRef<str>>(&self, ids: &[S]) -> Result<Self, RetrievalError> {
        let mut data = Vec::with_capacity(ids.len() * self.dim);
        let mut out_ids = Vec::with_capacity(ids.len());
        for id in ids {
            let id = id.as_ref();
            let row = self.get(id).ok_or_else(|| RetrievalError::UnknownId(id.to_string()))?;
            data.extend_from_slice(row);
            out_ids.push(id.to_string());
        }
        Self::new(self.dim, out_ids, data)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * 4);
        out.extend_from_slice(FEATURE_MAGIC);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.ids.len() as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses the matrix bytes and pairs rows with `ids`.
    pub fn from_bytes(bytes: &[u8], ids: Vec<String>) -> Result<Self, RetrievalError> {
        if bytes.len() < HEADER_LEN {
            return Err(RetrievalError::MalformedHeader(format!(
                "file is {} bytes",
                bytes.len()
            )));
        }
        if &bytes[..4] != FEATURE_MAGIC {
            return Err(RetrievalError::MalformedHeader("bad magic".into()));
        }
        let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        if dim == 0 {
            return Err(RetrievalError::MalformedHeader("dimension must be positive".into()));
        }
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != rows * dim * 4 {
            return Err(RetrievalError::MalformedHeader(format!(
                "header declares {rows}×{dim} floats but payload has {} bytes",
                payload.len()
            )));
        }
        if rows != ids.len() {
            return Err(RetrievalError::CountMismatch { ids: ids.len(), rows });
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(dim, ids, data)
    }
}

fn io_err(path: &Path, e: std::io::Error) -> RetrievalError {
    RetrievalError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn load_features(matrix_path: &Path, ids_path: &Path) -> Result<FeatureStore, RetrievalError> {
    let bytes = fs::read(matrix_path).map_err(|e| io_err(matrix_path, e))?;
    let text = fs::read_to_string(ids_path).map_err(|e| io_err(ids_path, e))?;
    let ids = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    FeatureStore::from_bytes(&bytes, ids)
}

pub fn write_features(store: &FeatureStore, matrix_path: &Path, ids_path: &Path) -> Result<(), RetrievalError> {
    fs::write(matrix_path, store.to_bytes()).map_err(|e| io_err(matrix_path, e))?;
    let mut ids = store.ids.join("\n");
    ids.push('\n');
    fs::write(ids_path, ids).map_err(|e| io_err(ids_path, e))
}

/// Whether larger or smaller scores rank first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    /// Similarity, ranked descending.
    Similarity,
    /// Distance, ranked ascending.
    Distance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query_id: String,
    pub ranked_ids: Vec<String>,
    pub scores: Vec<f64>,
    pub kind: ScoreKind,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.ranked_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked_ids.is_empty()
    }

    pub fn top(&self, n: usize) -> &[String] {
        &self.ranked_ids[..n.min(self.ranked_ids.len())]
    }
}

/// Dot product accumulated in `f64`.
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

fn by_score_then_id(kind: ScoreKind) -> impl Fn(&(f64, &str), &(f64, &str)) -> Ordering {
    move |a, b| {
        let primary = match kind {
            ScoreKind::Similarity => b.0.total_cmp(&a.0),
            ScoreKind::Distance => a.0.total_cmp(&b.0),
        };
        primary.then_with(|| a.1.cmp(b.1))
    }
}

fn ranked(query_id: &str, mut scored: Vec<(f64, &str)>, n: usize, kind: ScoreKind) -> RankedList {
    // total_cmp separates -0.0 from 0.0; fold them so equal scores fall back to the id
    for s in scored.iter_mut() {
        s.0 += 0.0;
    }
    let cmp = by_score_then_id(kind);
    if n < scored.len() {
        scored.select_nth_unstable_by(n, &cmp);
        scored.truncate(n);
    }
    scored.sort_by(&cmp);
    RankedList {
        query_id: query_id.to_string(),
        ranked_ids: scored.iter().map(|s| s.1.to_string()).collect(),
        scores: scored.iter().map(|s| s.0).collect(),
        kind,
    }
}

/// Top `n` rows of `store` by descending dot product with `query_vec`.
///
/// Ties are broken by id. A row whose id equals `query_id` is skipped.
pub fn rank_by_dot(
    query_id: &str,
    query_vec: &[f32],
    store: &FeatureStore,
    n: usize,
) -> Result<RankedList, RetrievalError> {
    if query_vec.len() != store.dim {
        return Err(RetrievalError::DimMismatch {
            expected: store.dim,
            got: query_vec.len(),
        });
    }
    let scored: Vec<(f64, &str)> = store
        .ids
        .iter()
        .enumerate()
        .filter(|(_, id)| id.as_str() != query_id)
        .map(|(i, id)| (dot(query_vec, store.row(i)), id.as_str()))
        .collect();
    if n > scored.len() {
        return Err(RetrievalError::NTooLarge {
            n,
            available: scored.len(),
        });
    }
    Ok(ranked(query_id, scored, n, ScoreKind::Similarity))
}

/// All candidates by ascending pose metric to `query_pose`; `query_id` itself is skipped.
pub fn rank_by_pose_metric(
    query_id: &str,
    query_pose: &Pose<f64>,
    candidates: &[&ImageRecord],
    beta: f64,
) -> RankedList {
    let scored: Vec<(f64, &str)> = candidates
        .iter()
        .filter(|r| r.id != query_id)
        .map(|r| (pose_metric(query_pose, &r.pose, beta), r.id.as_str()))
        .collect();
    let n = scored.len();
    ranked(query_id, scored, n, ScoreKind::Distance)
}

/// Rank positions (1-based, inclusive) covered by viewpoint set `k`.
pub fn viewpoint_ranks(k: usize, set_size: usize, interval: usize) -> (usize, usize) {
    (k * interval + 1, k * interval + set_size)
}

/// `count` sets of `set_size` ids starting every `interval` ranks: set `k`
/// holds ranks `k·interval + 1 ..= k·interval + set_size`.
pub fn viewpoint_sets(
    ranked: &RankedList,
    set_size: usize,
    interval: usize,
    count: usize,
) -> Result<Vec<Vec<String>>, RetrievalError> {
    if count == 0 || set_size == 0 {
        return Ok(Vec::new());
    }
    let needed = (count - 1) * interval + set_size;
    if ranked.len() < needed {
        return Err(RetrievalError::InsufficientRanking {
            needed,
            available: ranked.len(),
        });
    }
    Ok((0..count)
        .map(|k| {
            let start = k * interval;
            ranked.ranked_ids[start..start + set_size].to_vec()
        })
        .collect())
}
