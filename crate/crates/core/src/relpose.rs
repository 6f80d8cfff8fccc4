//! Relative poses between a database camera and a query camera.
//!
//! A [`RelativePoseEstimate`] holds `dq = conj(R_db) ⊗ R_q` and the unit
//! direction from the database camera center toward the query center,
//! expressed in the database camera's frame. Estimates come either from a
//! prediction file or from [`synth_predict`], a seeded noisy oracle.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Quat, Vec3};
use crate::rng::keyed_rng;
use crate::scalar::Real;
use crate::scene::Pose;

/// Minimum center separation for a defined translation direction (meters).
pub const MIN_BASELINE_M: f64 = 1e-9;
const MIN_VECTOR_NORM: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelposeError {
    #[error("camera centers coincide (separation {0:e} m); translation direction undefined")]
    CoincidentCenters(f64),
    #[error("line {line}: malformed prediction: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: duplicate prediction for (query `{query}`, db `{db}`)")]
    DuplicateKey { line: usize, query: String, db: String },
    #[error("line {line}: zero-length {field} vector")]
    ZeroVector { line: usize, field: &'static str },
    #[error("invalid noise configuration: {0}")]
    InvalidNoise(String),
    #[error("io error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativePoseEstimate<T> {
    /// Rotation taking the database camera frame to the query camera frame.
    pub dq: Quat<T>,
    /// Unit direction toward the query center, in the database camera frame.
    pub dt_dir: Vec3<T>,
}

impl<T: Real> RelativePoseEstimate<T> {
    /// Normalizes `dt`; fails when it has (near) zero length.
    pub fn new(dq: Quat<T>, dt: Vec3<T>) -> Option<Self> {
        dt.try_normalize(T::lit(MIN_VECTOR_NORM))
            .map(|dt_dir| Self { dq, dt_dir })
    }

    pub fn cast<U: Real>(&self) -> RelativePoseEstimate<U> {
        RelativePoseEstimate {
            dq: self.dq.cast(),
            dt_dir: self.dt_dir.cast(),
        }
    }
}

/// Ground-truth relative pose of `query` seen from `db`.
pub fn relative_pose<T: Real>(db: &Pose<T>, query: &Pose<T>) -> Result<RelativePoseEstimate<T>, RelposeError> {
    let inv = db.rotation.conj();
    let baseline = query.center - db.center;
    let dist = baseline.norm();
    if dist.is_nan() || dist < T::lit(MIN_BASELINE_M) {
        return Err(RelposeError::CoincidentCenters(dist.to_f64_lossy()));
    }
    Ok(RelativePoseEstimate {
        dq: inv * query.rotation,
        dt_dir: inv.rotate(baseline) / dist,
    })
}

/// `‖c_a − c_b‖ + β·min(‖q_a − q_b‖, ‖q_a + q_b‖)`.
pub fn pose_metric<T: Real>(a: &Pose<T>, b: &Pose<T>, beta: T) -> T {
    (a.center - b.center).norm() + beta * a.rotation.chordal_distance(b.rotation)
}

/// Noise model of the synthetic relative-pose oracle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub sigma_rot_deg: f64,
    pub sigma_dir_deg: f64,
    pub outlier_prob: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn exact(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), RelposeError> {
        let ok_sigma = |s: f64| s.is_finite() && s >= 0.0;
        if !ok_sigma(self.sigma_rot_deg) || !ok_sigma(self.sigma_dir_deg) {
            return Err(RelposeError::InvalidNoise(
                "sigmas must be finite and non-negative".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.outlier_prob) {
            return Err(RelposeError::InvalidNoise(
                "outlier probability must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn uniform_sphere<R: Rng>(rng: &mut R) -> Vec3<f64> {
    loop {
        let v = Vec3::new(standard_normal(rng), standard_normal(rng), standard_normal(rng));
        if let Some(u) = v.try_normalize(1e-6) {
            return u;
        }
    }
}

fn uniform_rotation<R: Rng>(rng: &mut R) -> Quat<f64> {
    loop {
        let q = Quat::new(
            standard_normal(rng),
            standard_normal(rng),
            standard_normal(rng),
            standard_normal(rng),
        );
        if let Ok(q) = q {
            return q;
        }
    }
}

/// Unit vector orthogonal to `d`, uniform on the great circle.
fn orthogonal_axis<R: Rng>(rng: &mut R, d: Vec3<f64>) -> Vec3<f64> {
    loop {
        let u = uniform_sphere(rng);
        if let Some(a) = (u - d * u.dot(d)).try_normalize(1e-6) {
            return a;
        }
    }
}

/// Noisy copy of `gt`, deterministic in `(cfg.seed, query_id, db_id)`.
///
/// The outlier draw comes first: an outlier gets a uniform rotation and a
/// uniform direction. Otherwise `dq` is composed with a rotation of
/// `|N(0, σ_rot)|` degrees about a uniform axis, and `dt_dir` is turned by
/// `|N(0, σ_dir)|` degrees about a uniform axis orthogonal to it.
pub fn synth_predict(
    gt: &RelativePoseEstimate<f64>,
    cfg: &NoiseConfig,
    query_id: &str,
    db_id: &str,
) -> RelativePoseEstimate<f64> {
    let mut rng = keyed_rng(cfg.seed, &["relpose", query_id, db_id]);
    let u: f64 = rng.random();
    if u < cfg.outlier_prob {
        let dq = uniform_rotation(&mut rng);
        let dt_dir = uniform_sphere(&mut rng);
        return RelativePoseEstimate { dq, dt_dir };
    }

    let rot_axis = uniform_sphere(&mut rng);
    let rot_angle = (cfg.sigma_rot_deg * standard_normal(&mut rng)).abs().to_radians();
    let dir_axis = orthogonal_axis(&mut rng, gt.dt_dir);
    let dir_angle = (cfg.sigma_dir_deg * standard_normal(&mut rng)).abs().to_radians();

    let dq = if rot_angle > 0.0 {
        gt.dq * Quat::exp(rot_axis * rot_angle)
    } else {
        gt.dq
    };
    let dt_dir = if dir_angle > 0.0 {
        let turned = Quat::exp(dir_axis * dir_angle).rotate(gt.dt_dir);
        turned / turned.norm()
    } else {
        gt.dt_dir
    };
    RelativePoseEstimate { dq, dt_dir }
}

/// Relative-pose estimates keyed by `(query id, database id)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionSet {
    map: HashMap<(String, String), RelativePoseEstimate<f64>>,
}

#[derive(Serialize, Deserialize)]
struct PredictionLine {
    query: String,
    db: String,
    dq: [f64; 4],
    dt: [f64; 3],
}

impl PredictionSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the previous estimate for the key, if any.
    pub fn insert(
        &mut self,
        query: &str,
        db: &str,
        est: RelativePoseEstimate<f64>,
    ) -> Option<RelativePoseEstimate<f64>> {
        self.map.insert((query.to_string(), db.to_string()), est)
    }

    pub fn get(&self, query: &str, db: &str) -> Option<&RelativePoseEstimate<f64>> {
        // HashMap<(String, String)> cannot be probed with borrowed pairs
        self.map.get(&(query.to_string(), db.to_string()))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Parses JSON lines `{"query", "db", "dq": [w,x,y,z], "dt": [x,y,z]}`.
    /// Blank lines are skipped; `dq` and `dt` are normalized to unit length.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, RelposeError> {
        let mut set = Self::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| RelposeError::MalformedLine {
                line: line_no,
                reason: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let p: PredictionLine = serde_json::from_str(&line).map_err(|e| RelposeError::MalformedLine {
                line: line_no,
                reason: e.to_string(),
            })?;
            if p.dq.iter().chain(&p.dt).any(|v| !v.is_finite()) {
                return Err(RelposeError::MalformedLine {
                    line: line_no,
                    reason: "non-finite value".into(),
                });
            }
            let dq = Quat::from_array(p.dq).map_err(|_| RelposeError::ZeroVector {
                line: line_no,
                field: "dq",
            })?;
            let est = RelativePoseEstimate::new(dq, Vec3::from_array(p.dt)).ok_or(RelposeError::ZeroVector {
                line: line_no,
                field: "dt",
            })?;
            if set.insert(&p.query, &p.db, est).is_some() {
                return Err(RelposeError::DuplicateKey {
                    line: line_no,
                    query: p.query,
                    db: p.db,
                });
            }
        }
        Ok(set)
    }

    /// Writes entries sorted by `(query, db)`.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut keys: Vec<_> = self.map.keys().collect();
        keys.sort();
        for key in keys {
            let est = &self.map[key];
            let line = PredictionLine {
                query: key.0.clone(),
                db: key.1.clone(),
                dq: est.dq.to_array(),
                dt: est.dt_dir.to_array(),
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub fn load_predictions(path: &Path) -> Result<PredictionSet, RelposeError> {
    let file = std::fs::File::open(path).map_err(|e| RelposeError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    PredictionSet::from_reader(std::io::BufReader::new(file))
}
