//! Camera poses, scene databases and training-pair generation.
//!
//! Pose convention: `rotation` maps camera coordinates to world
//! coordinates and `center` is the camera center in world coordinates, so
//! a 4×4 pose matrix `[R | c]` is camera-to-world. This is the convention
//! of 7-Scenes style pose files; reading world-to-camera matrices with it
//! silently corrupts every downstream result.

mod io;
mod pairs;

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{GeomError, Quat, Vec3};
use crate::relpose::RelposeError;
use crate::scalar::Real;

pub use io::{
    format_pose_matrix, load_dataset, load_scene, parse_pose_matrix, read_pose_file, write_pose_file, write_scene,
    SplitSpec,
};
pub use pairs::{generate_pairs, write_pairs_jsonl, TrainingPair, DEFAULT_PAIR_MAX_ANGLE_DEG, DEFAULT_PAIR_MAX_DIST_M};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("malformed pose file {path}: {reason}")]
    MalformedPoseFile { path: PathBuf, reason: String },
    #[error("pose file {path}: {source}")]
    NonRotationMatrix { path: PathBuf, source: GeomError },
    #[error("MissingSplit: {path} not found")]
    MissingSplit { path: PathBuf },
    #[error("split entry `{entry}` in {path} does not resolve to any pose file")]
    UnresolvedSplitEntry { path: PathBuf, entry: String },
    #[error("frame `{0}` listed in both train and test splits")]
    SplitOverlap(String),
    #[error("duplicate image id `{0}`")]
    DuplicateId(String),
    #[error("image id `{0}` is not of the form scene/sequence/frame")]
    InvalidId(String),
    #[error("scene `{scene}` has {count} train image(s); at least 2 are needed")]
    SingletonScene { scene: String, count: usize },
    #[error("relative pose for pair ({a}, {b}): {source}")]
    Relpose { a: String, b: String, source: RelposeError },
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Absolute camera pose: camera-to-world rotation plus camera center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<T> {
    pub rotation: Quat<T>,
    pub center: Vec3<T>,
}

impl<T: Real> Default for Pose<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Pose<T> {
    pub fn new(rotation: Quat<T>, center: Vec3<T>) -> Self {
        Self { rotation, center }
    }

    pub fn identity() -> Self {
        Self::new(Quat::identity(), Vec3::zero())
    }

    /// Left-applies the rigid transform `x ↦ g_rot·x + g_t`.
    pub fn transformed(&self, g_rot: Quat<T>, g_t: Vec3<T>) -> Self {
        Self::new(g_rot * self.rotation, g_rot.rotate(self.center) + g_t)
    }

    pub fn cast<U: Real>(&self) -> Pose<U> {
        Pose::new(self.rotation.cast(), self.center.cast())
    }

    /// Row-major 4×4 camera-to-world matrix.
    pub fn to_matrix4(&self) -> [[T; 4]; 4] {
        let r = self.rotation.to_matrix();
        let c = self.center;
        let (z, o) = (T::zero(), T::one());
        [
            [r[0][0], r[0][1], r[0][2], c.x],
            [r[1][0], r[1][1], r[1][2], c.y],
            [r[2][0], r[2][1], r[2][2], c.z],
            [z, z, z, o],
        ]
    }

    /// Inverse of [`Pose::to_matrix4`]; the bottom row is ignored.
    pub fn from_matrix4(m: &[[T; 4]; 4]) -> Result<Self, GeomError> {
        let r = [
            [m[0][0], m[0][1], m[0][2]],
            [m[1][0], m[1][1], m[1][2]],
            [m[2][0], m[2][1], m[2][2]],
        ];
        Ok(Self::new(Quat::from_matrix(&r)?, Vec3::new(m[0][3], m[1][3], m[2][3])))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One database or query image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    /// `scene/sequence/frame`
    pub id: String,
    pub scene: String,
    pub pose: Pose<f64>,
    pub split: Split,
}

/// Immutable collection of image records indexed by id.
#[derive(Debug, Clone, Default)]
pub struct SceneDatabase {
    records: Vec<ImageRecord>,
    index: HashMap<String, usize>,
}

impl SceneDatabase {
    /// Records are stored sorted by id.
    pub fn new(mut records: Vec<ImageRecord>) -> Result<Self, SceneError> {
        records.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if index.insert(r.id.clone(), i).is_some() {
                return Err(SceneError::DuplicateId(r.id.clone()));
            }
        }
        Ok(Self { records, index })
    }

    pub fn merge(self, other: SceneDatabase) -> Result<Self, SceneError> {
        let mut records = self.records;
        records.extend(other.records);
        Self::new(records)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[ImageRecord] {
        &self.records
    }

    pub fn get(&self, id: &str) -> Option<&ImageRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    /// Sorted scene labels.
    pub fn scenes(&self) -> Vec<String> {
        self.records
            .iter()
            .map(|r| r.scene.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Records of `scene` in `split`, sorted by id.
    pub fn split(&self, scene: &str, split: Split) -> Vec<&ImageRecord> {
        self.records
            .iter()
            .filter(|r| r.scene == scene && r.split == split)
            .collect()
    }

    pub fn train(&self, scene: &str) -> Vec<&ImageRecord> {
        self.split(scene, Split::Train)
    }

    pub fn test(&self, scene: &str) -> Vec<&ImageRecord> {
        self.split(scene, Split::Test)
    }

    /// All test records across scenes, sorted by id.
    pub fn test_records(&self) -> Vec<&ImageRecord> {
        self.records.iter().filter(|r| r.split == Split::Test).collect()
    }
}

/// Maps every pose by `p ↦ (g_rot ⊗ p.rotation, g_rot·p.center + g_t)`.
pub fn apply_rigid_transform(db: &SceneDatabase, g_rot: Quat<f64>, g_t: Vec3<f64>) -> SceneDatabase {
    let records = db
        .records
        .iter()
        .map(|r| ImageRecord {
            pose: r.pose.transformed(g_rot, g_t),
            ..r.clone()
        })
        .collect();
    SceneDatabase {
        records,
        index: db.index.clone(),
    }
}
