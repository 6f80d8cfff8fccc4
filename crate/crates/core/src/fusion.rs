//! Pose-hypothesis filtering: fuses N relative pose estimates against
//! known database poses into one absolute query pose.
//!
//! Translation: every pair of neighbors triangulates a candidate query
//! center from its two direction rays. Each candidate is scored by how many
//! of the remaining neighbors' predicted directions point at it within the
//! angular threshold. The best-supported candidate wins; candidates tied at
//! the top count are averaged.
//!
//! Rotation: each neighbor yields `R_q = R_db ⊗ dq`. A hypothesis' inlier
//! count is the number of other hypotheses within the angular threshold.
//! A unique best hypothesis wins; ties at the top count are resolved with
//! the L1 geodesic median over the tied hypotheses and their consensus sets.
//!
//! Observations are processed in id order, so outputs do not depend on the
//! order neighbors are supplied in.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::geom::{l1_geodesic_median, triangulate_midpoint_with, GeomError, Quat, Ray, Vec3};
use crate::relpose::RelativePoseEstimate;
use crate::scalar::Real;
use crate::scene::{ImageRecord, Pose};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("no valid translation hypothesis: all {pairs} neighbor pairs degenerate or behind a camera")]
    NoValidHypothesis { pairs: usize },
    #[error("{0} neighbor(s) given; at least 2 are required")]
    TooFewNeighbors(usize),
    #[error("no rotation hypotheses")]
    NoRotationHypotheses,
    #[error("invalid fusion configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FusionConfig {
    /// Neighbors retrieved per query.
    pub n_neighbors: usize,
    /// Inlier threshold shared by the translation and rotation stages.
    pub angle_thresh_deg: f64,
    /// Ray pairs with `|d1·d2| > 1 − parallel_eps` are skipped.
    pub parallel_eps: f64,
    /// Surviving translation hypotheses required for a result.
    pub min_usable_pairs: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            n_neighbors: 5,
            angle_thresh_deg: 20.0,
            parallel_eps: 1e-6,
            min_usable_pairs: 1,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), FusionError> {
        if self.n_neighbors < 2 {
            return Err(FusionError::InvalidConfig("n_neighbors must be at least 2".into()));
        }
        if !(self.angle_thresh_deg > 0.0 && self.angle_thresh_deg < 180.0) {
            return Err(FusionError::InvalidConfig(
                "angle threshold must lie in (0, 180) degrees".into(),
            ));
        }
        if !(self.parallel_eps > 0.0 && self.parallel_eps < 1.0) {
            return Err(FusionError::InvalidConfig("parallel_eps must lie in (0, 1)".into()));
        }
        if self.min_usable_pairs == 0 {
            return Err(FusionError::InvalidConfig("min_usable_pairs must be at least 1".into()));
        }
        Ok(())
    }
}

/// One retrieved database image with its relative pose estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborObservation<T> {
    pub db_id: String,
    pub db_pose: Pose<T>,
    pub estimate: RelativePoseEstimate<T>,
    /// Predicted direction toward the query in world coordinates.
    pub world_dir: Vec3<T>,
}

impl<T: Real> NeighborObservation<T> {
    pub fn new(db_id: impl Into<String>, db_pose: Pose<T>, estimate: RelativePoseEstimate<T>) -> Self {
        let d = db_pose.rotation.rotate(estimate.dt_dir);
        Self {
            db_id: db_id.into(),
            db_pose,
            estimate,
            world_dir: d / d.norm(),
        }
    }
}

impl NeighborObservation<f64> {
    pub fn from_record(record: &ImageRecord, estimate: RelativePoseEstimate<f64>) -> Self {
        Self::new(record.id.clone(), record.pose, estimate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationHypothesis<T> {
    /// Positions of the generating pair in id-sorted observation order.
    pub pair: (usize, usize),
    pub point: Vec3<T>,
    /// Ids of the supporting observations outside the pair.
    pub inliers: Vec<String>,
    /// Length of the common perpendicular of the two rays.
    pub gap: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationDiagnostics<T> {
    /// Surviving hypotheses in enumeration order.
    pub hypotheses: Vec<TranslationHypothesis<T>>,
    /// Pairs rejected as near-parallel or triangulating behind a camera.
    pub discarded: usize,
    pub best_inliers: usize,
    /// Number of hypotheses sharing `best_inliers`.
    pub tied: usize,
    /// Mean gap of the winning hypotheses.
    pub gap: T,
}

impl<T> TranslationDiagnostics<T> {
    pub fn is_tie(&self) -> bool {
        self.tied > 1
    }
}

/// Whether `obs` predicts a direction within `thresh_deg` of the ray toward `point`.
fn supports<T: Real>(obs: &NeighborObservation<T>, point: Vec3<T>, thresh_deg: T) -> bool {
    let to_point = point - obs.db_pose.center;
    if to_point.norm() == T::zero() {
        return false;
    }
    obs.world_dir.angle_deg(to_point) <= thresh_deg
}

fn id_order<T>(obs: &[NeighborObservation<T>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..obs.len()).collect();
    order.sort_by(|&a, &b| obs[a].db_id.cmp(&obs[b].db_id).then(a.cmp(&b)));
    order
}

/// Triangulates every neighbor pair and picks the best-supported query center.
pub fn fuse_translation<T: Real>(
    obs: &[NeighborObservation<T>],
    cfg: &FusionConfig,
) -> Result<(Vec3<T>, TranslationDiagnostics<T>), FusionError> {
    if obs.len() < 2 {
        return Err(FusionError::TooFewNeighbors(obs.len()));
    }
    let sorted: Vec<&NeighborObservation<T>> = id_order(obs).into_iter().map(|i| &obs[i]).collect();
    let thresh = T::lit(cfg.angle_thresh_deg);
    let eps = T::lit(cfg.parallel_eps);
    let n = sorted.len();

    let mut hypotheses = Vec::with_capacity(n * (n - 1) / 2);
    let mut discarded = 0;
    for k in 0..n {
        for m in k + 1..n {
            let (a, b) = (sorted[k], sorted[m]);
            let ra = Ray::new(a.db_pose.center, a.world_dir)?;
            let rb = Ray::new(b.db_pose.center, b.world_dir)?;
            let tri = match triangulate_midpoint_with(&ra, &rb, eps) {
                Ok(t) if t.s1 > T::zero() && t.s2 > T::zero() => t,
                _ => {
                    discarded += 1;
                    continue;
                }
            };
            let inliers = sorted
                .iter()
                .enumerate()
                .filter(|&(r, o)| r != k && r != m && supports(o, tri.point, thresh))
                .map(|(_, o)| o.db_id.clone())
                .collect();
            hypotheses.push(TranslationHypothesis {
                pair: (k, m),
                point: tri.point,
                inliers,
                gap: tri.gap,
            });
        }
    }

    if hypotheses.is_empty() || hypotheses.len() < cfg.min_usable_pairs {
        return Err(FusionError::NoValidHypothesis { pairs: n * (n - 1) / 2 });
    }

    let best_inliers = hypotheses.iter().map(|h| h.inliers.len()).max().unwrap_or(0);
    let mut sum = Vec3::zero();
    let mut gap = T::zero();
    let mut tied = 0usize;
    for h in hypotheses.iter().filter(|h| h.inliers.len() == best_inliers) {
        sum += h.point;
        gap = gap + h.gap;
        tied += 1;
    }
    let count = T::lit(tied as f64);
    let diag = TranslationDiagnostics {
        hypotheses,
        discarded,
        best_inliers,
        tied,
        gap: gap / count,
    };
    Ok((sum / count, diag))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotationHypothesis<T> {
    /// Index of the source observation.
    pub source: usize,
    pub db_id: String,
    pub quat: Quat<T>,
    /// Filled in by [`fuse_rotation`].
    pub inlier_count: usize,
}

/// `R_q = R_db ⊗ dq` for each observation, in input order.
pub fn rotation_hypotheses<T: Real>(obs: &[NeighborObservation<T>]) -> Vec<RotationHypothesis<T>> {
    obs.iter()
        .enumerate()
        .map(|(j, o)| RotationHypothesis {
            source: j,
            db_id: o.db_id.clone(),
            quat: o.db_pose.rotation * o.estimate.dq,
            inlier_count: 0,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotationDiagnostics<T> {
    /// Hypotheses in id order with their inlier counts.
    pub hypotheses: Vec<RotationHypothesis<T>>,
    pub best_inliers: usize,
    pub tied: usize,
    /// Hypotheses fed to the median on a tie (0 otherwise).
    pub averaged: usize,
}

impl<T> RotationDiagnostics<T> {
    pub fn is_tie(&self) -> bool {
        self.tied > 1
    }
}

/// Consensus over rotation hypotheses.
pub fn fuse_rotation<T: Real>(
    hyps: &[RotationHypothesis<T>],
    cfg: &FusionConfig,
) -> Result<(Quat<T>, RotationDiagnostics<T>), FusionError> {
    if hyps.is_empty() {
        return Err(FusionError::NoRotationHypotheses);
    }
    let mut sorted: Vec<RotationHypothesis<T>> = hyps.to_vec();
    sorted.sort_by(|a, b| a.db_id.cmp(&b.db_id).then(a.source.cmp(&b.source)));
    let thresh = T::lit(cfg.angle_thresh_deg);
    let n = sorted.len();

    let close: Vec<Vec<bool>> = (0..n)
        .map(|j| {
            (0..n)
                .map(|i| i != j && sorted[i].quat.angle_deg(sorted[j].quat) <= thresh)
                .collect()
        })
        .collect();
    for (j, h) in sorted.iter_mut().enumerate() {
        h.inlier_count = close[j].iter().filter(|&&c| c).count();
    }
    let best_inliers = sorted.iter().map(|h| h.inlier_count).max().unwrap_or(0);
    let winners: Vec<usize> = (0..n).filter(|&j| sorted[j].inlier_count == best_inliers).collect();

    let (quat, averaged) = if winners.len() == 1 {
        (sorted[winners[0]].quat, 0)
    } else {
        let mut members = BTreeSet::new();
        for &w in &winners {
            members.insert(w);
            members.extend((0..n).filter(|&i| close[w][i]));
        }
        let qs: Vec<Quat<T>> = members.iter().map(|&i| sorted[i].quat).collect();
        (l1_geodesic_median(&qs)?, qs.len())
    };
    let tied = winners.len();
    Ok((
        quat,
        RotationDiagnostics {
            hypotheses: sorted,
            best_inliers,
            tied,
            averaged,
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationResult<T> {
    pub query_id: String,
    pub pose: Pose<T>,
    pub translation_inliers: usize,
    pub rotation_inliers: usize,
    pub tie_translation: bool,
    pub tie_rotation: bool,
    /// Neighbor ids in the order supplied.
    pub neighbor_ids: Vec<String>,
    /// Mean ray gap of the winning translation hypotheses (meters).
    pub translation_gap: T,
    /// False when more than two neighbors were given but the winning
    /// translation has no supporting observation.
    pub translation_supported: bool,
}

/// Full 6-DoF query pose from neighbor observations.
pub fn localize<T: Real>(
    query_id: &str,
    neighbors: &[NeighborObservation<T>],
    cfg: &FusionConfig,
) -> Result<LocalizationResult<T>, FusionError> {
    if neighbors.len() < 2 {
        return Err(FusionError::TooFewNeighbors(neighbors.len()));
    }
    let (center, tdiag) = fuse_translation(neighbors, cfg)?;
    let hyps = rotation_hypotheses(neighbors);
    let (rotation, rdiag) = fuse_rotation(&hyps, cfg)?;
    Ok(LocalizationResult {
        query_id: query_id.to_string(),
        pose: Pose::new(rotation, center),
        translation_inliers: tdiag.best_inliers,
        rotation_inliers: rdiag.best_inliers,
        tie_translation: tdiag.is_tie(),
        tie_rotation: rdiag.is_tie(),
        neighbor_ids: neighbors.iter().map(|o| o.db_id.clone()).collect(),
        translation_gap: tdiag.gap,
        translation_supported: neighbors.len() == 2 || tdiag.best_inliers > 0,
    })
}
