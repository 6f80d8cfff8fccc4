//! Training-pair construction: each train image is matched with one
//! partner from the same scene whose view overlaps its own.

use std::io::Write;

use rand::Rng;
use serde::Serialize;

use super::{ImageRecord, SceneDatabase, SceneError};
use crate::relpose::{pose_metric, relative_pose, RelativePoseEstimate};
use crate::rng::keyed_rng;

pub const DEFAULT_PAIR_MAX_DIST_M: f64 = 0.5;
pub const DEFAULT_PAIR_MAX_ANGLE_DEG: f64 = 40.0;

/// Centers closer than this cannot define a translation direction.
const MIN_BASELINE_M: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub id_a: String,
    pub id_b: String,
    /// Relative pose of `b` seen from `a`.
    pub gt_relative: RelativePoseEstimate<f64>,
}

/// One pair per train image, in id order.
///
/// The partner is drawn uniformly among same-scene train images within
/// `max_dist_m` and `max_angle_deg`. When none qualifies, the nearest image
/// under the pose metric (β = 1) is used instead. The draw for each image is
/// keyed by `(seed, id)`, so the output is a pure function of the inputs.
pub fn generate_pairs(
    db: &SceneDatabase,
    max_dist_m: f64,
    max_angle_deg: f64,
    seed: u64,
) -> Result<Vec<TrainingPair>, SceneError> {
    let mut pairs = Vec::new();
    for scene in db.scenes() {
        let train = db.train(&scene);
        if train.len() < 2 {
            return Err(SceneError::SingletonScene {
                scene,
                count: train.len(),
            });
        }
        for a in &train {
            let others = train
                .iter()
                .filter(|b| b.id != a.id && (b.pose.center - a.pose.center).norm() >= MIN_BASELINE_M);
            let candidates: Vec<&&ImageRecord> = others
                .clone()
                .filter(|b| {
                    (b.pose.center - a.pose.center).norm() <= max_dist_m
                        && a.pose.rotation.angle_deg(b.pose.rotation) <= max_angle_deg
                })
                .collect();
            let partner = if candidates.is_empty() {
                others.min_by(|x, y| {
                    let dx = pose_metric(&a.pose, &x.pose, 1.0);
                    let dy = pose_metric(&a.pose, &y.pose, 1.0);
                    dx.total_cmp(&dy).then_with(|| x.id.cmp(&y.id))
                })
            } else {
                let mut rng = keyed_rng(seed, &["pair", &a.id]);
                Some(candidates[rng.random_range(0..candidates.len())])
            };
            // every other image shares this center
            let Some(b) = partner else {
                return Err(SceneError::SingletonScene {
                    scene: scene.clone(),
                    count: 1,
                });
            };
            let gt_relative = relative_pose(&a.pose, &b.pose).map_err(|source| SceneError::Relpose {
                a: a.id.clone(),
                b: b.id.clone(),
                source,
            })?;
            pairs.push(TrainingPair {
                id_a: a.id.clone(),
                id_b: b.id.clone(),
                gt_relative,
            });
        }
    }
    Ok(pairs)
}

#[derive(Serialize)]
struct PairLine<'a> {
    a: &'a str,
    b: &'a str,
    dq: [f64; 4],
    dt: [f64; 3],
}

/// JSON lines `{"a", "b", "dq": [w,x,y,z], "dt": [x,y,z]}`.
pub fn write_pairs_jsonl<W: Write>(mut out: W, pairs: &[TrainingPair]) -> std::io::Result<()> {
    for p in pairs {
        let line = PairLine {
            a: &p.id_a,
            b: &p.id_b,
            dq: p.gt_relative.dq.to_array(),
            dt: p.gt_relative.dt_dir.to_array(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
