//! Error metrics, per-scene median reports, and experiment runners.

mod report;
mod runner;

use thiserror::Error;

use crate::fusion::FusionError;
use crate::geom::Vec3;
use crate::retrieval::RetrievalError;
use crate::scene::Pose;

pub use report::{
    write_summary_csv, write_viewpoint_csv, QueryRecord, SceneReport, Ties, ViewpointColumn, ViewpointReport,
    ViewpointScene,
};
pub use runner::{run_pipeline, run_viewpoint_experiment, RelposeSource, RetrievalSource, ViewpointConfig};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty input")]
    EmptyInput,
    #[error("MissingPrediction: no relative pose for (query `{query}`, db `{db}`)")]
    MissingPrediction { query: String, db: String },
    #[error("unknown query id `{0}`")]
    UnknownQuery(String),
    #[error("retrieval for query `{query}`: {source}")]
    Retrieval { query: String, source: RetrievalError },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseError {
    pub position_m: f64,
    pub orientation_deg: f64,
}

/// Center distance and geodesic rotation angle between `est` and `gt`.
pub fn pose_error(est: &Pose<f64>, gt: &Pose<f64>) -> PoseError {
    let d: Vec3<f64> = est.center - gt.center;
    PoseError {
        position_m: d.norm(),
        orientation_deg: est.rotation.angle_deg(gt.rotation),
    }
}

/// Median; even lengths average the two middle elements.
pub fn median(values: &[f64]) -> Result<f64, EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Ok(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Quat;

    #[test]
    fn pose_error_examples() {
        let gt = Pose::new(Quat::rz_deg(5.0), Vec3::new(1.0, 1.0, 1.0));
        assert_eq!(
            pose_error(&gt, &gt),
            PoseError {
                position_m: 0.0,
                orientation_deg: 0.0
            }
        );
        let moved = Pose::new(gt.rotation, gt.center + Vec3::new(0.0, 3.0, 4.0));
        assert_eq!(pose_error(&moved, &gt).position_m, 5.0);
        let turned = Pose::new(Quat::rz_deg(95.0), gt.center);
        assert!((pose_error(&turned, &gt).orientation_deg - 90.0).abs() < 1e-12);
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 2.5);
        assert_eq!(median(&[7.0]).unwrap(), 7.0);
        assert!(matches!(median(&[]), Err(EvalError::EmptyInput)));
    }
}
