use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use super::report::{QueryRecord, SceneReport, Ties, ViewpointColumn, ViewpointReport, ViewpointScene};
use super::{pose_error, EvalError};
use crate::fusion::{localize, FusionConfig, NeighborObservation};
use crate::relpose::{relative_pose, synth_predict, NoiseConfig, PredictionSet, RelativePoseEstimate};
use crate::retrieval::{rank_by_dot, rank_by_pose_metric, viewpoint_ranks, viewpoint_sets, FeatureStore};
use crate::scene::{ImageRecord, SceneDatabase};

/// How database neighbors are chosen for a query.
#[derive(Debug, Clone, Copy)]
pub enum RetrievalSource<'a> {
    /// Dot product of stored descriptors; the store must cover queries and train images.
    Features(&'a FeatureStore),
    /// Ground-truth ranking by the pose metric with weight `beta`.
    PoseOracle { beta: f64 },
}

/// Where relative pose estimates come from.
#[derive(Debug, Clone, Copy)]
pub enum RelposeSource<'a> {
    Predictions(&'a PredictionSet),
    Synth(NoiseConfig),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewpointConfig {
    pub set_size: usize,
    pub interval: usize,
    pub count: usize,
    /// Rotation weight of the ranking metric.
    pub beta: f64,
}

impl Default for ViewpointConfig {
    fn default() -> Self {
        Self {
            set_size: 5,
            interval: 50,
            count: 8,
            beta: 1.0,
        }
    }
}

impl ViewpointConfig {
    /// Ranked list length needed to fill every set.
    pub fn required_ranks(&self) -> usize {
        if self.count == 0 {
            0
        } else {
            (self.count - 1) * self.interval + self.set_size
        }
    }
}

/// Estimate for `(query, db)`. The outer error is fatal; the inner one is a
/// per-query failure.
fn estimate_for(
    source: &RelposeSource<'_>,
    query: &ImageRecord,
    db: &ImageRecord,
) -> Result<Result<RelativePoseEstimate<f64>, String>, EvalError> {
    match source {
        RelposeSource::Predictions(set) => {
            set.get(&query.id, &db.id)
                .copied()
                .map(Ok)
                .ok_or_else(|| EvalError::MissingPrediction {
                    query: query.id.clone(),
                    db: db.id.clone(),
                })
        }
        RelposeSource::Synth(cfg) => Ok(relative_pose(&db.pose, &query.pose)
            .map(|gt| synth_predict(&gt, cfg, &query.id, &db.id))
            .map_err(|e| format!("{}: {e}", db.id))),
    }
}

fn localize_query(
    db: &SceneDatabase,
    query: &ImageRecord,
    neighbor_ids: Vec<String>,
    relpose: &RelposeSource<'_>,
    cfg: &FusionConfig,
) -> Result<QueryRecord, EvalError> {
    let mut obs = Vec::with_capacity(neighbor_ids.len());
    for id in &neighbor_ids {
        let rec = db.get(id).ok_or_else(|| EvalError::UnknownQuery(id.clone()))?;
        match estimate_for(relpose, query, rec)? {
            Ok(est) => obs.push(NeighborObservation::from_record(rec, est)),
            Err(reason) => return Ok(QueryRecord::failed(&query.id, neighbor_ids, reason)),
        }
    }
    match localize(&query.id, &obs, cfg) {
        Ok(res) => {
            let err = pose_error(&res.pose, &query.pose);
            Ok(QueryRecord {
                id: query.id.clone(),
                pos_err_m: Some(err.position_m),
                ori_err_deg: Some(err.orientation_deg),
                translation_inliers: res.translation_inliers,
                rotation_inliers: res.rotation_inliers,
                ties: Ties {
                    translation: res.tie_translation,
                    rotation: res.tie_rotation,
                },
                neighbors: neighbor_ids,
                failure: None,
            })
        }
        Err(e) => {
            log::debug!("query {} failed: {e}", query.id);
            Ok(QueryRecord::failed(&query.id, neighbor_ids, e.to_string()))
        }
    }
}

/// Runs `f` over `items` on `jobs` threads (0 = rayon default); results keep input order.
fn par_map<I: Sync, R: Send>(
    jobs: usize,
    items: &[I],
    f: impl Fn(&I) -> Result<R, EvalError> + Sync + Send,
) -> Result<Vec<R>, EvalError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| EvalError::ThreadPool(e.to_string()))?;
    pool.install(|| items.par_iter().map(&f).collect::<Vec<_>>())
        .into_iter()
        .collect()
}

fn sorted_queries<'a>(queries: &[&'a ImageRecord]) -> Vec<&'a ImageRecord> {
    let mut q = queries.to_vec();
    q.sort_by(|a, b| a.id.cmp(&b.id));
    q
}

/// Retrieve, estimate, localize and score every query; one report per scene.
///
/// Neighbors are drawn from the train split of the query's scene. A
/// missing prediction aborts the run; fusion failures are recorded on the
/// query and excluded from the medians.
pub fn run_pipeline(
    db: &SceneDatabase,
    queries: &[&ImageRecord],
    retrieval: &RetrievalSource<'_>,
    relpose: &RelposeSource<'_>,
    cfg: &FusionConfig,
    jobs: usize,
) -> Result<Vec<SceneReport>, EvalError> {
    cfg.validate()?;
    if let RelposeSource::Synth(noise) = relpose {
        noise.validate().map_err(|e| EvalError::Config(e.to_string()))?;
    }
    let queries = sorted_queries(queries);
    let scenes: Vec<String> = {
        let mut s: Vec<String> = queries.iter().map(|q| q.scene.clone()).collect();
        s.sort();
        s.dedup();
        s
    };
    let train: HashMap<&str, Vec<&ImageRecord>> = scenes.iter().map(|s| (s.as_str(), db.train(s))).collect();
    let stores: HashMap<&str, FeatureStore> = match retrieval {
        RetrievalSource::Features(store) => scenes
            .iter()
            .map(|s| {
                let ids: Vec<&str> = train[s.as_str()].iter().map(|r| r.id.as_str()).collect();
                store
                    .subset(&ids)
                    .map(|sub| (s.as_str(), sub))
                    .map_err(|source| EvalError::Retrieval {
                        query: format!("<scene {s}>"),
                        source,
                    })
            })
            .collect::<Result<_, _>>()?,
        RetrievalSource::PoseOracle { .. } => HashMap::new(),
    };

    let records = par_map(jobs, &queries, |q| {
        let retrieval_err = |source| EvalError::Retrieval {
            query: q.id.clone(),
            source,
        };
        let neighbors: Vec<String> = match retrieval {
            RetrievalSource::Features(store) => {
                let vec = store
                    .get(&q.id)
                    .ok_or_else(|| retrieval_err(crate::retrieval::RetrievalError::UnknownId(q.id.clone())))?;
                rank_by_dot(&q.id, vec, &stores[q.scene.as_str()], cfg.n_neighbors)
                    .map_err(retrieval_err)?
                    .ranked_ids
            }
            RetrievalSource::PoseOracle { beta } => {
                let ranked = rank_by_pose_metric(&q.id, &q.pose, &train[q.scene.as_str()], *beta);
                if ranked.len() < cfg.n_neighbors {
                    return Err(retrieval_err(crate::retrieval::RetrievalError::NTooLarge {
                        n: cfg.n_neighbors,
                        available: ranked.len(),
                    }));
                }
                ranked.top(cfg.n_neighbors).to_vec()
            }
        };
        localize_query(db, q, neighbors, relpose, cfg)
    })?;

    let mut by_scene: BTreeMap<String, Vec<QueryRecord>> = BTreeMap::new();
    for (q, rec) in queries.iter().zip(records) {
        by_scene.entry(q.scene.clone()).or_default().push(rec);
    }
    Ok(by_scene
        .into_iter()
        .map(|(scene, recs)| SceneReport::from_records(&scene, recs))
        .collect())
}

/// Localizes every query once per ground-truth viewpoint set.
///
/// Train images of the query's scene are ranked by the pose metric and set
/// `k` takes ranks `k·interval + 1 ..= k·interval + set_size`. Scenes with
/// too few train images are skipped and recorded as such.
pub fn run_viewpoint_experiment(
    db: &SceneDatabase,
    queries: &[&ImageRecord],
    relpose: &RelposeSource<'_>,
    cfg: &FusionConfig,
    vp: &ViewpointConfig,
    jobs: usize,
) -> Result<ViewpointReport, EvalError> {
    cfg.validate()?;
    if vp.set_size < 2 {
        return Err(EvalError::Config("viewpoint sets need at least 2 images".into()));
    }
    if vp.count == 0 {
        return Err(EvalError::Config("viewpoint count must be positive".into()));
    }
    if let RelposeSource::Synth(noise) = relpose {
        noise.validate().map_err(|e| EvalError::Config(e.to_string()))?;
    }
    let queries = sorted_queries(queries);
    let mut by_scene: BTreeMap<&str, Vec<&ImageRecord>> = BTreeMap::new();
    for q in &queries {
        by_scene.entry(q.scene.as_str()).or_default().push(q);
    }

    let needed = vp.required_ranks();
    let mut scenes = Vec::with_capacity(by_scene.len());
    for (scene, scene_queries) in by_scene {
        let train = db.train(scene);
        if train.len() < needed {
            let reason = format!("InsufficientRanking: {} train images, {needed} needed", train.len());
            log::warn!("skipping scene {scene}: {reason}");
            scenes.push(ViewpointScene {
                scene: scene.to_string(),
                skipped: Some(reason),
                viewpoints: vec![],
            });
            continue;
        }

        let per_query: Vec<Vec<QueryRecord>> = par_map(jobs, &scene_queries, |q| {
            let ranked = rank_by_pose_metric(&q.id, &q.pose, &train, vp.beta);
            match viewpoint_sets(&ranked, vp.set_size, vp.interval, vp.count) {
                Ok(sets) => sets
                    .into_iter()
                    .map(|set| localize_query(db, q, set, relpose, cfg))
                    .collect(),
                Err(e) => Ok(vec![QueryRecord::failed(&q.id, vec![], e.to_string()); vp.count]),
            }
        })?;

        let mut columns: Vec<Vec<QueryRecord>> = vec![Vec::with_capacity(scene_queries.len()); vp.count];
        for recs in per_query {
            for (k, r) in recs.into_iter().enumerate() {
                columns[k].push(r);
            }
        }
        let viewpoints = columns
            .into_iter()
            .enumerate()
            .map(|(k, recs)| {
                let (first_rank, last_rank) = viewpoint_ranks(k, vp.set_size, vp.interval);
                ViewpointColumn {
                    index: k,
                    first_rank,
                    last_rank,
                    report: SceneReport::from_records(scene, recs),
                }
            })
            .collect();
        scenes.push(ViewpointScene {
            scene: scene.to_string(),
            skipped: None,
            viewpoints,
        });
    }

    Ok(ViewpointReport {
        set_size: vp.set_size,
        interval: vp.interval,
        count: vp.count,
        scenes,
    })
}
