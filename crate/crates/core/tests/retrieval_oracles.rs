mod common;

use std::collections::BTreeSet;

use common::{random_pose, random_quat};
use rand::Rng;
use reloc::retrieval::{
    rank_by_dot, rank_by_pose_metric, viewpoint_ranks, viewpoint_sets, FeatureStore, RetrievalError, ScoreKind,
};
use reloc::scene::{apply_rigid_transform, ImageRecord, SceneDatabase, Split};
use reloc::Vec3d;

fn random_store<R: Rng>(rng: &mut R, rows: usize, dim: usize) -> FeatureStore {
    let ids = (0..rows).map(|i| format!("img{i:04}")).collect();
    // coarse values so exact score ties actually occur
    let data = (0..rows * dim)
        .map(|_| rng.random_range(-3i32..=3) as f32 * 0.5)
        .collect();
    FeatureStore::new(dim, ids, data).unwrap()
}

fn sort_oracle_dot(query_id: &str, q: &[f32], store: &FeatureStore) -> Vec<String> {
    let mut all: Vec<(f64, String)> = (0..store.len())
        .filter(|&i| store.ids()[i] != query_id)
        .map(|i| {
            let s: f64 = q.iter().zip(store.row(i)).map(|(a, b)| *a as f64 * *b as f64).sum();
            (s, store.ids()[i].clone())
        })
        .collect();
    all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(&b.1)));
    all.into_iter().map(|(_, id)| id).collect()
}

#[test]
fn rank_by_dot_matches_full_sort() {
    let mut rng = common::rng(21);
    for _ in 0..300 {
        let rows = rng.random_range(2..40);
        let dim = rng.random_range(1..6);
        let store = random_store(&mut rng, rows, dim);
        let self_row = rng.random_range(0..rows);
        let query_id = store.ids()[self_row].clone();
        let q = store.row(self_row).to_vec();
        let n = rng.random_range(1..rows);
        let got = rank_by_dot(&query_id, &q, &store, n).unwrap();
        let want = sort_oracle_dot(&query_id, &q, &store);
        assert_eq!(got.ranked_ids, want[..n]);
        assert_eq!(got.kind, ScoreKind::Similarity);
        assert!(got.scores.windows(2).all(|w| w[0] >= w[1]));
        assert!(!got.ranked_ids.contains(&query_id));
    }
}

#[test]
fn rank_by_dot_errors() {
    let mut rng = common::rng(22);
    let store = random_store(&mut rng, 4, 3);
    assert!(matches!(
        rank_by_dot("x", &[1.0, 2.0], &store, 1),
        Err(RetrievalError::DimMismatch { expected: 3, got: 2 })
    ));
    assert!(matches!(
        rank_by_dot("img0000", &[1.0, 2.0, 3.0], &store, 4),
        Err(RetrievalError::NTooLarge { n: 4, available: 3 })
    ));
}

fn records<R: Rng>(rng: &mut R, n: usize) -> Vec<ImageRecord> {
    (0..n)
        .map(|i| ImageRecord {
            id: format!("s/seq-01/frame-{i:06}"),
            scene: "s".into(),
            pose: random_pose(rng, 3.0),
            split: Split::Train,
        })
        .collect()
}

#[test]
fn rank_by_pose_metric_matches_full_sort() {
    let mut rng = common::rng(23);
    for _ in 0..200 {
        let n = rng.random_range(1..30);
        let recs = records(&mut rng, n);
        let refs: Vec<&ImageRecord> = recs.iter().collect();
        let query = random_pose(&mut rng, 3.0);
        let beta = rng.random_range(0.0..3.0);
        let got = rank_by_pose_metric("q", &query, &refs, beta);
        let mut want: Vec<(f64, &str)> = recs
            .iter()
            .map(|r| {
                let pos = (r.pose.center - query.center).norm();
                let a = r.pose.rotation.to_array();
                let b = query.rotation.to_array();
                let minus: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                let plus: f64 = a.iter().zip(b).map(|(x, y)| (x + y) * (x + y)).sum::<f64>().sqrt();
                (pos + beta * minus.min(plus), r.id.as_str())
            })
            .collect();
        want.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then_with(|| a.1.cmp(b.1)));
        let want_ids: Vec<&str> = want.iter().map(|w| w.1).collect();
        assert_eq!(got.ranked_ids, want_ids);
        for (s, w) in got.scores.iter().zip(&want) {
            assert!((s - w.0).abs() <= 1e-9);
        }
        assert_eq!(got.kind, ScoreKind::Distance);
    }
}

#[test]
fn pose_ranking_survives_rigid_transform() {
    let mut rng = common::rng(24);
    for _ in 0..50 {
        let recs = records(&mut rng, 20);
        let db = SceneDatabase::new(recs).unwrap();
        let g_rot = random_quat(&mut rng);
        let g_t = Vec3d::new(5.0, -2.0, 1.0);
        let moved = apply_rigid_transform(&db, g_rot, g_t);
        let query = &db.records()[3];
        let moved_query = moved.get(&query.id).unwrap();
        let a = rank_by_pose_metric(&query.id, &query.pose, &db.train("s"), 1.0);
        let b = rank_by_pose_metric(&moved_query.id, &moved_query.pose, &moved.train("s"), 1.0);
        assert_eq!(a.ranked_ids.len(), 19);
        for (x, y) in a.scores.iter().zip(&b.scores) {
            assert!((x - y).abs() < 1e-9);
        }
        // ordering can only differ between near-equal scores
        for (i, (x, y)) in a.ranked_ids.iter().zip(&b.ranked_ids).enumerate() {
            if x != y {
                assert!((a.scores[i] - b.scores[i]).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn viewpoint_sets_are_disjoint_windows() {
    let mut rng = common::rng(25);
    let recs = records(&mut rng, 400);
    let refs: Vec<&ImageRecord> = recs.iter().collect();
    let ranked = rank_by_pose_metric("q", &random_pose(&mut rng, 3.0), &refs, 1.0);
    let sets = viewpoint_sets(&ranked, 5, 50, 8).unwrap();
    assert_eq!(sets.len(), 8);
    let mut seen = BTreeSet::new();
    for (k, set) in sets.iter().enumerate() {
        let (first, last) = viewpoint_ranks(k, 5, 50);
        assert_eq!((first, last), (k * 50 + 1, k * 50 + 5));
        assert_eq!(set[..], ranked.ranked_ids[first - 1..last]);
        for id in set {
            assert!(seen.insert(id.clone()));
        }
    }
    assert_eq!(seen.len(), 40);

    assert!(matches!(
        viewpoint_sets(&ranked, 5, 60, 8),
        Err(RetrievalError::InsufficientRanking {
            needed: 425,
            available: 400
        })
    ));
    // interval equal to the set size tiles the ranking
    let tiled = viewpoint_sets(&ranked, 5, 5, 80).unwrap();
    let flat: Vec<String> = tiled.concat();
    assert_eq!(flat, ranked.ranked_ids);
}
