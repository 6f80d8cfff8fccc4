mod common;

use common::{brute_force_inlier_table, corrupted, random_pose, random_quat, random_unit, Problem};
use rand::seq::SliceRandom;
use rand::Rng;
use reloc::fusion::{fuse_translation, localize, rotation_hypotheses, FusionConfig, FusionError, NeighborObservation};
use reloc::relpose::{relative_pose, synth_predict, NoiseConfig, RelativePoseEstimate};
use reloc::{Posed, Quatd, Vec3d};

fn cfg() -> FusionConfig {
    FusionConfig::default()
}

#[test]
fn exact_recovery_on_random_scenes() {
    let mut rng = common::rng(1);
    for n in [2, 3, 5, 8] {
        for _ in 0..50 {
            let p = Problem::random(&mut rng, n);
            let obs = p.observations(&p.exact_estimates());
            let res = localize("q", &obs, &cfg()).unwrap();
            assert!((res.pose.center - p.query.center).norm() < 1e-6, "n={n}");
            assert!(res.pose.rotation.angle_deg(p.query.rotation) < 1e-4, "n={n}");
            assert_eq!(res.translation_inliers, n - 2);
            assert_eq!(res.rotation_inliers, n - 1);
            assert!(res.translation_supported);
        }
    }
}

#[test]
fn rigid_equivariance() {
    let mut rng = common::rng(2);
    for _ in 0..100 {
        let p = Problem::random(&mut rng, 5);
        let mut est = p.exact_estimates();
        est[1] = corrupted(&mut rng);
        let obs = p.observations(&est);
        let g_rot = random_quat(&mut rng);
        let g_t = Vec3d::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), 3.0);
        let moved: Vec<NeighborObservation<f64>> =
            p.db.iter()
                .zip(&est)
                .map(|((id, pose), e)| NeighborObservation::new(id.clone(), pose.transformed(g_rot, g_t), *e))
                .collect();
        let a = localize("q", &obs, &cfg());
        let b = localize("q", &moved, &cfg());
        match (a, b) {
            (Ok(a), Ok(b)) => {
                let expect = a.pose.transformed(g_rot, g_t);
                assert!((b.pose.center - expect.center).norm() < 1e-6);
                assert!(b.pose.rotation.angle_deg(expect.rotation) < 1e-4);
                assert_eq!(a.translation_inliers, b.translation_inliers);
                assert_eq!(a.rotation_inliers, b.rotation_inliers);
                assert_eq!(a.tie_translation, b.tie_translation);
                assert_eq!(a.tie_rotation, b.tie_rotation);
            }
            (Err(_), Err(_)) => {}
            (a, b) => panic!("outcome differs: {a:?} vs {b:?}"),
        }
    }
}

#[test]
fn neighbor_order_does_not_matter() {
    let mut rng = common::rng(3);
    for _ in 0..100 {
        let p = Problem::random(&mut rng, 6);
        let mut est = p.exact_estimates();
        est[0] = corrupted(&mut rng);
        est[4] = corrupted(&mut rng);
        let obs = p.observations(&est);
        let mut shuffled = obs.clone();
        shuffled.shuffle(&mut rng);
        let a = localize("q", &obs, &cfg()).unwrap();
        let b = localize("q", &shuffled, &cfg()).unwrap();
        assert_eq!(a.pose, b.pose);
        assert_eq!(a.translation_inliers, b.translation_inliers);
        assert_eq!(a.rotation_inliers, b.rotation_inliers);
        assert_eq!(a.tie_translation, b.tie_translation);
        assert_eq!(a.tie_rotation, b.tie_rotation);
        assert_eq!(a.translation_gap, b.translation_gap);
        let mut ids_a = a.neighbor_ids.clone();
        let mut ids_b = b.neighbor_ids.clone();
        ids_a.sort();
        ids_b.sort();
        assert_eq!(ids_a, ids_b);
    }
}

#[test]
fn inlier_counts_match_brute_force() {
    let mut rng = common::rng(4);
    for trial in 0..300 {
        let p = Problem::random(&mut rng, 5 + trial % 3);
        let mut est = p.exact_estimates();
        for e in est.iter_mut() {
            if rng.random_bool(0.3) {
                *e = corrupted(&mut rng);
            }
        }
        let obs = p.observations(&est);
        let oracle = brute_force_inlier_table(&obs, 20.0, 1e-6);
        match fuse_translation(&obs, &cfg()) {
            Ok((_, diag)) => {
                let got: Vec<((usize, usize), usize)> =
                    diag.hypotheses.iter().map(|h| (h.pair, h.inliers.len())).collect();
                assert_eq!(got, oracle);
                let n = obs.len();
                assert_eq!(diag.discarded + diag.hypotheses.len(), n * (n - 1) / 2);
            }
            Err(FusionError::NoValidHypothesis { .. }) => assert!(oracle.is_empty()),
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn collinear_neighbors_have_no_hypothesis() {
    let mut rng = common::rng(5);
    let query = random_pose(&mut rng, 1.0);
    let axis = random_unit(&mut rng);
    let db: Vec<NeighborObservation<f64>> = (1..=5)
        .map(|k| {
            let pose = Posed::new(random_quat(&mut rng), query.center - axis * (k as f64 * 0.4));
            NeighborObservation::new(format!("db{k}"), pose, relative_pose(&pose, &query).unwrap())
        })
        .collect();
    match localize("q", &db, &cfg()) {
        Err(FusionError::NoValidHypothesis { pairs }) => assert_eq!(pairs, 10),
        other => panic!("expected NoValidHypothesis, got {other:?}"),
    }
}

#[test]
fn single_neighbor_is_rejected() {
    let mut rng = common::rng(6);
    let p = Problem::random(&mut rng, 1);
    let obs = p.observations(&p.exact_estimates());
    assert!(matches!(
        localize("q", &obs, &cfg()),
        Err(FusionError::TooFewNeighbors(1))
    ));
}

#[test]
fn rotation_hypotheses_recover_query_rotation() {
    let mut rng = common::rng(7);
    for _ in 0..1000 {
        let db = random_pose(&mut rng, 5.0);
        let q = random_pose(&mut rng, 5.0);
        let Ok(est) = relative_pose(&db, &q) else { continue };
        let hyps = rotation_hypotheses(&[NeighborObservation::new("d", db, est)]);
        assert!(hyps[0].quat.angle_deg(q.rotation) < 1e-9);
    }
    assert!(rotation_hypotheses::<f64>(&[]).is_empty());
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[test]
fn errors_grow_with_noise() {
    let mut rng = common::rng(8);
    let problems: Vec<Problem> = (0..200).map(|_| Problem::random(&mut rng, 5)).collect();
    let mut prev = (0.0, 0.0);
    for sigma in [2.0, 5.0, 10.0] {
        let noise = NoiseConfig {
            sigma_rot_deg: sigma,
            sigma_dir_deg: sigma,
            outlier_prob: 0.0,
            seed: 11,
        };
        let mut pos = Vec::new();
        let mut ori = Vec::new();
        for (i, p) in problems.iter().enumerate() {
            let est: Vec<RelativePoseEstimate<f64>> = p
                .exact_estimates()
                .iter()
                .zip(&p.db)
                .map(|(gt, (id, _))| synth_predict(gt, &noise, &format!("q{i}"), id))
                .collect();
            if let Ok(res) = localize("q", &p.observations(&est), &cfg()) {
                pos.push((res.pose.center - p.query.center).norm());
                ori.push(res.pose.rotation.angle_deg(p.query.rotation));
            }
        }
        let cur = (median(pos), median(ori));
        assert!(
            cur.0 >= prev.0 && cur.1 >= prev.1,
            "sigma {sigma}: {cur:?} after {prev:?}"
        );
        prev = cur;
    }
}

#[test]
fn generic_over_f32() {
    let mut rng = common::rng(9);
    let p = Problem::random(&mut rng, 5);
    let obs: Vec<NeighborObservation<f32>> =
        p.db.iter()
            .zip(p.exact_estimates())
            .map(|((id, pose), e)| NeighborObservation::new(id.clone(), pose.cast(), e.cast()))
            .collect();
    let res = localize("q", &obs, &cfg()).unwrap();
    let center = res.pose.center.cast::<f64>();
    assert!((center - p.query.center).norm() < 1e-3);
    let rot: Quatd = res.pose.rotation.cast();
    assert!(rot.angle_deg(p.query.rotation) < 0.05);
}
