//! Seeded synthetic scenes: smooth random camera trajectories in a box.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::geom::{Quat, Vec3};
use crate::rng::keyed_rng;
use crate::scene::{ImageRecord, Pose, SceneDatabase, SceneError, Split};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSceneConfig {
    pub scenes: Vec<String>,
    pub train_sequences: usize,
    pub test_sequences: usize,
    pub frames_per_sequence: usize,
    /// Extent of the walkable box in meters, anchored at the origin.
    pub box_size: [f64; 3],
    /// Distance travelled per frame (meters).
    pub step_m: f64,
    /// Per-frame position jitter (meters, standard deviation).
    pub jitter_m: f64,
    pub seed: u64,
}

impl Default for SynthSceneConfig {
    fn default() -> Self {
        Self {
            scenes: vec!["synth".into()],
            train_sequences: 2,
            test_sequences: 1,
            frames_per_sequence: 250,
            box_size: [3.0, 3.0, 1.5],
            step_m: 0.02,
            jitter_m: 0.01,
            seed: 0,
        }
    }
}

fn normal<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    sigma * rng.sample::<f64, _>(StandardNormal)
}

fn trajectory(cfg: &SynthSceneConfig, scene: &str, seq: usize) -> Vec<Pose<f64>> {
    let mut rng = keyed_rng(cfg.seed, &["synth", scene, &seq.to_string()]);
    let [bx, by, bz] = cfg.box_size;
    let margin = 0.1;
    let mut pos = Vec3::new(
        rng.random_range(margin * bx..(1.0 - margin) * bx),
        rng.random_range(margin * by..(1.0 - margin) * by),
        rng.random_range(0.3 * bz..0.7 * bz),
    );
    let mut yaw: f64 = rng.random_range(-180.0..180.0);
    let mut climb = 0.0;
    let mut poses = Vec::with_capacity(cfg.frames_per_sequence);
    for _ in 0..cfg.frames_per_sequence {
        yaw += normal(&mut rng, 4.0);
        climb = 0.9 * climb + normal(&mut rng, 0.02);
        let dir = Vec3::new(yaw.to_radians().cos(), yaw.to_radians().sin(), climb);
        pos += dir * (cfg.step_m / dir.norm());
        // bounce off the walls
        for (c, extent) in [(&mut pos.x, bx), (&mut pos.y, by)] {
            if *c < 0.0 || *c > extent {
                *c = c.clamp(0.0, extent);
                yaw += 180.0;
            }
        }
        if pos.z < 0.0 || pos.z > bz {
            pos.z = pos.z.clamp(0.0, bz);
            climb = -climb;
        }
        let jitter = Vec3::new(
            normal(&mut rng, cfg.jitter_m),
            normal(&mut rng, cfg.jitter_m),
            normal(&mut rng, cfg.jitter_m),
        );
        let look = Quat::rz_deg(yaw + normal(&mut rng, 5.0))
            * Quat::exp(Vec3::new(0.0, normal(&mut rng, 5.0).to_radians(), 0.0))
            * Quat::exp(Vec3::new(normal(&mut rng, 3.0).to_radians(), 0.0, 0.0));
        poses.push(Pose::new(look, pos + jitter));
    }
    poses
}

/// Builds the scene database. Sequences `1..=train_sequences` are train,
/// the following `test_sequences` are test.
pub fn generate_scene(cfg: &SynthSceneConfig) -> Result<SceneDatabase, SceneError> {
    let mut records = Vec::new();
    for scene in &cfg.scenes {
        for seq in 1..=cfg.train_sequences + cfg.test_sequences {
            let split = if seq <= cfg.train_sequences {
                Split::Train
            } else {
                Split::Test
            };
            for (f, pose) in trajectory(cfg, scene, seq).into_iter().enumerate() {
                records.push(ImageRecord {
                    id: format!("{scene}/seq-{seq:02}/frame-{f:06}"),
                    scene: scene.clone(),
                    pose,
                    split,
                });
            }
        }
    }
    SceneDatabase::new(records)
}
