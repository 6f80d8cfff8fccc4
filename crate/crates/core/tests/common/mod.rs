//! Random problem generators and brute-force oracles shared by the
//! integration tests. Oracles here deliberately avoid the library's own
//! triangulation and angle code paths.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reloc::fusion::NeighborObservation;
use reloc::relpose::{relative_pose, RelativePoseEstimate};
use reloc::{Posed, Quatd, Vec3d};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller, independent of the library's sampler
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn random_unit<R: Rng>(rng: &mut R) -> Vec3d {
    loop {
        let v = Vec3d::new(gauss(rng), gauss(rng), gauss(rng));
        if v.norm() > 1e-3 {
            return v / v.norm();
        }
    }
}

pub fn random_quat<R: Rng>(rng: &mut R) -> Quatd {
    loop {
        if let Ok(q) = Quatd::new(gauss(rng), gauss(rng), gauss(rng), gauss(rng)) {
            return q;
        }
    }
}

pub fn random_pose<R: Rng>(rng: &mut R, extent: f64) -> Posed {
    Posed::new(
        random_quat(rng),
        Vec3d::new(
            rng.random_range(-extent..extent),
            rng.random_range(-extent..extent),
            rng.random_range(-extent..extent),
        ),
    )
}

/// Query pose plus `n` database poses around it in general position:
/// pairwise ray directions differ by at least ~2.5°.
pub struct Problem {
    pub query: Posed,
    pub db: Vec<(String, Posed)>,
}

impl Problem {
    pub fn random<R: Rng>(rng: &mut R, n: usize) -> Self {
        let query = random_pose(rng, 2.0);
        'retry: loop {
            let mut db = Vec::with_capacity(n);
            let mut dirs: Vec<Vec3d> = Vec::new();
            for j in 0..n {
                let dir = random_unit(rng);
                let dist = rng.random_range(0.5..3.0);
                for d in &dirs {
                    if d.dot(dir).abs() > 0.999 {
                        continue 'retry;
                    }
                }
                dirs.push(dir);
                let center = query.center - dir * dist;
                db.push((format!("db{j:02}"), Posed::new(random_quat(rng), center)));
            }
            return Self { query, db };
        }
    }

    pub fn exact_estimates(&self) -> Vec<RelativePoseEstimate<f64>> {
        self.db
            .iter()
            .map(|(_, p)| relative_pose(p, &self.query).unwrap())
            .collect()
    }

    pub fn observations(&self, est: &[RelativePoseEstimate<f64>]) -> Vec<NeighborObservation<f64>> {
        self.db
            .iter()
            .zip(est)
            .map(|((id, p), e)| NeighborObservation::new(id.clone(), *p, *e))
            .collect()
    }
}

/// Fully corrupted estimate: uniform rotation and uniform direction.
pub fn corrupted<R: Rng>(rng: &mut R) -> RelativePoseEstimate<f64> {
    RelativePoseEstimate::new(random_quat(rng), random_unit(rng)).unwrap()
}

pub fn angle_acos_deg(a: Vec3d, b: Vec3d) -> f64 {
    (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Closest-point parameters from the cross-product closed form.
pub fn skew_line_params(o1: Vec3d, d1: Vec3d, o2: Vec3d, d2: Vec3d) -> Option<(f64, f64, Vec3d)> {
    let n = d1.cross(d2);
    let nn = n.dot(n);
    if nn < 1e-18 {
        return None;
    }
    let w = o2 - o1;
    let s1 = w.cross(d2).dot(n) / nn;
    let s2 = w.cross(d1).dot(n) / nn;
    let p = ((o1 + d1 * s1) + (o2 + d2 * s2)) * 0.5;
    Some((s1, s2, p))
}

/// Brute-force inlier table: for each id-sorted pair `(k, m)` that yields a
/// valid hypothesis, the number of other observations pointing at it.
pub fn brute_force_inlier_table(
    obs: &[NeighborObservation<f64>],
    thresh_deg: f64,
    parallel_eps: f64,
) -> Vec<((usize, usize), usize)> {
    let mut sorted: Vec<&NeighborObservation<f64>> = obs.iter().collect();
    sorted.sort_by(|a, b| a.db_id.cmp(&b.db_id));
    let mut table = Vec::new();
    for k in 0..sorted.len() {
        for m in k + 1..sorted.len() {
            let (a, b) = (sorted[k], sorted[m]);
            if a.world_dir.dot(b.world_dir).abs() > 1.0 - parallel_eps {
                continue;
            }
            let Some((s1, s2, p)) = skew_line_params(a.db_pose.center, a.world_dir, b.db_pose.center, b.world_dir)
            else {
                continue;
            };
            if s1 <= 0.0 || s2 <= 0.0 {
                continue;
            }
            let mut count = 0;
            for (r, o) in sorted.iter().enumerate() {
                if r == k || r == m {
                    continue;
                }
                let to = p - o.db_pose.center;
                if to.norm() > 0.0 && angle_acos_deg(o.world_dir, to) <= thresh_deg {
                    count += 1;
                }
            }
            table.push(((k, m), count));
        }
    }
    table
}

pub fn apply(g_rot: Quatd, g_t: Vec3d, p: &Posed) -> Posed {
    p.transformed(g_rot, g_t)
}
