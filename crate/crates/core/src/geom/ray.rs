use super::{GeomError, Vec3};
use crate::scalar::Real;

/// Default near-parallel guard: rays with `|d1·d2| > 1 − 1e-6` are rejected.
pub const PARALLEL_EPS: f64 = 1e-6;

/// Half-line `origin + s·dir` with a unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray<T> {
    pub origin: Vec3<T>,
    dir: Vec3<T>,
}

impl<T: Real> Ray<T> {
    /// Builds a ray, normalizing `dir`.
    pub fn new(origin: Vec3<T>, dir: Vec3<T>) -> Result<Self, GeomError> {
        let dir = dir.try_normalize(T::lit(1e-12)).ok_or(GeomError::ZeroNorm)?;
        Ok(Self { origin, dir })
    }

    pub fn dir(&self) -> Vec3<T> {
        self.dir
    }

    pub fn at(&self, s: T) -> Vec3<T> {
        self.origin + self.dir * s
    }
}

/// Result of [`triangulate_midpoint`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangulation<T> {
    /// Midpoint of the common perpendicular.
    pub point: Vec3<T>,
    /// Parameter of the closest point along the first ray.
    pub s1: T,
    /// Parameter of the closest point along the second ray.
    pub s2: T,
    /// Length of the common perpendicular.
    pub gap: T,
}

/// Midpoint triangulation with the default parallel guard.
pub fn triangulate_midpoint<T: Real>(r1: &Ray<T>, r2: &Ray<T>) -> Result<Triangulation<T>, GeomError> {
    triangulate_midpoint_with(r1, r2, T::lit(PARALLEL_EPS))
}

/// Closest points of two lines via the 2×2 normal equations.
///
/// The parameters are not clamped to `s ≥ 0`; callers decide what a
/// negative depth means.
pub fn triangulate_midpoint_with<T: Real>(
    r1: &Ray<T>,
    r2: &Ray<T>,
    parallel_eps: T,
) -> Result<Triangulation<T>, GeomError> {
    let b = r1.dir.dot(r2.dir);
    if b.abs() > T::one() - parallel_eps {
        return Err(GeomError::DegenerateRays { cos: b.to_f64_lossy() });
    }
    let w = r1.origin - r2.origin;
    let d = r1.dir.dot(w);
    let e = r2.dir.dot(w);
    let denom = T::one() - b * b;
    let s1 = (b * e - d) / denom;
    let s2 = (e - b * d) / denom;
    let p1 = r1.at(s1);
    let p2 = r2.at(s2);
    Ok(Triangulation {
        point: (p1 + p2) * T::lit(0.5),
        s1,
        s2,
        gap: (p1 - p2).norm(),
    })
}
