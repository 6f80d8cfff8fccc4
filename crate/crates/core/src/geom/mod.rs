//! Quaternion, vector and ray primitives, midpoint triangulation and
//! rotation averaging.
//!
//! Quaternions are stored `(w, x, y, z)` and always unit, sign-canonical.

mod averaging;
mod quat;
mod ray;
mod vec3;

pub use averaging::{
    chordal_l2_mean, l1_geodesic_cost, l1_geodesic_median, l1_geodesic_median_traced, MedianTrace,
    WEISZFELD_ANCHOR_EPS, WEISZFELD_MAX_ITERS, WEISZFELD_STEP_TOL,
};
pub use quat::{Quat, ORTHONORMAL_TOL};
pub use ray::{triangulate_midpoint, triangulate_midpoint_with, Ray, Triangulation, PARALLEL_EPS};
pub use vec3::Vec3;

use thiserror::Error;

/// Row-major 3×3 matrix.
pub type Mat3<T> = [[T; 3]; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("matrix is not a rotation (orthonormality deviation {deviation:e}, det {det})")]
    NonRotationMatrix { deviation: f64, det: f64 },
    #[error("rays are near-parallel (|cos| = {cos})")]
    DegenerateRays { cos: f64 },
    #[error("empty input")]
    EmptyInput,
    #[error("vector has zero or non-finite norm")]
    ZeroNorm,
}

/// Applies a row-major 3×3 matrix to a vector.
pub fn mat_apply<T: crate::Real>(m: &Mat3<T>, v: Vec3<T>) -> Vec3<T> {
    Vec3::new(
        m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
        m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
        m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    type Q = Quat<f64>;
    type V = Vec3<f64>;

    fn mat_mul(a: &Mat3<f64>, b: &Mat3<f64>) -> Mat3<f64> {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        out
    }

    fn assert_quat_eq(a: Q, b: Q, tol: f64) {
        for (x, y) in a.to_array().iter().zip(b.to_array()) {
            assert_abs_diff_eq!(*x, y, epsilon = tol);
        }
    }

    #[test]
    fn mul_identity_and_inverse() {
        let q = Q::new(0.3, -0.2, 0.9, 0.1).unwrap();
        assert_quat_eq(Q::identity() * q, q, 1e-15);
        assert_quat_eq(q * q.conj(), Q::identity(), 1e-15);
    }

    #[test]
    fn mul_composes_like_matrices() {
        let prod = Q::rz_deg(30.0) * Q::rz_deg(60.0);
        assert_quat_eq(prod, Q::rz_deg(90.0), 1e-12);
        // matrix-product oracle
        let m = mat_mul(&Q::rz_deg(30.0).to_matrix(), &Q::rz_deg(60.0).to_matrix());
        let pm = prod.to_matrix();
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(m[i][j], pm[i][j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn angle_examples() {
        assert_eq!(Q::identity().angle_deg(Q::identity()), 0.0);
        assert_abs_diff_eq!(Q::identity().angle_deg(Q::rz_deg(90.0)), 90.0, epsilon = 1e-12);
        let q = Q::new(0.5, 0.5, -0.5, 0.5).unwrap();
        let neg = Q::from_array(q.to_array().map(|c| -c)).unwrap();
        assert_eq!(q.angle_deg(neg), 0.0);
        assert_abs_diff_eq!(Q::identity().angle_deg(Q::rz_deg(180.0)), 180.0, epsilon = 1e-12);
    }

    #[test]
    fn canonical_sign() {
        let q = Q::new(-1.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(q, Q::identity());
        let q = Q::new(0.0, -1.0, 0.0, 0.0).unwrap();
        assert_eq!(q.to_array(), [0.0, 1.0, 0.0, 0.0]);
        let q = Q::new(0.0, 0.0, 0.0, -2.0).unwrap();
        assert_eq!(q.to_array(), [0.0, 0.0, 0.0, 1.0]);
        assert_eq!(Q::new(0.0, 0.0, 0.0, 0.0), Err(GeomError::ZeroNorm));
    }

    #[test]
    fn rotate_examples() {
        let v = V::new(0.3, -1.2, 4.0);
        assert_eq!(Q::identity().rotate(v), v);
        let r = Q::rz_deg(90.0).rotate(V::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(r.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.y, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.z, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn matrix_examples() {
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert_eq!(Q::from_matrix(&id).unwrap(), Q::identity());
        let rx180 = [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]];
        assert_eq!(Q::from_matrix(&rx180).unwrap().to_array(), [0.0, 1.0, 0.0, 0.0]);
        let skewed = [[1.0, 0.01, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(matches!(
            Q::from_matrix(&skewed),
            Err(GeomError::NonRotationMatrix { .. })
        ));
        let reflection = [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(matches!(
            Q::from_matrix(&reflection),
            Err(GeomError::NonRotationMatrix { .. })
        ));
    }

    #[test]
    fn exp_log_roundtrip() {
        let v = V::new(0.4, -1.1, 0.7);
        let l = Q::exp(v).log();
        assert_abs_diff_eq!((l - v).norm(), 0.0, epsilon = 1e-14);
        let tiny = V::new(1e-13, 0.0, -2e-13);
        assert_abs_diff_eq!((Q::exp(tiny).log() - tiny).norm(), 0.0, epsilon = 1e-25);
    }

    #[test]
    fn triangulate_constructed_intersection() {
        let s13 = 13f64.sqrt();
        let r1 = Ray::new(V::zero(), V::new(2.0, 3.0, 0.0) / s13).unwrap();
        let r2 = Ray::new(V::new(4.0, 0.0, 0.0), V::new(-2.0, 3.0, 0.0) / s13).unwrap();
        let t = triangulate_midpoint(&r1, &r2).unwrap();
        assert_abs_diff_eq!((t.point - V::new(2.0, 3.0, 0.0)).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.gap, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.s1, s13, epsilon = 1e-12);
    }

    #[test]
    fn triangulate_skew_perpendicular() {
        let r1 = Ray::new(V::zero(), V::new(1.0, 0.0, 0.0)).unwrap();
        let r2 = Ray::new(V::new(0.0, 1.0, -1.0), V::new(0.0, 0.0, 1.0)).unwrap();
        let t = triangulate_midpoint(&r1, &r2).unwrap();
        assert_eq!(t.point, V::new(0.0, 0.5, 0.0));
        assert_eq!((t.s1, t.s2, t.gap), (0.0, 1.0, 1.0));
    }

    #[test]
    fn triangulate_rejects_parallel() {
        let r1 = Ray::new(V::zero(), V::new(1.0, 0.0, 0.0)).unwrap();
        let r2 = Ray::new(V::new(0.0, 1.0, 0.0), V::new(-1.0, 0.0, 0.0)).unwrap();
        assert!(matches!(
            triangulate_midpoint(&r1, &r2),
            Err(GeomError::DegenerateRays { .. })
        ));
    }

    /// Brute-force scan of the L2 chordal objective over rotations about z.
    fn scan_z(qs: &[Q], objective: impl Fn(Q) -> f64, maximize: bool) -> f64 {
        let mut best = (f64::NAN, if maximize { f64::NEG_INFINITY } else { f64::INFINITY });
        let mut deg = -180.0;
        while deg <= 180.0 {
            let v = objective(Q::rz_deg(deg));
            if (maximize && v > best.1) || (!maximize && v < best.1) {
                best = (deg, v);
            }
            deg += 0.001;
        }
        let _ = qs;
        best.0
    }

    #[test]
    fn chordal_mean_examples() {
        let q = Q::new(0.2, 0.4, -0.1, 0.8).unwrap();
        assert_quat_eq(chordal_l2_mean(&[q]).unwrap(), q, 1e-12);
        let neg = Q::from_array(q.to_array().map(|c| -c)).unwrap();
        assert!(chordal_l2_mean(&[q, neg]).unwrap().angle_deg(q) < 1e-9);
        assert_eq!(chordal_l2_mean::<f64>(&[]), Err(GeomError::EmptyInput));

        let qs = [Q::rz_deg(0.0), Q::rz_deg(10.0), Q::rz_deg(20.0)];
        let obj = |r: Q| qs.iter().map(|q| r.dot(*q).powi(2)).sum::<f64>();
        let best_deg = scan_z(&qs, obj, true);
        assert_abs_diff_eq!(best_deg, 10.0, epsilon = 2e-3);
        let m = chordal_l2_mean(&qs).unwrap();
        assert!(m.angle_deg(Q::rz_deg(10.0)) < 1e-6);
    }

    #[test]
    fn l1_median_examples() {
        let q = Q::new(0.9, 0.1, 0.3, -0.2).unwrap();
        assert!(l1_geodesic_median(&[q, q, q]).unwrap().angle_deg(q) < 1e-9);

        let minority = [Q::rz_deg(0.0), Q::rz_deg(0.0), Q::rz_deg(0.0), Q::rz_deg(90.0)];
        let cost = |r: Q| l1_geodesic_cost(r, &minority);
        assert_abs_diff_eq!(scan_z(&minority, cost, false), 0.0, epsilon = 2e-3);
        let m = l1_geodesic_median(&minority).unwrap();
        assert!(m.angle_deg(Q::rz_deg(0.0)) < 1e-6, "{}", m.angle_deg(Q::identity()));

        let sym = [Q::rz_deg(-10.0), Q::rz_deg(0.0), Q::rz_deg(10.0)];
        let m = l1_geodesic_median(&sym).unwrap();
        assert!(m.angle_deg(Q::identity()) < 1e-6);

        let two = [Q::rz_deg(0.0), Q::rz_deg(90.0)];
        let m = l1_geodesic_median(&two).unwrap();
        assert!(m.angle_deg(Q::rz_deg(45.0)) < 1e-6);

        assert_eq!(l1_geodesic_median::<f64>(&[]).unwrap_err(), GeomError::EmptyInput);
    }

    #[test]
    fn generic_over_f32() {
        let q = Quat::<f32>::rz_deg(30.0) * Quat::<f32>::rz_deg(60.0);
        assert!(q.angle_deg(Quat::<f32>::rz_deg(90.0)) < 1e-3);
        let m = l1_geodesic_median(&[Quat::<f32>::rz_deg(-10.0), Quat::identity(), Quat::rz_deg(10.0)]).unwrap();
        assert!(m.angle_deg(Quat::identity()) < 1e-2);
    }
}
