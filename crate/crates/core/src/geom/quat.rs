use std::ops::Mul;

use super::{GeomError, Mat3, Vec3};
use crate::scalar::Real;

/// Maximum entry of `|MᵀM − I|` accepted by [`Quat::from_matrix`].
pub const ORTHONORMAL_TOL: f64 = 1e-6;

/// Unit quaternion `(w, x, y, z)` representing a 3-D rotation.
///
/// Every constructor normalizes and canonicalizes the sign so that `w ≥ 0`
/// (and, when `w = 0`, the first non-zero of `x, y, z` is positive). Two
/// quaternions describing the same rotation therefore compare equal up to
/// rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat<T> {
    w: T,
    x: T,
    y: T,
    z: T,
}

impl<T: Real> Default for Quat<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Quat<T> {
    pub fn identity() -> Self {
        Self {
            w: T::one(),
            x: T::zero(),
            y: T::zero(),
            z: T::zero(),
        }
    }

    /// Normalizes `(w, x, y, z)`. Fails on a zero or non-finite vector.
    pub fn new(w: T, x: T, y: T, z: T) -> Result<Self, GeomError> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < T::lit(1e-12) {
            return Err(GeomError::ZeroNorm);
        }
        Ok(Self::canonical(w / n, x / n, y / n, z / n))
    }

    pub fn from_array(a: [T; 4]) -> Result<Self, GeomError> {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// Rotation of `angle_rad` about `axis` (need not be unit).
    pub fn from_axis_angle(axis: Vec3<T>, angle_rad: T) -> Result<Self, GeomError> {
        let axis = axis.try_normalize(T::lit(1e-12)).ok_or(GeomError::ZeroNorm)?;
        let half = angle_rad * T::lit(0.5);
        let s = half.sin();
        Self::new(half.cos(), axis.x * s, axis.y * s, axis.z * s)
    }

    /// Rotation about the z axis by `deg` degrees.
    pub fn rz_deg(deg: T) -> Self {
        let half = deg.to_radians() * T::lit(0.5);
        Self::canonical(half.cos(), T::zero(), T::zero(), half.sin())
    }

    /// Exponential map from a rotation vector (axis · angle, radians).
    pub fn exp(v: Vec3<T>) -> Self {
        let theta = v.norm();
        let half = theta * T::lit(0.5);
        // sin(θ/2)/θ, Taylor-expanded near zero
        let k = if theta < T::tol(1e-6) {
            T::lit(0.5) - theta * theta / T::lit(48.0)
        } else {
            half.sin() / theta
        };
        let (w, x, y, z) = (half.cos(), v.x * k, v.y * k, v.z * k);
        let n = (w * w + x * x + y * y + z * z).sqrt();
        Self::canonical(w / n, x / n, y / n, z / n)
    }

    /// Logarithm map: rotation vector with angle in `[0, π]`.
    pub fn log(self) -> Vec3<T> {
        let v = Vec3::new(self.x, self.y, self.z);
        let n = v.norm();
        if n < T::tol(1e-9) {
            // θ ≈ 2n/w; w ≈ 1 here
            return v * (T::lit(2.0) / self.w);
        }
        let theta = T::lit(2.0) * n.atan2(self.w);
        v * (theta / n)
    }

    fn canonical(w: T, x: T, y: T, z: T) -> Self {
        let flip = if w != T::zero() {
            w < T::zero()
        } else if x != T::zero() {
            x < T::zero()
        } else if y != T::zero() {
            y < T::zero()
        } else {
            z < T::zero()
        };
        if flip {
            Self {
                w: -w,
                x: -x,
                y: -y,
                z: -z,
            }
        } else {
            Self { w, x, y, z }
        }
    }

    #[inline]
    pub fn w(&self) -> T {
        self.w
    }
    #[inline]
    pub fn x(&self) -> T {
        self.x
    }
    #[inline]
    pub fn y(&self) -> T {
        self.y
    }
    #[inline]
    pub fn z(&self) -> T {
        self.z
    }

    /// Components in `(w, x, y, z)` order.
    pub fn to_array(self) -> [T; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn cast<U: Real>(self) -> Quat<U> {
        let [w, x, y, z] = self.to_array().map(|c| U::lit(c.to_f64_lossy()));
        Quat::new(w, x, y, z).expect("cast of unit quaternion")
    }

    pub fn conj(self) -> Self {
        Self::canonical(self.w, -self.x, -self.y, -self.z)
    }

    /// 4-D dot product of the raw components.
    pub fn dot(self, o: Self) -> T {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    /// Hamilton product `self ⊗ o`, renormalized and sign-canonical.
    pub fn mul_quat(self, o: Self) -> Self {
        let (a, b) = (self, o);
        let w = a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z;
        let x = a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y;
        let y = a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x;
        let z = a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w;
        let n = (w * w + x * x + y * y + z * z).sqrt();
        Self::canonical(w / n, x / n, y / n, z / n)
    }

    /// Geodesic angle between the rotations, in degrees, `[0, 180]`.
    ///
    /// Equal to `2·acos(min(1, |a·b|))`, evaluated as
    /// `4·atan2(‖a − s·b‖, ‖a + s·b‖)` with `s = sign(a·b)` so that
    /// near-identical rotations give an accurate, exactly-zero-on-equal
    /// result.
    pub fn angle_deg(self, o: Self) -> T {
        self.angle_rad(o).to_degrees()
    }

    pub fn angle_rad(self, o: Self) -> T {
        let s = if self.dot(o) < T::zero() { -T::one() } else { T::one() };
        let d = [self.w - s * o.w, self.x - s * o.x, self.y - s * o.y, self.z - s * o.z];
        let p = [self.w + s * o.w, self.x + s * o.x, self.y + s * o.y, self.z + s * o.z];
        let nd = d.iter().fold(T::zero(), |acc, &c| acc + c * c).sqrt();
        let np = p.iter().fold(T::zero(), |acc, &c| acc + c * c).sqrt();
        T::lit(4.0) * nd.atan2(np)
    }

    /// Quaternion L2 distance `min(‖a − b‖, ‖a + b‖)`.
    pub fn chordal_distance(self, o: Self) -> T {
        let d = Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z);
        let p = Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z);
        let minus = (d.norm_squared() + (self.w - o.w).powi(2)).sqrt();
        let plus = (p.norm_squared() + (self.w + o.w).powi(2)).sqrt();
        minus.min(plus)
    }

    /// Rotates `v` by this quaternion.
    pub fn rotate(self, v: Vec3<T>) -> Vec3<T> {
        let u = Vec3::new(self.x, self.y, self.z);
        let two = T::lit(2.0);
        let t = u.cross(v) * two;
        v + t * self.w + u.cross(t)
    }

    /// Row-major 3×3 rotation matrix.
    pub fn to_matrix(self) -> Mat3<T> {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        let one = T::one();
        let two = T::lit(2.0);
        [
            [
                one - two * (y * y + z * z),
                two * (x * y - w * z),
                two * (x * z + w * y),
            ],
            [
                two * (x * y + w * z),
                one - two * (x * x + z * z),
                two * (y * z - w * x),
            ],
            [
                two * (x * z - w * y),
                two * (y * z + w * x),
                one - two * (x * x + y * y),
            ],
        ]
    }

    /// Rotation from a row-major 3×3 matrix.
    ///
    /// The matrix must satisfy `max |MᵀM − I| ≤ 1e-6` and have positive
    /// determinant.
    pub fn from_matrix(m: &Mat3<T>) -> Result<Self, GeomError> {
        let mut dev = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = T::zero();
                for r in m {
                    s = s + r[i] * r[j];
                }
                let target = if i == j { T::one() } else { T::zero() };
                dev = dev.max((s - target).abs());
            }
        }
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        if dev.is_nan() || dev > T::tol(ORTHONORMAL_TOL) || det.is_nan() || det <= T::zero() {
            return Err(GeomError::NonRotationMatrix {
                deviation: dev.to_f64_lossy(),
                det: det.to_f64_lossy(),
            });
        }

        // Shepperd: pivot on the largest of (trace, m00, m11, m22).
        let quarter = T::lit(0.25);
        let one = T::one();
        let tr = m[0][0] + m[1][1] + m[2][2];
        let (w, x, y, z);
        if tr >= m[0][0] && tr >= m[1][1] && tr >= m[2][2] {
            let s = (one + tr).sqrt() * T::lit(2.0);
            w = quarter * s;
            x = (m[2][1] - m[1][2]) / s;
            y = (m[0][2] - m[2][0]) / s;
            z = (m[1][0] - m[0][1]) / s;
        } else if m[0][0] >= m[1][1] && m[0][0] >= m[2][2] {
            let s = (one + m[0][0] - m[1][1] - m[2][2]).sqrt() * T::lit(2.0);
            w = (m[2][1] - m[1][2]) / s;
            x = quarter * s;
            y = (m[0][1] + m[1][0]) / s;
            z = (m[0][2] + m[2][0]) / s;
        } else if m[1][1] >= m[2][2] {
            let s = (one + m[1][1] - m[0][0] - m[2][2]).sqrt() * T::lit(2.0);
            w = (m[0][2] - m[2][0]) / s;
            x = (m[0][1] + m[1][0]) / s;
            y = quarter * s;
            z = (m[1][2] + m[2][1]) / s;
        } else {
            let s = (one + m[2][2] - m[0][0] - m[1][1]).sqrt() * T::lit(2.0);
            w = (m[1][0] - m[0][1]) / s;
            x = (m[0][2] + m[2][0]) / s;
            y = (m[1][2] + m[2][1]) / s;
            z = quarter * s;
        }
        Self::new(w, x, y, z)
    }
}

impl<T: Real> Mul for Quat<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        self.mul_quat(o)
    }
}

impl<T: Real> Mul<Vec3<T>> for Quat<T> {
    type Output = Vec3<T>;
    #[inline]
    fn mul(self, v: Vec3<T>) -> Vec3<T> {
        self.rotate(v)
    }
}
